//! End-to-end runs: scenarios, hybrid assessments, clustering and the report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analytics::{self, ClusterReport, ElbowReport, WeightFrontierMatrix};
use crate::emissions;
use crate::error::{Error, Result};
use crate::hybrid::{self, DmuFailure, HybridSolution, ObjectiveWeights};
use crate::io::{self, ClusterMode, RunConfig};
use crate::sbm::{self, DmuPanel, VariableSpec, VariableStats, WeightRule};
use crate::scenario::{self, CorrelationMode, PolicyRanking, ScenarioSpec};

/// Significant digits kept for every number in a report.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Default upper end of the elbow search.
pub const DEFAULT_MAX_K: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub epsilon: f64,
    pub us: f64,
    pub up: f64,
    pub weight_rule: WeightRule,
    pub seed: u64,
    pub cluster_mode: ClusterMode,
    pub standardize: bool,
    pub correlation: CorrelationMode,
    pub dmu_count: usize,
    pub variables: Vec<VariableSpec>,
    pub reciprocal_outputs: Vec<String>,
    pub emissions_column: Option<String>,
    pub scenario_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub dmu_id: String,
    pub per_fuel: BTreeMap<String, f64>,
    pub total: f64,
}

/// Assessment of one unit with rule-based weights, outside any scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub dmu_id: String,
    pub gamma: f64,
    pub eta: Option<f64>,
    pub eta_flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub weights: sbm::VariableWeights,
    pub records: Vec<BaselineRecord>,
    pub failures: Vec<DmuFailure>,
}

/// One unit under one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmuRecord {
    pub scenario_id: String,
    pub dmu_id: String,
    pub gamma: f64,
    /// `None` with `eta_flag` set when the sensitivity is not finite.
    pub eta: Option<f64>,
    pub eta_flag: Option<String>,
    pub observed_inputs: Vec<f64>,
    pub observed_outputs: Vec<f64>,
    pub target_inputs: Vec<f64>,
    pub target_outputs: Vec<f64>,
    pub outer_inputs: Vec<f64>,
    pub outer_outputs: Vec<f64>,
    pub inner_inputs: Vec<f64>,
    pub inner_outputs: Vec<f64>,
    /// Aggregated variable weights, inputs then outputs.
    pub weights: Vec<f64>,
    pub z: f64,
    pub xi: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub degenerate_scaling: bool,
    pub replay_max_violation: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub mean: f64,
    pub std_dev: f64,
    pub threshold: f64,
    pub flagged: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSection {
    /// Scenario id, or `best` for the optimal-scenario frontiers.
    pub source: String,
    pub dmu_ids: Vec<String>,
    /// Scenario each row came from.
    pub row_scenarios: Vec<String>,
    pub elbow: Option<ElbowReport>,
    pub report: ClusterReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub id: String,
    pub policy_order: Vec<String>,
    pub priorities: Vec<u32>,
    pub records: Vec<DmuRecord>,
    pub failures: Vec<DmuFailure>,
    pub sensitivity: Option<SensitivityReport>,
    pub clusters: Option<ClusterSection>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub dmu_id: String,
    /// `None` when no scenario solved this unit.
    pub best_scenario: Option<String>,
    pub best_gamma: Option<f64>,
    /// One entry per scenario, in `meta.scenario_ids` order.
    pub gammas: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: ReportMeta,
    pub descriptive: Vec<VariableStats>,
    pub emissions: Option<Vec<EmissionRecord>>,
    pub policies: Vec<PolicyRanking>,
    pub baseline: Baseline,
    pub scenarios: Vec<ScenarioSection>,
    pub comparison: Vec<ComparisonRow>,
    pub best_scenario_clusters: Option<ClusterSection>,
    pub warnings: Vec<String>,
}

/// Loads every input named by `config` and runs the full analysis.
pub fn run_pipeline(config: &RunConfig) -> Result<Report> {
    config.validate()?;
    let panel = io::load_panel(&config.panel, &config.roles)?;
    let policies = io::parse_policy_config(
        &io::read_text(&config.policies)?,
        &config.policies.display().to_string(),
    )?;
    let emissions = match &config.emissions {
        Some(e) => {
            let factors = io::parse_factors(&io::read_text(&e.factors)?, &e.factors.display().to_string())?;
            let consumption =
                io::parse_consumption(&io::read_text(&e.consumption)?, &e.consumption.display().to_string())?;
            Some((e.column.clone(), factors, consumption))
        }
        None => None,
    };
    let inputs = PipelineInputs {
        panel,
        policies,
        emissions,
    };
    run_with(config, &inputs)
}

/// Already parsed inputs of a run.
#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub panel: DmuPanel,
    pub policies: io::PolicyConfig,
    /// Output column to replace, fuel factors and consumption table.
    pub emissions: Option<(String, Vec<emissions::FuelFactor>, io::ConsumptionTable)>,
}

/// Runs the analysis on parsed inputs; file paths in `config` are ignored.
pub fn run_with(config: &RunConfig, inputs: &PipelineInputs) -> Result<Report> {
    config.validate()?;
    let weights = ObjectiveWeights::new(config.us, config.up)?;
    let mut warnings = Vec::new();

    let (panel, emission_records) = match &inputs.emissions {
        Some((column, factors, consumption)) => {
            let results = emissions::compute_panel(consumption, factors)?;
            let by_id: BTreeMap<&str, &emissions::EmissionResult> =
                results.iter().map(|(id, r)| (id.as_str(), r)).collect();
            let values = inputs
                .panel
                .dmu_ids()
                .iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .map(|r| r.total)
                        .ok_or_else(|| Error::validation(format!("no fuel consumption for unit '{id}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            let records = inputs
                .panel
                .dmu_ids()
                .iter()
                .map(|id| EmissionRecord {
                    dmu_id: id.clone(),
                    per_fuel: by_id[id.as_str()].per_fuel.clone(),
                    total: by_id[id.as_str()].total,
                })
                .collect();
            (inputs.panel.with_output_column(column, &values)?, Some(records))
        }
        None => (inputs.panel.clone(), None),
    };
    let descriptive = panel.describe();
    let variables = panel.variable_names();

    let policy_rankings = inputs
        .policies
        .policies
        .iter()
        .map(|p| scenario::rank_by_pearson(&panel, p, inputs.policies.correlation))
        .collect::<Result<Vec<_>>>()?;
    let scenarios = inputs.policies.scenarios()?;

    let model_panel = panel.reciprocal_outputs(&config.reciprocal_outputs)?;
    let baseline = baseline(&model_panel, config.weight_rule, config.epsilon)?;

    let mut sections = Vec::with_capacity(scenarios.len());
    for spec in &scenarios {
        sections.push(scenario_section(
            config,
            &model_panel,
            spec,
            &variables,
            &policy_rankings,
            weights,
        )?);
    }

    let scenario_ids: Vec<String> = scenarios.iter().map(|s| s.id.clone()).collect();
    let comparison = compare(&model_panel, &sections);

    let best_scenario_clusters = if matches!(config.cluster_mode, ClusterMode::BestScenario | ClusterMode::Both) {
        let mut rows = Vec::new();
        for row in &comparison {
            if let Some(best) = &row.best_scenario {
                let section = sections.iter().find(|s| &s.id == best).expect("scenario exists");
                let rec = section
                    .records
                    .iter()
                    .find(|r| r.dmu_id == row.dmu_id)
                    .expect("record exists");
                rows.push(rec);
            }
        }
        cluster_section(config, "best", &variables, &rows, &mut warnings)
    } else {
        None
    };

    for s in &sections {
        if !s.failures.is_empty() {
            warnings.push(format!("scenario {}: {} unit(s) failed", s.id, s.failures.len()));
        }
    }

    let report = Report {
        meta: ReportMeta {
            epsilon: config.epsilon,
            us: config.us,
            up: config.up,
            weight_rule: config.weight_rule,
            seed: config.seed,
            cluster_mode: config.cluster_mode,
            standardize: config.standardize,
            correlation: inputs.policies.correlation,
            dmu_count: panel.len(),
            variables: panel.variables().cloned().collect(),
            reciprocal_outputs: config.reciprocal_outputs.clone(),
            emissions_column: inputs.emissions.as_ref().map(|e| e.0.clone()),
            scenario_ids,
        },
        descriptive,
        emissions: emission_records,
        policies: policy_rankings,
        baseline,
        scenarios: sections,
        comparison,
        best_scenario_clusters,
        warnings,
    };
    normalize(&report)
}

fn eta_fields(eta: f64) -> (Option<f64>, Option<String>) {
    if eta.is_finite() {
        (Some(eta), None)
    } else if eta.is_nan() {
        (None, Some("undefined".into()))
    } else {
        (None, Some("infinite: no weighted input left at the inner edge".into()))
    }
}

fn baseline(panel: &DmuPanel, rule: WeightRule, epsilon: f64) -> Result<Baseline> {
    let weights = sbm::default_weights(panel, rule)?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for l in sorted_units(panel) {
        match sbm::assess(panel, &weights, epsilon, l) {
            Ok(a) => {
                let (eta, eta_flag) = eta_fields(a.sensitivity);
                records.push(BaselineRecord {
                    dmu_id: a.dmu_id,
                    gamma: a.score,
                    eta,
                    eta_flag,
                });
            }
            Err(e) => failures.push(DmuFailure {
                dmu_id: panel.dmu_ids()[l].clone(),
                scenario_id: "baseline".into(),
                message: e.to_string(),
                exit_code: e.exit_code(),
            }),
        }
    }
    Ok(Baseline {
        weights,
        records,
        failures,
    })
}

fn sorted_units(panel: &DmuPanel) -> Vec<usize> {
    let mut order: Vec<usize> = (0..panel.len()).collect();
    order.sort_by(|a, b| panel.dmu_ids()[*a].cmp(&panel.dmu_ids()[*b]));
    order
}

fn record(panel: &DmuPanel, sol: &HybridSolution, replay: f64) -> DmuRecord {
    let l = panel.dmu_index(&sol.dmu_id).expect("unit exists");
    let a = &sol.assessment;
    let (eta, eta_flag) = eta_fields(a.sensitivity);
    DmuRecord {
        scenario_id: sol.scenario_id.clone(),
        dmu_id: sol.dmu_id.clone(),
        gamma: a.score,
        eta,
        eta_flag,
        observed_inputs: panel.input_row(l).to_vec(),
        observed_outputs: panel.output_row(l).to_vec(),
        target_inputs: a.target_inputs.clone(),
        target_outputs: a.target_outputs.clone(),
        outer_inputs: a.outer_inputs.clone(),
        outer_outputs: a.outer_outputs.clone(),
        inner_inputs: a.inner_inputs.clone(),
        inner_outputs: a.inner_outputs.clone(),
        weights: sol.variable_weights.clone(),
        z: sol.z,
        xi: sol.xi,
        f_min: sol.scaling.f_min,
        f_max: sol.scaling.f_max,
        degenerate_scaling: sol.scaling.degenerate,
        replay_max_violation: replay,
        warnings: sol.warnings.clone(),
    }
}

fn scenario_section(
    config: &RunConfig,
    panel: &DmuPanel,
    spec: &ScenarioSpec,
    variables: &[String],
    policies: &[PolicyRanking],
    weights: ObjectiveWeights,
) -> Result<ScenarioSection> {
    let rankings = scenario::to_ranking_set(spec, variables, policies)?;
    let batch = hybrid::assess_scenario(panel, &rankings, config.epsilon, weights)?;
    let mut records = Vec::with_capacity(batch.solutions.len());
    for sol in &batch.solutions {
        let replay = sol.replay(panel, &rankings)?;
        records.push(record(panel, sol, replay.max_violation));
    }
    let mut warnings = Vec::new();
    let sensitivity = if records.is_empty() {
        None
    } else {
        let etas: Vec<f64> = records.iter().map(|r| r.eta.unwrap_or(f64::INFINITY)).collect();
        let s = analytics::sensitivity_stats(&etas)?;
        Some(SensitivityReport {
            mean: s.mean,
            std_dev: s.std_dev,
            threshold: s.threshold,
            flagged: s.flagged.iter().map(|&i| records[i].dmu_id.clone()).collect(),
        })
    };
    let clusters = if matches!(config.cluster_mode, ClusterMode::PerScenario | ClusterMode::Both) {
        let refs: Vec<&DmuRecord> = records.iter().collect();
        cluster_section(config, &spec.id, variables, &refs, &mut warnings)
    } else {
        None
    };
    Ok(ScenarioSection {
        id: spec.id.clone(),
        policy_order: spec.policy_order.clone(),
        priorities: rankings.priorities.clone(),
        records,
        failures: batch.failures,
        sensitivity,
        clusters,
        warnings,
    })
}

/// Clusters the weight frontiers of `records`. Problems are reported as
/// warnings so that the rest of the run still completes.
fn cluster_section(
    config: &RunConfig,
    source: &str,
    variables: &[String],
    records: &[&DmuRecord],
    warnings: &mut Vec<String>,
) -> Option<ClusterSection> {
    let n = records.len();
    if n < 2 {
        warnings.push(format!("clustering for {source} skipped: {n} unit(s) solved"));
        return None;
    }
    let built = WeightFrontierMatrix::new(
        records.iter().map(|r| r.dmu_id.clone()).collect(),
        variables.to_vec(),
        records.iter().map(|r| r.weights.clone()).collect(),
        records.iter().map(|r| r.gamma).collect(),
    )
    .map(|m| if config.standardize { m.standardized() } else { m });
    let matrix = match built {
        Ok(m) => m,
        Err(e) => {
            warnings.push(format!("clustering for {source} skipped: {e}"));
            return None;
        }
    };
    let (k, elbow) = match config.k {
        Some(k) if k > n => {
            warnings.push(format!(
                "clustering for {source} skipped: k = {k} exceeds the {n} units"
            ));
            return None;
        }
        Some(k) => (k, None),
        None => {
            let (lo, hi) = config.k_range.unwrap_or((1, DEFAULT_MAX_K));
            let hi = hi.min(n);
            if lo > hi {
                warnings.push(format!(
                    "clustering for {source} skipped: k range starts above the {n} units"
                ));
                return None;
            }
            match analytics::elbow(&matrix, lo..=hi, config.seed) {
                Ok(e) => (e.suggested_k, Some(e)),
                Err(e) => {
                    warnings.push(format!("clustering for {source} skipped: {e}"));
                    return None;
                }
            }
        }
    };
    match analytics::kmeans(&matrix, k, config.seed) {
        Ok(report) => Some(ClusterSection {
            source: source.to_string(),
            dmu_ids: matrix.dmu_ids.clone(),
            row_scenarios: records.iter().map(|r| r.scenario_id.clone()).collect(),
            elbow,
            report,
        }),
        Err(e) => {
            warnings.push(format!("clustering for {source} failed: {e}"));
            None
        }
    }
}

/// Highest γ per unit at report precision; ties go to the lexicographically
/// smallest scenario id.
fn compare(panel: &DmuPanel, sections: &[ScenarioSection]) -> Vec<ComparisonRow> {
    sorted_units(panel)
        .into_iter()
        .map(|l| {
            let id = &panel.dmu_ids()[l];
            let gammas: Vec<Option<f64>> = sections
                .iter()
                .map(|s| {
                    s.records
                        .iter()
                        .find(|r| &r.dmu_id == id)
                        .map(|r| round_significant(r.gamma))
                })
                .collect();
            let mut best: Option<(&str, f64)> = None;
            for (s, g) in sections.iter().zip(&gammas) {
                if let Some(g) = *g {
                    let better = match best {
                        None => true,
                        Some((bid, bg)) => g > bg || (g == bg && s.id.as_str() < bid),
                    };
                    if better {
                        best = Some((&s.id, g));
                    }
                }
            }
            ComparisonRow {
                dmu_id: id.clone(),
                best_scenario: best.map(|b| b.0.to_string()),
                best_gamma: best.map(|b| b.1),
                gammas,
            }
        })
        .collect()
}

/// Rounds `v` to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .expect("formatted float parses")
}

/// Rounds every number inside `v` to [`SIGNIFICANT_DIGITS`].
pub fn round_json_numbers(v: &mut Value) -> Result<()> {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            *v = serde_json::Number::from_f64(round_significant(x))
                .map(Value::Number)
                .ok_or_else(|| Error::Internal {
                    message: format!("non-finite number {x} in report"),
                    dump: String::new(),
                })?;
        }
        Value::Array(items) => items.iter_mut().try_for_each(round_json_numbers)?,
        Value::Object(map) => map.values_mut().try_for_each(round_json_numbers)?,
        _ => {}
    }
    Ok(())
}

/// Rounds every number of the report so that its JSON form parses back to
/// an identical value.
pub fn normalize(report: &Report) -> Result<Report> {
    let internal = |e: serde_json::Error| Error::Internal {
        message: format!("report serialization: {e}"),
        dump: String::new(),
    };
    let mut value = serde_json::to_value(report).map_err(internal)?;
    round_json_numbers(&mut value)?;
    serde_json::from_value(value).map_err(internal)
}

pub fn report_to_json(report: &Report) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Error::Internal {
        message: format!("report serialization: {e}"),
        dump: String::new(),
    })?;
    text.push('\n');
    Ok(text)
}

pub fn report_from_json(text: &str, source: &str) -> Result<Report> {
    serde_json::from_str(text).map_err(|e| {
        Error::parse(
            crate::Location {
                source: source.to_string(),
                row: Some(e.line()),
                column: None,
            },
            e.to_string(),
        )
    })
}

fn num(v: f64) -> String {
    round_significant(v).to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn write_csv(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Internal {
        message: format!("csv output: {e}"),
        dump: String::new(),
    };
    w.write_record(&header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal {
        message: format!("csv output: {e}"),
        dump: String::new(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn variable_names(report: &Report) -> Vec<String> {
    report.meta.variables.iter().map(|v| v.name.clone()).collect()
}

/// Tidy per-(scenario, unit) table: γ, η and the weight frontier.
pub fn records_csv(report: &Report) -> Result<String> {
    let names = variable_names(report);
    let mut header: Vec<String> = ["scenario_id", "dmu_id", "gamma", "eta", "eta_flag"]
        .map(String::from)
        .to_vec();
    header.extend(names.iter().map(|n| format!("W_{n}")));
    header.extend(["z", "xi", "degenerate_scaling"].map(String::from));
    let rows = report
        .scenarios
        .iter()
        .flat_map(|s| &s.records)
        .map(|r| {
            let mut row = vec![
                r.scenario_id.clone(),
                r.dmu_id.clone(),
                num(r.gamma),
                opt(r.eta),
                r.eta_flag.clone().unwrap_or_default(),
            ];
            row.extend(r.weights.iter().map(|w| num(*w)));
            row.extend([num(r.z), num(r.xi), r.degenerate_scaling.to_string()]);
            row
        })
        .collect();
    write_csv(header, rows)
}

/// Long table of observed, target and tape values per variable.
pub fn tape_csv(report: &Report) -> Result<String> {
    let header = [
        "scenario_id",
        "dmu_id",
        "variable",
        "role",
        "observed",
        "target",
        "outer",
        "inner",
    ]
    .map(String::from)
    .to_vec();
    let inputs: Vec<&VariableSpec> = report
        .meta
        .variables
        .iter()
        .filter(|v| v.role == sbm::Role::Input)
        .collect();
    let outputs: Vec<&VariableSpec> = report
        .meta
        .variables
        .iter()
        .filter(|v| v.role == sbm::Role::Output)
        .collect();
    let mut rows = Vec::new();
    for r in report.scenarios.iter().flat_map(|s| &s.records) {
        for (j, v) in inputs.iter().enumerate() {
            rows.push(vec![
                r.scenario_id.clone(),
                r.dmu_id.clone(),
                v.name.clone(),
                "input".into(),
                num(r.observed_inputs[j]),
                num(r.target_inputs[j]),
                num(r.outer_inputs[j]),
                num(r.inner_inputs[j]),
            ]);
        }
        for (j, v) in outputs.iter().enumerate() {
            rows.push(vec![
                r.scenario_id.clone(),
                r.dmu_id.clone(),
                v.name.clone(),
                "output".into(),
                num(r.observed_outputs[j]),
                num(r.target_outputs[j]),
                num(r.outer_outputs[j]),
                num(r.inner_outputs[j]),
            ]);
        }
    }
    write_csv(header, rows)
}

/// γ of every unit under every scenario and the best scenario.
pub fn comparison_csv(report: &Report) -> Result<String> {
    let mut header = vec!["dmu_id".to_string()];
    header.extend(report.meta.scenario_ids.iter().map(|s| format!("gamma_{s}")));
    header.extend(["best_scenario", "best_gamma"].map(String::from));
    let rows = report
        .comparison
        .iter()
        .map(|c| {
            let mut row = vec![c.dmu_id.clone()];
            row.extend(c.gammas.iter().map(|g| opt(*g)));
            row.push(c.best_scenario.clone().unwrap_or_default());
            row.push(opt(c.best_gamma));
            row
        })
        .collect();
    write_csv(header, rows)
}

/// Cluster membership with the clustered features, γ and η.
pub fn clusters_csv(report: &Report) -> Result<String> {
    let names = variable_names(report);
    let mut header: Vec<String> = ["source", "scenario_id", "dmu_id", "cluster"]
        .map(String::from)
        .to_vec();
    header.extend(names.iter().map(|n| format!("W_{n}")));
    header.extend(["gamma", "eta", "benchmark"].map(String::from));
    let sections = report
        .scenarios
        .iter()
        .filter_map(|s| s.clusters.as_ref())
        .chain(report.best_scenario_clusters.as_ref());
    let mut rows = Vec::new();
    for c in sections {
        for (i, id) in c.dmu_ids.iter().enumerate() {
            let scenario = &c.row_scenarios[i];
            let rec = report
                .scenarios
                .iter()
                .find(|s| &s.id == scenario)
                .and_then(|s| s.records.iter().find(|r| &r.dmu_id == id));
            let cluster = c.report.assignments[i];
            let mut row = vec![c.source.clone(), scenario.clone(), id.clone(), cluster.to_string()];
            match rec {
                Some(r) => {
                    row.extend(r.weights.iter().map(|w| num(*w)));
                    row.extend([num(r.gamma), opt(r.eta)]);
                }
                None => row.extend(std::iter::repeat_n(String::new(), names.len() + 2)),
            }
            let is_benchmark = c.report.benchmarks.get(cluster).and_then(|b| b.as_ref()) == Some(id);
            row.push(is_benchmark.to_string());
            rows.push(row);
        }
    }
    write_csv(header, rows)
}

/// Min, max, mean and sample standard deviation per variable.
pub fn descriptive_csv(report: &Report) -> Result<String> {
    let header = [
        "variable",
        "role",
        "unit",
        "observations",
        "min",
        "max",
        "mean",
        "std_dev",
    ]
    .map(String::from)
    .to_vec();
    let rows = report
        .descriptive
        .iter()
        .map(|s| {
            vec![
                s.name.clone(),
                match s.role {
                    sbm::Role::Input => "input".into(),
                    sbm::Role::Output => "output".into(),
                },
                s.unit.clone(),
                s.observations.to_string(),
                num(s.min),
                num(s.max),
                num(s.mean),
                num(s.std_dev),
            ]
        })
        .collect();
    write_csv(header, rows)
}

/// File names and contents of every output of a report.
pub fn render_outputs(report: &Report) -> Result<Vec<(&'static str, String)>> {
    Ok(vec![
        ("report.json", report_to_json(report)?),
        ("records.csv", records_csv(report)?),
        ("tape.csv", tape_csv(report)?),
        ("comparison.csv", comparison_csv(report)?),
        ("clusters.csv", clusters_csv(report)?),
        ("descriptive.csv", descriptive_csv(report)?),
    ])
}

pub fn write_outputs(report: &Report, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut written = Vec::new();
    for (name, text) in render_outputs(report)? {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
        written.push(path);
    }
    Ok(written)
}
