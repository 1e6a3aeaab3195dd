use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use sbm_opa::hybrid::{self, ObjectiveWeights};
use sbm_opa::io::{self, RunConfig};
use sbm_opa::pipeline::{self, round_significant};
use sbm_opa::sbm::{self, DmuPanel, WeightRule};
use sbm_opa::{analytics, emissions, opa, scenario, Error, Result};

/// Hybrid delta-SBM / OPA efficiency analysis.
#[derive(Parser)]
#[command(name = "sbmopa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ordinal priority weights from expert rankings.
    Opa {
        #[command(subcommand)]
        action: OpaAction,
    },
    /// Slack-based efficiency with rule-based weights.
    Sbm {
        #[command(subcommand)]
        action: SbmAction,
    },
    /// Hybrid assessment of every unit under one scenario.
    Hybrid {
        #[command(subcommand)]
        action: HybridAction,
    },
    /// Policy priority scenarios.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// CO2 emissions from fuel consumption.
    Emissions {
        #[command(subcommand)]
        action: EmissionsAction,
    },
    /// K-means over a weight-frontier matrix.
    Cluster(ClusterArgs),
    /// Full pipeline from a run configuration.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum OpaAction {
    Solve {
        /// Ranking JSON.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Subcommand)]
enum SbmAction {
    Assess {
        #[command(flatten)]
        panel: PanelArgs,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value = "max")]
        weight_rule: WeightRule,
        /// Only this unit.
        #[arg(long)]
        dmu: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Subcommand)]
enum HybridAction {
    Run {
        #[command(flatten)]
        model: ModelArgs,
        /// Scenario id; defaults to the first scenario.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        dmu: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    List {
        #[arg(long)]
        policies: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    Run {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Subcommand)]
enum EmissionsAction {
    Compute {
        /// Factor CSV: fuel,ncv,cef,cof.
        #[arg(long)]
        factors: PathBuf,
        /// Consumption CSV: dmu_id,<fuels...>.
        #[arg(long)]
        consumption: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct ClusterArgs {
    /// Matrix CSV: dmu_id,<features...>,gamma.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, conflicts_with = "k_range")]
    k: Option<usize>,
    /// Elbow search range, e.g. 1..6.
    #[arg(long, value_parser = parse_k_range)]
    k_range: Option<(usize, usize)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    us: Option<f64>,
    #[arg(long)]
    up: Option<f64>,
    #[arg(long)]
    weight_rule: Option<WeightRule>,
    #[arg(long, conflicts_with = "k_range")]
    k: Option<usize>,
    #[arg(long, value_parser = parse_k_range)]
    k_range: Option<(usize, usize)>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; every report file is written there.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct PanelArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long)]
    roles: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long)]
    policies: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    us: f64,
    #[arg(long, default_value_t = 0.5)]
    up: f64,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn parse_k_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once("..")
        .or_else(|| s.split_once('-'))
        .ok_or_else(|| format!("expected LO..HI, got '{s}'"))?;
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad lower bound in '{s}'"))?;
    let hi: usize = hi
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|_| format!("bad upper bound in '{s}'"))?;
    if lo == 0 || lo > hi {
        return Err(format!("k range {lo}..{hi} is empty"));
    }
    Ok((lo, hi))
}

/// Tabular output: a header and rows of cells.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |m: String| Error::Internal {
            message: format!("csv output: {m}"),
            dump: String::new(),
        };
        w.write_record(&self.header).map_err(|e| fail(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| fail(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| fail(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        round_significant(v).to_string()
    } else {
        String::new()
    }
}

fn json_text<T: Serialize>(value: &T) -> Result<String> {
    let internal = |e: serde_json::Error| Error::Internal {
        message: format!("json output: {e}"),
        dump: String::new(),
    };
    let mut v: Value = serde_json::to_value(value).map_err(internal)?;
    pipeline::round_json_numbers(&mut v)?;
    let mut text = serde_json::to_string_pretty(&v).map_err(internal)?;
    text.push('\n');
    Ok(text)
}

fn write_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("stdout", e)),
        _ => Ok(()),
    }
}

fn emit(output: &OutputArgs, text: String) -> Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e)),
        None => write_stdout(&text),
    }
}

fn render<T: Serialize>(output: &OutputArgs, value: &T, table: impl FnOnce() -> Table) -> Result<()> {
    let text = match output.format {
        Format::Json => json_text(value)?,
        Format::Csv => table().to_csv()?,
    };
    emit(output, text)
}

fn load_panel(args: &PanelArgs) -> Result<DmuPanel> {
    io::load_panel(&args.panel, &args.roles)
}

fn load_policies(path: &Path) -> Result<io::PolicyConfig> {
    io::parse_policy_config(&io::read_text(path)?, &path.display().to_string())
}

fn select_units(panel: &DmuPanel, dmu: Option<&str>) -> Result<Vec<usize>> {
    match dmu {
        Some(id) => panel
            .dmu_index(id)
            .map(|l| vec![l])
            .ok_or_else(|| Error::validation(format!("unknown unit '{id}'"))),
        None => {
            let mut order: Vec<usize> = (0..panel.len()).collect();
            order.sort_by(|a, b| panel.dmu_ids()[*a].cmp(&panel.dmu_ids()[*b]));
            Ok(order)
        }
    }
}

#[derive(Serialize)]
struct OpaOutput {
    items: Vec<String>,
    objective: f64,
    weights: Vec<f64>,
    expert_weights: Vec<Vec<f64>>,
}

fn opa_solve(input: &Path, output: &OutputArgs) -> Result<()> {
    let instance = io::parse_ranking_instance(&io::read_text(input)?, &input.display().to_string())?;
    let sol = opa::solve_opa(&instance)?;
    let out = OpaOutput {
        items: sol.items.clone(),
        objective: sol.objective,
        weights: sol.aggregate(),
        expert_weights: sol.expert_weights.clone(),
    };
    render(output, &out, || {
        let mut t = Table::new(&["item", "weight"]);
        for (item, w) in out.items.iter().zip(&out.weights) {
            t.rows.push(vec![item.clone(), num(*w)]);
        }
        t
    })
}

#[derive(Serialize)]
struct AssessmentOutput {
    #[serde(flatten)]
    assessment: sbm::SbmAssessment,
    /// Replaces `sensitivity`, which may be infinite.
    eta: Option<f64>,
    eta_flag: Option<String>,
}

fn assessment_output(mut a: sbm::SbmAssessment) -> AssessmentOutput {
    let eta = a.sensitivity;
    a.sensitivity = if eta.is_finite() { eta } else { 0.0 };
    AssessmentOutput {
        assessment: a,
        eta: eta.is_finite().then_some(eta),
        eta_flag: (!eta.is_finite()).then(|| "infinite: no weighted input left at the inner edge".to_string()),
    }
}

#[derive(Serialize)]
struct SbmOutput {
    weights: sbm::VariableWeights,
    assessments: Vec<AssessmentOutput>,
}

fn sbm_assess(
    panel_args: &PanelArgs,
    epsilon: f64,
    rule: WeightRule,
    dmu: Option<&str>,
    output: &OutputArgs,
) -> Result<()> {
    let panel = load_panel(panel_args)?;
    let weights = sbm::default_weights(&panel, rule)?;
    let assessments = select_units(&panel, dmu)?
        .into_iter()
        .map(|l| sbm::assess(&panel, &weights, epsilon, l).map(assessment_output))
        .collect::<Result<Vec<_>>>()?;
    let out = SbmOutput { weights, assessments };
    render(output, &out, || {
        let mut t = Table::new(&["dmu_id", "gamma", "eta", "eta_flag", "objective"]);
        for a in &out.assessments {
            t.rows.push(vec![
                a.assessment.dmu_id.clone(),
                num(a.assessment.score),
                a.eta.map(num).unwrap_or_default(),
                a.eta_flag.clone().unwrap_or_default(),
                num(a.assessment.objective),
            ]);
        }
        t
    })
}

#[derive(Serialize)]
struct HybridRecord {
    #[serde(flatten)]
    solution: hybrid::HybridSolution,
    eta: Option<f64>,
    eta_flag: Option<String>,
    replay_max_violation: f64,
}

#[derive(Serialize)]
struct HybridOutput {
    scenario_id: String,
    policy_order: Vec<String>,
    records: Vec<HybridRecord>,
    failures: Vec<hybrid::DmuFailure>,
}

fn run_scenario(
    panel: &DmuPanel,
    policies: &io::PolicyConfig,
    spec: &scenario::ScenarioSpec,
    model: &ModelArgs,
    dmu: Option<&str>,
) -> Result<HybridOutput> {
    let rankings: Vec<_> = policies
        .policies
        .iter()
        .map(|p| scenario::rank_by_pearson(panel, p, policies.correlation))
        .collect::<Result<_>>()?;
    let set = scenario::to_ranking_set(spec, &panel.variable_names(), &rankings)?;
    let weights = ObjectiveWeights::new(model.us, model.up)?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for l in select_units(panel, dmu)? {
        match hybrid::solve_hybrid(panel, &set, model.epsilon, weights, l) {
            Ok(mut sol) => {
                let replay = sol.replay(panel, &set)?.max_violation;
                let eta = sol.assessment.sensitivity;
                let a = assessment_output(sol.assessment.clone());
                sol.assessment = a.assessment;
                records.push(HybridRecord {
                    solution: sol,
                    eta: eta.is_finite().then_some(eta),
                    eta_flag: a.eta_flag,
                    replay_max_violation: replay,
                });
            }
            Err(e) => failures.push(hybrid::DmuFailure {
                dmu_id: panel.dmu_ids()[l].clone(),
                scenario_id: spec.id.clone(),
                message: e.to_string(),
                exit_code: e.exit_code(),
            }),
        }
    }
    Ok(HybridOutput {
        scenario_id: spec.id.clone(),
        policy_order: spec.policy_order.clone(),
        records,
        failures,
    })
}

fn hybrid_table(panel: &DmuPanel, outputs: &[HybridOutput]) -> Table {
    let mut header = vec!["scenario_id".to_string(), "dmu_id".into(), "gamma".into(), "eta".into()];
    header.extend(panel.variable_names().iter().map(|n| format!("W_{n}")));
    header.extend(["z".to_string(), "xi".into(), "replay_max_violation".into()]);
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for o in outputs {
        for r in &o.records {
            let s = &r.solution;
            let mut row = vec![
                s.scenario_id.clone(),
                s.dmu_id.clone(),
                num(s.assessment.score),
                r.eta.map(num).unwrap_or_default(),
            ];
            row.extend(s.variable_weights.iter().map(|w| num(*w)));
            row.extend([num(s.z), num(s.xi), num(r.replay_max_violation)]);
            t.rows.push(row);
        }
    }
    t
}

/// Solver failures turn the exit code to 3 after the output is written.
fn failure_status(outputs: &[HybridOutput]) -> Result<()> {
    let failed: usize = outputs.iter().map(|o| o.failures.len()).sum();
    if failed > 0 {
        return Err(Error::solver(
            "hybrid",
            format!("{failed} unit(s) could not be solved; see the failures in the output"),
        ));
    }
    Ok(())
}

fn hybrid_run(model: &ModelArgs, scenario_id: Option<&str>, dmu: Option<&str>, output: &OutputArgs) -> Result<()> {
    let panel = load_panel(&model.panel)?;
    let policies = load_policies(&model.policies)?;
    let scenarios = policies.scenarios()?;
    let spec = match scenario_id {
        Some(id) => scenarios
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::validation(format!("unknown scenario '{id}'")))?,
        None => &scenarios[0],
    };
    let out = run_scenario(&panel, &policies, spec, model, dmu)?;
    let outputs = [out];
    render(output, &outputs[0], || hybrid_table(&panel, &outputs))?;
    failure_status(&outputs)
}

fn scenarios_run(model: &ModelArgs, output: &OutputArgs) -> Result<()> {
    let panel = load_panel(&model.panel)?;
    let policies = load_policies(&model.policies)?;
    let outputs = policies
        .scenarios()?
        .iter()
        .map(|spec| run_scenario(&panel, &policies, spec, model, None))
        .collect::<Result<Vec<_>>>()?;
    render(output, &outputs, || hybrid_table(&panel, &outputs))?;
    failure_status(&outputs)
}

#[derive(Serialize)]
struct ScenarioListing {
    id: String,
    policy_order: Vec<String>,
    priorities: Vec<u32>,
}

fn scenarios_list(path: &Path, output: &OutputArgs) -> Result<()> {
    let policies = load_policies(path)?;
    let names = policies.policy_names();
    let list = policies
        .scenarios()?
        .into_iter()
        .map(|s| {
            Ok(ScenarioListing {
                priorities: s.priorities(&names)?,
                id: s.id,
                policy_order: s.policy_order,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    render(output, &list, || {
        let mut t = Table::new(&["id", "order"]);
        for s in &list {
            t.rows.push(vec![s.id.clone(), s.policy_order.join(" > ")]);
        }
        t
    })
}

#[derive(Serialize)]
struct EmissionRow {
    dmu_id: String,
    #[serde(flatten)]
    result: emissions::EmissionResult,
}

fn emissions_compute(factors: &Path, consumption: &Path, output: &OutputArgs) -> Result<()> {
    let factors = io::parse_factors(&io::read_text(factors)?, &factors.display().to_string())?;
    let table = io::parse_consumption(&io::read_text(consumption)?, &consumption.display().to_string())?;
    let rows: Vec<EmissionRow> = emissions::compute_panel(&table, &factors)?
        .into_iter()
        .map(|(dmu_id, result)| EmissionRow { dmu_id, result })
        .collect();
    render(output, &rows, || {
        let fuels: Vec<String> = factors.iter().map(|f| f.fuel.clone()).collect();
        let mut header = vec!["dmu_id".to_string()];
        header.extend(fuels.iter().map(|f| format!("co2_{f}")));
        header.push("co2_total".into());
        let mut t = Table {
            header,
            rows: Vec::new(),
        };
        for r in &rows {
            let mut row = vec![r.dmu_id.clone()];
            row.extend(
                fuels
                    .iter()
                    .map(|f| r.result.per_fuel.get(f).map(|v| num(*v)).unwrap_or_default()),
            );
            row.push(num(r.result.total));
            t.rows.push(row);
        }
        t
    })
}

#[derive(Serialize)]
struct ClusterOutput {
    elbow: Option<analytics::ElbowReport>,
    dmu_ids: Vec<String>,
    report: analytics::ClusterReport,
}

fn cluster(args: &ClusterArgs) -> Result<()> {
    let text = io::read_text(&args.matrix)?;
    let mut matrix = io::parse_weight_matrix(&text, &args.matrix.display().to_string())?;
    if args.standardize {
        matrix = matrix.standardized();
    }
    let n = matrix.rows.len();
    let (k, elbow) = match args.k {
        Some(k) => (k, None),
        None => {
            let (lo, hi) = args.k_range.unwrap_or((1, pipeline::DEFAULT_MAX_K.min(n)));
            let e = analytics::elbow(&matrix, lo..=hi, args.seed)?;
            (e.suggested_k, Some(e))
        }
    };
    let report = analytics::kmeans(&matrix, k, args.seed)?;
    let out = ClusterOutput {
        elbow,
        dmu_ids: matrix.dmu_ids.clone(),
        report,
    };
    render(&args.output, &out, || {
        let mut header = vec!["dmu_id", "cluster"];
        header.extend(matrix.feature_names.iter().map(String::as_str));
        header.extend(["gamma", "benchmark"]);
        let mut t = Table::new(&header);
        for (i, id) in out.dmu_ids.iter().enumerate() {
            let c = out.report.assignments[i];
            let mut row = vec![id.clone(), c.to_string()];
            row.extend(matrix.rows[i].iter().map(|v| num(*v)));
            row.push(num(matrix.scores[i]));
            row.push((out.report.benchmarks[c].as_ref() == Some(id)).to_string());
            t.rows.push(row);
        }
        t
    })
}

fn report(args: &ReportArgs) -> Result<()> {
    let mut config: RunConfig = io::load_run_config(&args.config)?;
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.us {
        config.us = v;
        config.up = args.up.unwrap_or(1.0 - v);
    } else if let Some(v) = args.up {
        config.up = v;
        config.us = 1.0 - v;
    }
    if let Some(v) = args.weight_rule {
        config.weight_rule = v;
    }
    if let Some(v) = args.k {
        config.k = Some(v);
        config.k_range = None;
    }
    if let Some(v) = args.k_range {
        config.k_range = Some(v);
        config.k = None;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    let out_dir = args.out.clone().or_else(|| config.out_dir.clone());
    let report = pipeline::run_pipeline(&config)?;
    match out_dir {
        Some(dir) => {
            for path in pipeline::write_outputs(&report, &dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => match args.format {
            Format::Json => write_stdout(&pipeline::report_to_json(&report)?)?,
            Format::Csv => write_stdout(&pipeline::records_csv(&report)?)?,
        },
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Opa {
            action: OpaAction::Solve { input, output },
        } => opa_solve(&input, &output),
        Command::Sbm {
            action:
                SbmAction::Assess {
                    panel,
                    epsilon,
                    weight_rule,
                    dmu,
                    output,
                },
        } => sbm_assess(&panel, epsilon, weight_rule, dmu.as_deref(), &output),
        Command::Hybrid {
            action:
                HybridAction::Run {
                    model,
                    scenario,
                    dmu,
                    output,
                },
        } => hybrid_run(&model, scenario.as_deref(), dmu.as_deref(), &output),
        Command::Scenarios { action } => match action {
            ScenarioAction::List { policies, output } => scenarios_list(&policies, &output),
            ScenarioAction::Run { model, output } => scenarios_run(&model, &output),
        },
        Command::Emissions {
            action:
                EmissionsAction::Compute {
                    factors,
                    consumption,
                    output,
                },
        } => emissions_compute(&factors, &consumption, &output),
        Command::Cluster(args) => cluster(&args),
        Command::Report(args) => report(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
