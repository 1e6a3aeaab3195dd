//! Input formats.
//!
//! Every parser takes the document text plus a source name used in error
//! locations; the `load_*` helpers read a file first. Formats:
//!
//! - panel CSV: header `dmu_id,<variables...>`, one row per unit
//! - roles JSON: `{"variables": [{"name": "L", "role": "input", "unit": "..."}]}`
//! - ranking JSON: `{"items": [...]?, "experts": [{"rank": 1, "item_ranks": {"L": 4, ...}}]}`
//! - policy JSON: `{"correlation": "signed", "policies": [...], "scenarios": "all-permutations" | [...]}`
//! - factor CSV: `fuel,ncv,cef,cof`
//! - consumption CSV: `dmu_id,<fuel columns...>`
//! - run configuration JSON, see [`RunConfig`]

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analytics::WeightFrontierMatrix;
use crate::emissions::FuelFactor;
use crate::error::{Error, Location, Result};
use crate::opa::{ExpertRanking, RankingInstance};
use crate::sbm::{DmuPanel, Role, VariableSpec, WeightRule};
use crate::scenario::{CorrelationMode, PolicyDefinition, ScenarioSpec};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn json_error(source: &str, e: serde_json::Error) -> Error {
    let loc = Location {
        source: source.to_string(),
        row: Some(e.line()),
        column: None,
    };
    Error::parse(loc, e.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolesConfig {
    pub variables: Vec<VariableSpec>,
}

pub fn parse_roles(text: &str, source: &str) -> Result<RolesConfig> {
    let roles: RolesConfig = serde_json::from_str(text).map_err(|e| json_error(source, e))?;
    let mut seen = HashSet::new();
    for v in &roles.variables {
        if v.name.trim().is_empty() {
            return Err(Error::parse(Location::document(source), "variable with an empty name"));
        }
        if !seen.insert(v.name.as_str()) {
            return Err(Error::parse(
                Location::document(source),
                format!("variable '{}' is listed twice", v.name),
            ));
        }
    }
    Ok(roles)
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn csv_error(source: &str, e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize);
    Error::parse(
        Location {
            source: source.to_string(),
            row,
            column: None,
        },
        e.to_string(),
    )
}

fn number(cell: &str, source: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| Error::parse(Location::cell(source, row, column), format!("'{cell}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(
            Location::cell(source, row, column),
            format!("'{cell}' is not finite"),
        ));
    }
    Ok(v)
}

type IdRows = Vec<(String, Vec<f64>)>;

/// Header and data rows of a CSV whose first column is `dmu_id`.
fn id_table(text: &str, source: &str) -> Result<(Vec<String>, IdRows)> {
    let mut rdr = csv_reader(text);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(source, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("dmu_id") {
        return Err(Error::parse(
            Location::document(source),
            "first column must be 'dmu_id'",
        ));
    }
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::parse(
                Location::document(source),
                format!("duplicate column '{h}'"),
            ));
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(source, e))?;
        let id = rec.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::parse(Location::cell(source, row, "dmu_id"), "empty unit id"));
        }
        let values = header[1..]
            .iter()
            .enumerate()
            .map(|(c, name)| number(rec.get(c + 1).unwrap_or(""), source, row, name))
            .collect::<Result<Vec<_>>>()?;
        rows.push((id, values));
    }
    Ok((header[1..].to_vec(), rows))
}

/// Reads a panel; `roles` decides which columns are inputs and outputs and
/// in which order they appear.
pub fn parse_panel(text: &str, source: &str, roles: &RolesConfig) -> Result<DmuPanel> {
    let (columns, rows) = id_table(text, source)?;
    for c in &columns {
        if !roles.variables.iter().any(|v| &v.name == c) {
            return Err(Error::parse(
                Location::document(source),
                format!("column '{c}' has no role in the roles configuration"),
            ));
        }
    }
    let mut index = Vec::with_capacity(roles.variables.len());
    for v in &roles.variables {
        let pos = columns
            .iter()
            .position(|c| c == &v.name)
            .ok_or_else(|| Error::parse(Location::document(source), format!("column '{}' is missing", v.name)))?;
        index.push(pos);
    }
    let pick = |role: Role| -> (Vec<VariableSpec>, Vec<usize>) {
        roles
            .variables
            .iter()
            .zip(&index)
            .filter(|(v, _)| v.role == role)
            .map(|(v, i)| (v.clone(), *i))
            .unzip()
    };
    let (inputs, in_idx) = pick(Role::Input);
    let (outputs, out_idx) = pick(Role::Output);
    for (id, values) in &rows {
        for (spec, &i) in inputs.iter().zip(&in_idx).chain(outputs.iter().zip(&out_idx)) {
            if values[i] <= 0.0 {
                let row = rows.iter().position(|r| &r.0 == id).unwrap_or(0) + 1;
                return Err(Error::parse(
                    Location::cell(source, row, spec.name.clone()),
                    format!("unit '{id}': value {} must be strictly positive", values[i]),
                ));
            }
        }
    }
    DmuPanel::new(
        rows.iter().map(|r| r.0.clone()).collect(),
        inputs,
        outputs,
        rows.iter().map(|r| in_idx.iter().map(|i| r.1[*i]).collect()).collect(),
        rows.iter().map(|r| out_idx.iter().map(|i| r.1[*i]).collect()).collect(),
    )
}

pub fn load_panel(csv_path: &Path, roles_path: &Path) -> Result<DmuPanel> {
    let roles = parse_roles(&read_text(roles_path)?, &roles_path.display().to_string())?;
    parse_panel(&read_text(csv_path)?, &csv_path.display().to_string(), &roles)
}

/// Writes a panel in the CSV layout [`parse_panel`] reads.
pub fn panel_to_csv(panel: &DmuPanel) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dmu_id".to_string()];
    header.extend(panel.variable_names());
    w.write_record(&header).map_err(|e| csv_error("panel", e))?;
    for (i, id) in panel.dmu_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(
            panel
                .input_row(i)
                .iter()
                .chain(panel.output_row(i))
                .map(|v| v.to_string()),
        );
        w.write_record(&rec).map_err(|e| csv_error("panel", e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::validation(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::validation(e.to_string()))
}

fn positive_rank(v: &Value, source: &str, what: &str) -> Result<u32> {
    v.as_u64()
        .filter(|r| *r >= 1 && *r <= u32::MAX as u64)
        .map(|r| r as u32)
        .ok_or_else(|| {
            Error::parse(
                Location::document(source),
                format!("{what}: expected a positive integer rank, got {v}"),
            )
        })
}

/// Ranking instance from JSON. Item order is the `items` list when given,
/// otherwise the key order of the first expert.
pub fn parse_ranking_instance(text: &str, source: &str) -> Result<RankingInstance> {
    let doc: Value = serde_json::from_str(text).map_err(|e| json_error(source, e))?;
    let fail = |msg: String| Error::parse(Location::document(source), msg);
    let obj = doc.as_object().ok_or_else(|| fail("expected a JSON object".into()))?;
    for key in obj.keys() {
        if key != "items" && key != "experts" {
            return Err(fail(format!("unknown field '{key}'")));
        }
    }
    let experts = obj
        .get("experts")
        .and_then(Value::as_array)
        .ok_or_else(|| fail("missing 'experts' array".into()))?;
    if experts.is_empty() {
        return Err(fail("'experts' is empty".into()));
    }
    let maps = experts
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let e = e
                .as_object()
                .ok_or_else(|| fail(format!("expert #{} is not an object", k + 1)))?;
            let rank = positive_rank(
                e.get("rank")
                    .ok_or_else(|| fail(format!("expert #{} has no 'rank'", k + 1)))?,
                source,
                &format!("expert #{}", k + 1),
            )?;
            let ranks = e
                .get("item_ranks")
                .and_then(Value::as_object)
                .ok_or_else(|| fail(format!("expert #{} has no 'item_ranks' object", k + 1)))?;
            Ok((rank, ranks))
        })
        .collect::<Result<Vec<_>>>()?;

    let items: Vec<String> = match obj.get("items") {
        Some(list) => list
            .as_array()
            .ok_or_else(|| fail("'items' must be an array".into()))?
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| fail("'items' must hold strings".into()))
            })
            .collect::<Result<_>>()?,
        None => maps[0].1.keys().cloned().collect(),
    };
    let mut unique = HashSet::new();
    if let Some(dup) = items.iter().find(|i| !unique.insert(i.as_str())) {
        return Err(fail(format!("item '{dup}' is listed twice")));
    }

    let mut out = Vec::with_capacity(maps.len());
    for (k, (rank, ranks)) in maps.iter().enumerate() {
        if let Some(extra) = ranks.keys().find(|name| !unique.contains(name.as_str())) {
            return Err(fail(format!("expert #{} ranks unknown item '{extra}'", k + 1)));
        }
        let item_ranks = items
            .iter()
            .map(|name| {
                let v = ranks
                    .get(name)
                    .ok_or_else(|| fail(format!("expert #{} does not rank item '{name}'", k + 1)))?;
                positive_rank(v, source, &format!("expert #{} item '{name}'", k + 1))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(ExpertRanking {
            rank: *rank,
            item_ranks,
        });
    }
    RankingInstance::new(items, out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSelection {
    /// The string `"all-permutations"`.
    All(String),
    Listed(Vec<ListedScenario>),
}

impl Default for ScenarioSelection {
    fn default() -> Self {
        ScenarioSelection::All("all-permutations".into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListedScenario {
    pub id: String,
    pub order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default)]
    pub correlation: CorrelationMode,
    pub policies: Vec<PolicyDefinition>,
    #[serde(default)]
    pub scenarios: ScenarioSelection,
}

impl PolicyConfig {
    pub fn policy_names(&self) -> Vec<String> {
        self.policies.iter().map(|p| p.name.clone()).collect()
    }

    pub fn scenarios(&self) -> Result<Vec<ScenarioSpec>> {
        let names = self.policy_names();
        match &self.scenarios {
            ScenarioSelection::All(tag) if tag == "all-permutations" => crate::scenario::enumerate_scenarios(&names),
            ScenarioSelection::All(tag) => Err(Error::validation(format!(
                "scenarios must be \"all-permutations\" or a list, got \"{tag}\""
            ))),
            ScenarioSelection::Listed(list) => crate::scenario::explicit_scenarios(
                &names,
                list.iter()
                    .map(|s| ScenarioSpec {
                        id: s.id.clone(),
                        policy_order: s.order.clone(),
                    })
                    .collect(),
            ),
        }
    }
}

pub fn parse_policy_config(text: &str, source: &str) -> Result<PolicyConfig> {
    let cfg: PolicyConfig = serde_json::from_str(text).map_err(|e| json_error(source, e))?;
    cfg.scenarios().map_err(|e| match e {
        Error::Validation(m) => Error::parse(Location::document(source), m),
        other => other,
    })?;
    Ok(cfg)
}

pub fn parse_factors(text: &str, source: &str) -> Result<Vec<FuelFactor>> {
    let mut rdr = csv_reader(text);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(source, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != ["fuel", "ncv", "cef", "cof"] {
        return Err(Error::parse(
            Location::document(source),
            format!("expected header fuel,ncv,cef,cof, got {}", header.join(",")),
        ));
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(source, e))?;
        let fuel = rec.get(0).unwrap_or("").to_string();
        if fuel.is_empty() {
            return Err(Error::parse(Location::cell(source, row, "fuel"), "empty fuel name"));
        }
        if !seen.insert(fuel.clone()) {
            return Err(Error::parse(
                Location::cell(source, row, "fuel"),
                format!("fuel '{fuel}' listed twice"),
            ));
        }
        let get = |c: usize| number(rec.get(c).unwrap_or(""), source, row, &header[c]);
        let factor = FuelFactor {
            fuel,
            ncv: get(1)?,
            cef: get(2)?,
            cof: get(3)?,
        };
        factor
            .validate()
            .map_err(|e| Error::parse(Location::cell(source, row, "fuel"), e.to_string()))?;
        out.push(factor);
    }
    Ok(out)
}

pub type ConsumptionTable = Vec<(String, BTreeMap<String, f64>)>;

pub fn parse_consumption(text: &str, source: &str) -> Result<ConsumptionTable> {
    let (fuels, rows) = id_table(text, source)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (row, (id, values)) in rows.into_iter().enumerate() {
        if !seen.insert(id.clone()) {
            return Err(Error::parse(
                Location::cell(source, row + 1, "dmu_id"),
                format!("duplicate unit '{id}'"),
            ));
        }
        if let Some(c) = values.iter().position(|v| *v < 0.0) {
            return Err(Error::parse(
                Location::cell(source, row + 1, fuels[c].clone()),
                "consumption must be non-negative",
            ));
        }
        out.push((id, fuels.iter().cloned().zip(values).collect()));
    }
    Ok(out)
}

/// Weight-frontier matrix from CSV: `dmu_id`, one column per feature and a
/// final `gamma` column with the efficiency scores.
pub fn parse_weight_matrix(text: &str, source: &str) -> Result<WeightFrontierMatrix> {
    let (columns, rows) = id_table(text, source)?;
    if columns.last().map(String::as_str) != Some("gamma") || columns.len() < 2 {
        return Err(Error::parse(
            Location::document(source),
            "expected header dmu_id,<features...>,gamma",
        ));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = rows.iter().find(|r| !seen.insert(r.0.as_str())) {
        return Err(Error::parse(
            Location::document(source),
            format!("duplicate unit '{}'", dup.0),
        ));
    }
    let features = columns[..columns.len() - 1].to_vec();
    let d = features.len();
    WeightFrontierMatrix::new(
        rows.iter().map(|r| r.0.clone()).collect(),
        features,
        rows.iter().map(|r| r.1[..d].to_vec()).collect(),
        rows.iter().map(|r| r.1[d]).collect(),
    )
    .map_err(|e| Error::parse(Location::document(source), e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMode {
    #[default]
    PerScenario,
    BestScenario,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionsConfig {
    pub factors: PathBuf,
    pub consumption: PathBuf,
    /// Output column replaced by the computed emissions.
    pub column: String,
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_half() -> f64 {
    0.5
}

fn default_rule() -> WeightRule {
    WeightRule::Max
}

/// Everything a pipeline run needs. Relative paths are resolved against the
/// directory of the configuration file by [`load_run_config`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub panel: PathBuf,
    pub roles: PathBuf,
    pub policies: PathBuf,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_half")]
    pub us: f64,
    #[serde(default = "default_half")]
    pub up: f64,
    /// Rule for the baseline assessment without policy weights.
    #[serde(default = "default_rule")]
    pub weight_rule: WeightRule,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub k_range: Option<(usize, usize)>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cluster_mode: ClusterMode,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub reciprocal_outputs: Vec<String>,
    #[serde(default)]
    pub emissions: Option<EmissionsConfig>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::validation(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        crate::hybrid::ObjectiveWeights::new(self.us, self.up)?;
        if self.k == Some(0) {
            return Err(Error::validation("k must be at least 1"));
        }
        if let Some((lo, hi)) = self.k_range {
            if lo == 0 || lo > hi {
                return Err(Error::validation(format!("k range {lo}..={hi} is empty")));
            }
        }
        Ok(())
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.panel);
        fix(&mut self.roles);
        fix(&mut self.policies);
        if let Some(e) = self.emissions.as_mut() {
            fix(&mut e.factors);
            fix(&mut e.consumption);
        }
        if let Some(o) = self.out_dir.as_mut() {
            fix(o);
        }
    }
}

pub fn parse_run_config(text: &str, source: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| json_error(source, e))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let mut cfg = parse_run_config(&read_text(path)?, &path.display().to_string())?;
    cfg.resolve(path.parent().unwrap_or(Path::new(".")));
    let mut referenced = vec![&cfg.panel, &cfg.roles, &cfg.policies];
    if let Some(e) = &cfg.emissions {
        referenced.extend([&e.factors, &e.consumption]);
    }
    if let Some(missing) = referenced.into_iter().find(|p| !p.is_file()) {
        return Err(Error::validation(format!(
            "referenced file {} does not exist",
            missing.display()
        )));
    }
    Ok(cfg)
}
