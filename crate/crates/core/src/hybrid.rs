//! Per-unit model that fuses the slack dual with policy priority rows.
//!
//! For unit `l` under one preference scenario the LP is
//!
//! ```text
//! max  xi
//! s.t. U_S * f_trans(f(v, theta, u, sigma)) - xi >= 0
//!      U_P * Z - xi >= 0
//!      sum_j x_ij v_j - sum_j y_ij u_j >= 0                 every unit i
//!      v_j + theta_j >= W_j / max_i x_ij                    every input j
//!      u_j + sigma_j >= W_j / min_i y_ij                    every output j
//!      t_k * t_jk * (w_jk - w_next) >= Z,  t_k * t_jk * w_jk >= Z (last)
//!      sum_jk w_jk = 1
//!      v, theta, u, w >= 0,  sigma <= 0,  Z >= 0
//! ```
//!
//! where `W_j = sum_k w_jk`, `f` is the dual slack objective of unit `l` and
//! `f_trans = (f_max - f) / (f_max - f_min)`. The bounds come from a payoff
//! table: `f_min` minimises `f` alone; `f_max` minimises `f` among the points
//! that attain the best `Z`.
//!
//! A row whose objective weight is zero is left out, so `U_P = 1` reproduces
//! the plain priority solution. The aggregated weights are turned into slack
//! weights `W_j / max_i x_ij` and `W_j / min_i y_ij` and fed back to
//! [`crate::sbm::assess`] for scores, targets and the tape.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LpProblem, LpSolution, LpStatus, Sense, VarId};
use crate::opa::{self, ExpertRanking, RankingInstance};
use crate::sbm::{self, DmuPanel, DualVars, SbmAssessment, VariableWeights};

/// Ranks of all panel variables under one policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRanks {
    pub name: String,
    /// One rank per variable, inputs then outputs.
    pub ranks: Vec<u32>,
}

/// Policy ranks together with the policy priorities of one scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRankingSet {
    pub scenario_id: String,
    pub variables: Vec<String>,
    pub policies: Vec<PolicyRanks>,
    /// `t_k`, aligned with `policies`.
    pub priorities: Vec<u32>,
}

impl PolicyRankingSet {
    pub fn new(
        scenario_id: impl Into<String>,
        variables: Vec<String>,
        policies: Vec<PolicyRanks>,
        priorities: Vec<u32>,
    ) -> Result<Self> {
        let set = PolicyRankingSet {
            scenario_id: scenario_id.into(),
            variables,
            policies,
            priorities,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.priorities.len() != self.policies.len() {
            return Err(Error::validation(format!(
                "scenario '{}' gives {} priorities for {} policies",
                self.scenario_id,
                self.priorities.len(),
                self.policies.len()
            )));
        }
        self.as_instance().validate().map_err(|e| match e {
            Error::Validation(msg) => Error::validation(format!("scenario '{}': {msg}", self.scenario_id)),
            other => other,
        })
    }

    /// The same ranks as a plain priority instance (policies as experts).
    pub fn as_instance(&self) -> RankingInstance {
        RankingInstance {
            items: self.variables.clone(),
            experts: self
                .policies
                .iter()
                .zip(&self.priorities)
                .map(|(p, &t)| ExpertRanking {
                    rank: t,
                    item_ranks: p.ranks.clone(),
                })
                .collect(),
        }
    }

    fn check_against(&self, panel: &DmuPanel) -> Result<()> {
        self.validate()?;
        if self.variables != panel.variable_names() {
            return Err(Error::validation(format!(
                "scenario '{}' ranks variables {:?} but the panel has {:?}",
                self.scenario_id,
                self.variables,
                panel.variable_names()
            )));
        }
        Ok(())
    }
}

/// Relative importance of the slack objective (`us`) and the priority
/// objective (`up`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub us: f64,
    pub up: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights { us: 0.5, up: 0.5 }
    }
}

impl ObjectiveWeights {
    pub fn new(us: f64, up: f64) -> Result<Self> {
        let w = ObjectiveWeights { us, up };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.us.is_finite() && self.up.is_finite() && self.us >= 0.0 && self.up >= 0.0) {
            return Err(Error::validation(format!(
                "objective weights must be finite and >= 0, got U_S = {}, U_P = {}",
                self.us, self.up
            )));
        }
        if (self.us + self.up - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "objective weights must sum to 1, got U_S + U_P = {}",
                self.us + self.up
            )));
        }
        Ok(())
    }
}

/// Payoff-table bounds of the dual slack objective for one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveScaling {
    pub f_min: f64,
    pub f_max: f64,
    /// Bounds coincide; the transform is replaced by the constant 1.
    pub degenerate: bool,
}

impl ObjectiveScaling {
    pub fn transform(&self, f: f64) -> f64 {
        if self.degenerate {
            1.0
        } else {
            (self.f_max - f) / (self.f_max - self.f_min)
        }
    }
}

struct Model {
    lp: LpProblem,
    dual: DualVars,
    w: Vec<Vec<VarId>>,
    z: VarId,
    f_terms: Vec<(VarId, f64)>,
}

fn base_model(panel: &DmuPanel, rankings: &PolicyRankingSet, epsilon: f64, l: usize, maximize: bool) -> Model {
    let mut lp = if maximize {
        LpProblem::maximize()
    } else {
        LpProblem::minimize()
    };
    let dual = DualVars::add(&mut lp, panel);
    let nvars = rankings.variables.len();
    let w: Vec<Vec<VarId>> = (0..rankings.policies.len())
        .map(|k| (0..nvars).map(|j| lp.add_nonneg(format!("w_{k}_{j}"))).collect())
        .collect();
    let z = lp.add_nonneg("Z");
    dual.add_frontier_rows(&mut lp, panel);

    let r = panel.num_inputs();
    for j in 0..r {
        let scale = 1.0 / panel.max_input(j);
        let terms = [(dual.v[j], 1.0), (dual.theta[j], 1.0)]
            .into_iter()
            .chain(w.iter().map(|row| (row[j], -scale)));
        lp.add_constraint(format!("input_floor_{j}"), terms, Sense::Ge, 0.0);
    }
    for j in 0..panel.num_outputs() {
        let scale = 1.0 / panel.min_output(j);
        let terms = [(dual.u[j], 1.0), (dual.sigma[j], 1.0)]
            .into_iter()
            .chain(w.iter().map(|row| (row[r + j], -scale)));
        lp.add_constraint(format!("output_floor_{j}"), terms, Sense::Ge, 0.0);
    }

    let ranks: Vec<Vec<u32>> = rankings.policies.iter().map(|p| p.ranks.clone()).collect();
    opa::add_priority_rows(&mut lp, "policy", &rankings.priorities, &ranks, &w, z);
    lp.add_constraint("normalise", w.iter().flatten().map(|v| (*v, 1.0)), Sense::Eq, 1.0);

    let f_terms = dual.objective_terms(panel, epsilon, l);
    Model {
        lp,
        dual,
        w,
        z,
        f_terms,
    }
}

fn context(panel: &DmuPanel, rankings: &PolicyRankingSet, l: usize, epsilon: f64) -> String {
    format!(
        "unit '{}' in scenario '{}' at epsilon {epsilon}",
        panel.dmu_ids()[l],
        rankings.scenario_id
    )
}

fn solve_model(lp: &LpProblem, ctx: impl FnOnce() -> String) -> Result<LpSolution> {
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Infeasible => Err(Error::solver(ctx(), "combined model infeasible")),
        // The dual objective drops without bound once epsilon exceeds 1/2,
        // the same situation that makes the slack primal infeasible.
        LpStatus::Unbounded => Err(Error::solver(
            ctx(),
            "combined model unbounded; epsilon is too large for this unit",
        )),
    }
}

fn check_inputs(panel: &DmuPanel, rankings: &PolicyRankingSet, epsilon: f64, dmu: usize) -> Result<()> {
    rankings.check_against(panel)?;
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::validation(format!(
            "epsilon must be finite and >= 0, got {epsilon}"
        )));
    }
    if dmu >= panel.len() {
        return Err(Error::validation(format!(
            "unit index {dmu} out of range (panel has {})",
            panel.len()
        )));
    }
    Ok(())
}

/// Bounds of the dual slack objective used by the normalisation.
pub fn payoff_table(
    panel: &DmuPanel,
    rankings: &PolicyRankingSet,
    epsilon: f64,
    dmu: usize,
) -> Result<ObjectiveScaling> {
    check_inputs(panel, rankings, epsilon, dmu)?;
    let ctx = || context(panel, rankings, dmu, epsilon);

    let mut low = base_model(panel, rankings, epsilon, dmu, false);
    for (v, c) in &low.f_terms {
        low.lp.set_objective(*v, *c);
    }
    let f_min = solve_model(&low.lp, ctx)?.objective;

    let mut top = base_model(panel, rankings, epsilon, dmu, true);
    top.lp.set_objective(top.z, 1.0);
    let z_star = solve_model(&top.lp, ctx)?.objective;

    let mut lex = base_model(panel, rankings, epsilon, dmu, false);
    for (v, c) in &lex.f_terms {
        lex.lp.set_objective(*v, *c);
    }
    lex.lp
        .add_constraint("best_priority", [(lex.z, 1.0)], Sense::Ge, z_star);
    let f_max = solve_model(&lex.lp, ctx)?.objective.max(f_min);

    Ok(ObjectiveScaling {
        f_min,
        f_max,
        degenerate: f_max - f_min <= 1e-9 * f_max.abs().max(1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridSolution {
    pub dmu_id: String,
    pub scenario_id: String,
    pub epsilon: f64,
    pub objective_weights: ObjectiveWeights,
    pub scaling: ObjectiveScaling,
    pub input_prices: Vec<f64>,
    pub input_caps: Vec<f64>,
    pub output_prices: Vec<f64>,
    pub output_floors: Vec<f64>,
    /// `preference_weights[k][j]`: weight of variable `j` under policy `k`.
    pub preference_weights: Vec<Vec<f64>>,
    /// `W_j`, summed over policies.
    pub variable_weights: Vec<f64>,
    pub z: f64,
    pub xi: f64,
    /// Dual slack objective at the solution and its normalised value.
    pub dual_objective: f64,
    pub dual_objective_scaled: f64,
    pub derived_weights: VariableWeights,
    pub assessment: SbmAssessment,
    pub warnings: Vec<String>,
}

/// Solves the combined model for unit `dmu` and assesses it with the
/// resulting weights.
pub fn solve_hybrid(
    panel: &DmuPanel,
    rankings: &PolicyRankingSet,
    epsilon: f64,
    weights: ObjectiveWeights,
    dmu: usize,
) -> Result<HybridSolution> {
    weights.validate()?;
    let scaling = payoff_table(panel, rankings, epsilon, dmu)?;
    let ctx = || context(panel, rankings, dmu, epsilon);
    let mut warnings = Vec::new();

    let mut model = base_model(panel, rankings, epsilon, dmu, true);
    let xi = model.lp.add_free("xi");
    model.lp.set_objective(xi, 1.0);
    if weights.us > 0.0 {
        if scaling.degenerate {
            warnings.push(format!(
                "slack objective bounds coincide ({}); its normalised value is fixed at 1",
                scaling.f_min
            ));
            model
                .lp
                .add_constraint("slack_objective", [(xi, -1.0)], Sense::Ge, -weights.us);
        } else {
            let c = weights.us / (scaling.f_max - scaling.f_min);
            let terms = model.f_terms.iter().map(|(v, a)| (*v, -c * a)).chain([(xi, -1.0)]);
            model
                .lp
                .add_constraint("slack_objective", terms, Sense::Ge, -c * scaling.f_max);
        }
    }
    if weights.up > 0.0 {
        model.lp.add_constraint(
            "priority_objective",
            [(model.z, weights.up), (xi, -1.0)],
            Sense::Ge,
            0.0,
        );
    }
    let sol = solve_model(&model.lp, ctx)?;

    let (v, theta, u, sigma) = model.dual.extract(&sol);
    let preference_weights: Vec<Vec<f64>> = model
        .w
        .iter()
        .map(|row| row.iter().map(|w| sol.value(*w)).collect())
        .collect();
    let nvars = rankings.variables.len();
    let variable_weights: Vec<f64> = (0..nvars)
        .map(|j| preference_weights.iter().map(|row| row[j]).sum())
        .collect();
    let dual_objective: f64 = model.f_terms.iter().map(|(v, c)| c * sol.value(*v)).sum();

    let r = panel.num_inputs();
    let derived_weights = VariableWeights::new(
        (0..r)
            .map(|j| variable_weights[j].max(0.0) / panel.max_input(j))
            .collect(),
        (0..panel.num_outputs())
            .map(|j| variable_weights[r + j].max(0.0) / panel.min_output(j))
            .collect(),
        "hybrid-derived",
    )?;
    if derived_weights.input.iter().all(|w| *w == 0.0) {
        warnings.push("all derived input weights are zero; the score is undefined".into());
    }
    let assessment = sbm::assess(panel, &derived_weights, epsilon, dmu)?;

    Ok(HybridSolution {
        dmu_id: panel.dmu_ids()[dmu].clone(),
        scenario_id: rankings.scenario_id.clone(),
        epsilon,
        objective_weights: weights,
        scaling,
        input_prices: v,
        input_caps: theta,
        output_prices: u,
        output_floors: sigma,
        preference_weights,
        variable_weights,
        z: sol.value(model.z),
        xi: sol.value(xi),
        dual_objective,
        dual_objective_scaled: scaling.transform(dual_objective),
        derived_weights,
        assessment,
        warnings,
    })
}

/// One re-evaluated row: `lhs sense rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub name: String,
    pub lhs: f64,
    pub sense: Sense,
    pub rhs: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub rows: Vec<ReplayRow>,
    pub max_violation: f64,
}

impl HybridSolution {
    /// Recomputes every row of the model from the returned values alone.
    pub fn replay(&self, panel: &DmuPanel, rankings: &PolicyRankingSet) -> Result<ReplayReport> {
        let l = panel
            .dmu_index(&self.dmu_id)
            .ok_or_else(|| Error::validation(format!("unit '{}' not in panel", self.dmu_id)))?;
        let r = panel.num_inputs();
        let s = panel.num_outputs();
        let eps = self.epsilon;
        let mut rows = Vec::new();
        let mut push = |name: String, lhs: f64, sense: Sense, rhs: f64| {
            let violation = match sense {
                Sense::Ge => (rhs - lhs).max(0.0),
                Sense::Le => (lhs - rhs).max(0.0),
                Sense::Eq => (lhs - rhs).abs(),
            };
            rows.push(ReplayRow {
                name,
                lhs,
                sense,
                rhs,
                violation,
            });
        };

        let mut f = 0.0;
        for j in 0..r {
            let x = panel.x(l, j);
            f += x * (1.0 + eps) * self.input_prices[j] + x * self.input_caps[j];
        }
        for j in 0..s {
            let y = panel.y(l, j);
            f -= y * (1.0 + eps) * self.output_prices[j] + (y - 2.0 * eps * y) * self.output_floors[j];
        }
        let ow = self.objective_weights;
        if ow.us > 0.0 {
            push(
                "slack_objective".into(),
                ow.us * self.scaling.transform(f) - self.xi,
                Sense::Ge,
                0.0,
            );
        }
        if ow.up > 0.0 {
            push("priority_objective".into(), ow.up * self.z - self.xi, Sense::Ge, 0.0);
        }
        for i in 0..panel.len() {
            let lhs = (0..r).map(|j| panel.x(i, j) * self.input_prices[j]).sum::<f64>()
                - (0..s).map(|j| panel.y(i, j) * self.output_prices[j]).sum::<f64>();
            push(format!("frontier_{i}"), lhs, Sense::Ge, 0.0);
        }
        let total = |j: usize| self.preference_weights.iter().map(|row| row[j]).sum::<f64>();
        for j in 0..r {
            push(
                format!("input_floor_{j}"),
                self.input_prices[j] + self.input_caps[j],
                Sense::Ge,
                total(j) / panel.max_input(j),
            );
        }
        for j in 0..s {
            push(
                format!("output_floor_{j}"),
                self.output_prices[j] + self.output_floors[j],
                Sense::Ge,
                total(r + j) / panel.min_output(j),
            );
        }
        for (k, (policy, &t)) in rankings.policies.iter().zip(&rankings.priorities).enumerate() {
            let w = &self.preference_weights[k];
            for link in opa::chain_links(&policy.ranks) {
                let coef = t as f64 * link.rank as f64;
                let (name, lhs) = match link.next {
                    Some(next) => (
                        format!("policy_step_k{k}_{}_{next}", link.item),
                        coef * (w[link.item] - w[next]),
                    ),
                    None => (format!("policy_last_k{k}_{}", link.item), coef * w[link.item]),
                };
                push(name, lhs, Sense::Ge, self.z);
            }
        }
        let sum: f64 = self.preference_weights.iter().flatten().sum();
        push("normalise".into(), sum, Sense::Eq, 1.0);

        let signs = self
            .input_prices
            .iter()
            .chain(&self.input_caps)
            .chain(&self.output_prices)
            .chain(self.preference_weights.iter().flatten())
            .chain([&self.z]);
        for (idx, v) in signs.enumerate() {
            push(format!("nonneg_{idx}"), *v, Sense::Ge, 0.0);
        }
        for (j, v) in self.output_floors.iter().enumerate() {
            push(format!("nonpos_sigma_{j}"), *v, Sense::Le, 0.0);
        }

        let max_violation = rows.iter().map(|r| r.violation).fold(0.0, f64::max);
        Ok(ReplayReport { rows, max_violation })
    }
}

/// A unit whose model could not be solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmuFailure {
    pub dmu_id: String,
    pub scenario_id: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBatch {
    pub scenario_id: String,
    /// Sorted by unit id.
    pub solutions: Vec<HybridSolution>,
    pub failures: Vec<DmuFailure>,
}

/// Solves every unit of the panel under one scenario. Units are solved in
/// parallel; failures are collected instead of aborting the batch.
pub fn assess_scenario(
    panel: &DmuPanel,
    rankings: &PolicyRankingSet,
    epsilon: f64,
    weights: ObjectiveWeights,
) -> Result<ScenarioBatch> {
    rankings.check_against(panel)?;
    weights.validate()?;
    let mut order: Vec<usize> = (0..panel.len()).collect();
    order.sort_by(|a, b| panel.dmu_ids()[*a].cmp(&panel.dmu_ids()[*b]));
    let results: Vec<_> = order
        .par_iter()
        .map(|&l| (l, solve_hybrid(panel, rankings, epsilon, weights, l)))
        .collect();
    let mut solutions = Vec::new();
    let mut failures = Vec::new();
    for (l, res) in results {
        match res {
            Ok(sol) => solutions.push(sol),
            Err(e) => failures.push(DmuFailure {
                dmu_id: panel.dmu_ids()[l].clone(),
                scenario_id: rankings.scenario_id.clone(),
                message: e.to_string(),
                exit_code: e.exit_code(),
            }),
        }
    }
    Ok(ScenarioBatch {
        scenario_id: rankings.scenario_id.clone(),
        solutions,
        failures,
    })
}

#[cfg(test)]
mod tests;
