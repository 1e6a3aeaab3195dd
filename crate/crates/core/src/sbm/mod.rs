//! Slack-based assessment with an efficiency tape.
//!
//! For unit `l` and allowed error `eps` the primal maximises the weighted
//! slack sum
//!
//! ```text
//! max  sum_j w-_j s-_j + sum_j w+_j s+_j
//! s.t. sum_i lambda_i x_ij + s-_j = x_lj (1 + eps)
//!      sum_i lambda_i y_ij - s+_j = y_lj (1 + eps)
//!      s-_j <= x_lj,   y_lj + s+_j - 2 eps y_lj >= 0,   lambda, s >= 0
//! ```
//!
//! From the optimal slacks come the target, the score `gamma`, the two tape
//! edges and the sensitivity `eta`. `eta` is the favourable-edge ratio divided
//! by the unfavourable-edge ratio, so it is at least 1 and exactly 1 at
//! `eps = 0`.

mod panel;

pub use panel::{DmuPanel, Role, VariableSpec, VariableStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LpProblem, LpSolution, LpStatus, Sense, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightRule {
    Min,
    Max,
    Avg,
}

impl std::str::FromStr for WeightRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(WeightRule::Min),
            "max" => Ok(WeightRule::Max),
            "avg" => Ok(WeightRule::Avg),
            other => Err(Error::validation(format!(
                "unknown weight rule '{other}' (expected min, max or avg)"
            ))),
        }
    }
}

impl WeightRule {
    pub fn name(self) -> &'static str {
        match self {
            WeightRule::Min => "min",
            WeightRule::Max => "max",
            WeightRule::Avg => "avg",
        }
    }

    fn aggregate(self, col: &[f64]) -> f64 {
        match self {
            WeightRule::Min => col.iter().copied().fold(f64::INFINITY, f64::min),
            WeightRule::Max => col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            WeightRule::Avg => col.iter().sum::<f64>() / col.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableWeights {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub provenance: String,
}

impl VariableWeights {
    pub fn new(input: Vec<f64>, output: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if input.iter().chain(&output).any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::validation("variable weights must be finite and non-negative"));
        }
        Ok(VariableWeights {
            input,
            output,
            provenance: provenance.into(),
        })
    }

    pub fn unit(panel: &DmuPanel) -> Self {
        VariableWeights {
            input: vec![1.0; panel.num_inputs()],
            output: vec![1.0; panel.num_outputs()],
            provenance: "unit".into(),
        }
    }

    fn check_against(&self, panel: &DmuPanel) -> Result<()> {
        if self.input.len() != panel.num_inputs() || self.output.len() != panel.num_outputs() {
            return Err(Error::validation(format!(
                "weights cover {}+{} variables, panel has {}+{}",
                self.input.len(),
                self.output.len(),
                panel.num_inputs(),
                panel.num_outputs()
            )));
        }
        Ok(())
    }
}

/// Reciprocal of a column aggregate for every input and output.
pub fn default_weights(panel: &DmuPanel, rule: WeightRule) -> Result<VariableWeights> {
    let recip = |name: &str, col: Vec<f64>| {
        let agg = rule.aggregate(&col);
        if agg == 0.0 || !agg.is_finite() {
            Err(Error::validation(format!(
                "column '{name}' has {} aggregate {agg}; cannot divide by it",
                rule.name()
            )))
        } else {
            Ok(1.0 / agg)
        }
    };
    let input = (0..panel.num_inputs())
        .map(|j| recip(&panel.inputs()[j].name, panel.input_column(j)))
        .collect::<Result<Vec<_>>>()?;
    let output = (0..panel.num_outputs())
        .map(|j| recip(&panel.outputs()[j].name, panel.output_column(j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(VariableWeights {
        input,
        output,
        provenance: format!("rule:{}", rule.name()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmAssessment {
    pub dmu_id: String,
    pub epsilon: f64,
    pub objective: f64,
    pub lambdas: Vec<f64>,
    pub input_slacks: Vec<f64>,
    pub output_slacks: Vec<f64>,
    pub target_inputs: Vec<f64>,
    pub target_outputs: Vec<f64>,
    pub score: f64,
    /// Edge shifted by twice the allowed error (worse side of the tape).
    pub outer_inputs: Vec<f64>,
    pub outer_outputs: Vec<f64>,
    /// Edge without the allowed error (better side of the tape).
    pub inner_inputs: Vec<f64>,
    pub inner_outputs: Vec<f64>,
    /// `+inf` when the inner edge has no weighted input left.
    pub sensitivity: f64,
}

impl SbmAssessment {
    /// Efficiency ratio at the outer tape edge.
    pub fn outer_ratio(&self, weights: &VariableWeights) -> f64 {
        ratio(weights, &self.outer_inputs, &self.outer_outputs)
    }

    /// Efficiency ratio at the inner tape edge.
    pub fn inner_ratio(&self, weights: &VariableWeights) -> f64 {
        ratio(weights, &self.inner_inputs, &self.inner_outputs)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn ratio(w: &VariableWeights, x: &[f64], y: &[f64]) -> f64 {
    dot(&w.output, y) / dot(&w.input, x)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::validation(format!(
            "epsilon must be finite and >= 0, got {epsilon}"
        )));
    }
    Ok(())
}

fn check_dmu(panel: &DmuPanel, dmu: usize) -> Result<()> {
    if dmu >= panel.len() {
        return Err(Error::validation(format!(
            "unit index {dmu} out of range (panel has {})",
            panel.len()
        )));
    }
    Ok(())
}

struct PrimalModel {
    lp: LpProblem,
    lambdas: Vec<VarId>,
    s_in: Vec<VarId>,
    s_out: Vec<VarId>,
}

fn primal_model(panel: &DmuPanel, weights: &VariableWeights, epsilon: f64, l: usize) -> PrimalModel {
    let mut lp = LpProblem::maximize();
    let lambdas: Vec<VarId> = (0..panel.len()).map(|i| lp.add_nonneg(format!("lambda_{i}"))).collect();
    let s_in: Vec<VarId> = (0..panel.num_inputs())
        .map(|j| lp.add_var(format!("s_in_{j}"), 0.0, panel.x(l, j)))
        .collect();
    let s_out: Vec<VarId> = (0..panel.num_outputs())
        .map(|j| {
            let floor = ((2.0 * epsilon - 1.0) * panel.y(l, j)).max(0.0);
            lp.add_var(format!("s_out_{j}"), floor, f64::INFINITY)
        })
        .collect();
    for (j, s) in s_in.iter().enumerate() {
        lp.set_objective(*s, weights.input[j]);
        let terms = lambdas.iter().enumerate().map(|(i, v)| (*v, panel.x(i, j)));
        lp.add_constraint(
            format!("input_{j}"),
            terms.chain([(*s, 1.0)]),
            Sense::Eq,
            panel.x(l, j) * (1.0 + epsilon),
        );
    }
    for (j, s) in s_out.iter().enumerate() {
        lp.set_objective(*s, weights.output[j]);
        let terms = lambdas.iter().enumerate().map(|(i, v)| (*v, panel.y(i, j)));
        lp.add_constraint(
            format!("output_{j}"),
            terms.chain([(*s, -1.0)]),
            Sense::Eq,
            panel.y(l, j) * (1.0 + epsilon),
        );
    }
    PrimalModel {
        lp,
        lambdas,
        s_in,
        s_out,
    }
}

fn solve_checked(lp: &LpProblem, panel: &DmuPanel, l: usize, epsilon: f64) -> Result<LpSolution> {
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Infeasible => Err(Error::solver(
            format!("unit '{}' at epsilon {epsilon}", panel.dmu_ids()[l]),
            "slack model infeasible; epsilon is too large for this unit",
        )),
        LpStatus::Unbounded => Err(Error::Internal {
            message: format!("slack model unbounded for unit '{}'", panel.dmu_ids()[l]),
            dump: lp.to_string(),
        }),
    }
}

/// Optimum of the weighted-slack primal only.
pub fn primal_objective(panel: &DmuPanel, weights: &VariableWeights, epsilon: f64, dmu: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_dmu(panel, dmu)?;
    weights.check_against(panel)?;
    let model = primal_model(panel, weights, epsilon, dmu);
    Ok(solve_checked(&model.lp, panel, dmu, epsilon)?.objective)
}

/// Assesses unit `dmu`.
///
/// When the slack optimum is not unique, the score is not either: it depends
/// on how the optimal weighted slack splits between inputs and outputs. The
/// assessment therefore re-solves with the optimum pinned, once pushing the
/// weighted output slack up and once down, and keeps the split with the lower
/// score. Both extremes are scale-free, so results do not depend on units.
pub fn assess(panel: &DmuPanel, weights: &VariableWeights, epsilon: f64, dmu: usize) -> Result<SbmAssessment> {
    check_epsilon(epsilon)?;
    check_dmu(panel, dmu)?;
    weights.check_against(panel)?;
    let l = dmu;
    let base = primal_model(panel, weights, epsilon, l);
    let first = solve_checked(&base.lp, panel, l, epsilon)?;
    let optimum = first.objective;

    let mut candidates = Vec::with_capacity(2);
    for push_up in [true, false] {
        let mut model = primal_model(panel, weights, epsilon, l);
        let all_slacks: Vec<(VarId, f64)> = model
            .s_in
            .iter()
            .zip(&weights.input)
            .chain(model.s_out.iter().zip(&weights.output))
            .map(|(v, w)| (*v, *w))
            .collect();
        model.lp.add_constraint("pin_optimum", all_slacks, Sense::Ge, optimum);
        for s in &model.s_in {
            model.lp.set_objective(*s, 0.0);
        }
        let sign = if push_up { 1.0 } else { -1.0 };
        for (s, w) in model.s_out.iter().zip(&weights.output) {
            model.lp.set_objective(*s, sign * w);
        }
        let sol = solve_checked(&model.lp, panel, l, epsilon)?;
        candidates.push(build_assessment(panel, weights, epsilon, l, &model, &sol, optimum));
    }
    let down = candidates.pop().expect("two candidates");
    let up = candidates.pop().expect("two candidates");
    Ok(if down.score < up.score { down } else { up })
}

fn build_assessment(
    panel: &DmuPanel,
    weights: &VariableWeights,
    epsilon: f64,
    l: usize,
    model: &PrimalModel,
    sol: &LpSolution,
    objective: f64,
) -> SbmAssessment {
    let x = panel.input_row(l);
    let y = panel.output_row(l);
    let s_in: Vec<f64> = model.s_in.iter().map(|v| sol.value(*v).max(0.0)).collect();
    let s_out: Vec<f64> = model.s_out.iter().map(|v| sol.value(*v).max(0.0)).collect();
    let lambdas: Vec<f64> = model.lambdas.iter().map(|v| sol.value(*v).max(0.0)).collect();

    let target_inputs: Vec<f64> = x.iter().zip(&s_in).map(|(x, s)| x - s + epsilon * x).collect();
    let target_outputs: Vec<f64> = y.iter().zip(&s_out).map(|(y, s)| y + s - epsilon * y).collect();
    let outer_inputs: Vec<f64> = x.iter().zip(&s_in).map(|(x, s)| x - s + 2.0 * epsilon * x).collect();
    let outer_outputs: Vec<f64> = y.iter().zip(&s_out).map(|(y, s)| y + s - 2.0 * epsilon * y).collect();
    let inner_inputs: Vec<f64> = x.iter().zip(&s_in).map(|(x, s)| x - s).collect();
    let inner_outputs: Vec<f64> = y.iter().zip(&s_out).map(|(y, s)| y + s).collect();

    let observed = ratio(weights, x, y);
    let score = observed / ratio(weights, &target_inputs, &target_outputs);

    let sensitivity = if epsilon == 0.0 {
        1.0
    } else {
        let inner_den = dot(&weights.input, &inner_inputs);
        let outer_num = dot(&weights.output, &outer_outputs);
        if inner_den <= 0.0 || outer_num <= 0.0 {
            f64::INFINITY
        } else {
            let inner = dot(&weights.output, &inner_outputs) / inner_den;
            let outer = outer_num / dot(&weights.input, &outer_inputs);
            inner / outer
        }
    };

    SbmAssessment {
        dmu_id: panel.dmu_ids()[l].clone(),
        epsilon,
        objective,
        lambdas,
        input_slacks: s_in,
        output_slacks: s_out,
        target_inputs,
        target_outputs,
        score,
        outer_inputs,
        outer_outputs,
        inner_inputs,
        inner_outputs,
        sensitivity,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub dmu_id: String,
    /// `v-_j >= 0`, one per input.
    pub input_prices: Vec<f64>,
    /// `theta-_j >= 0`, one per input.
    pub input_caps: Vec<f64>,
    /// `u+_j >= 0`, one per output.
    pub output_prices: Vec<f64>,
    /// `sigma+_j <= 0`, one per output.
    pub output_floors: Vec<f64>,
    pub objective: f64,
}

/// Variables of the dual model inside a larger LP.
pub(crate) struct DualVars {
    pub v: Vec<VarId>,
    pub theta: Vec<VarId>,
    pub u: Vec<VarId>,
    pub sigma: Vec<VarId>,
}

impl DualVars {
    pub(crate) fn add(lp: &mut LpProblem, panel: &DmuPanel) -> Self {
        let r = panel.num_inputs();
        let s = panel.num_outputs();
        DualVars {
            v: (0..r).map(|j| lp.add_nonneg(format!("v_{j}"))).collect(),
            theta: (0..r).map(|j| lp.add_nonneg(format!("theta_{j}"))).collect(),
            u: (0..s).map(|j| lp.add_nonneg(format!("u_{j}"))).collect(),
            sigma: (0..s)
                .map(|j| lp.add_var(format!("sigma_{j}"), f64::NEG_INFINITY, 0.0))
                .collect(),
        }
    }

    /// Coefficients of the dual objective for unit `l`.
    pub(crate) fn objective_terms(&self, panel: &DmuPanel, epsilon: f64, l: usize) -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for j in 0..panel.num_inputs() {
            let x = panel.x(l, j);
            terms.push((self.v[j], x * (1.0 + epsilon)));
            terms.push((self.theta[j], x));
        }
        for j in 0..panel.num_outputs() {
            let y = panel.y(l, j);
            terms.push((self.u[j], -y * (1.0 + epsilon)));
            terms.push((self.sigma[j], -(y - 2.0 * epsilon * y)));
        }
        terms
    }

    /// `sum_j x_ij v_j - sum_j y_ij u_j >= 0` for every unit `i`.
    pub(crate) fn add_frontier_rows(&self, lp: &mut LpProblem, panel: &DmuPanel) {
        for i in 0..panel.len() {
            let ins = self.v.iter().enumerate().map(|(j, v)| (*v, panel.x(i, j)));
            let outs = self.u.iter().enumerate().map(|(j, u)| (*u, -panel.y(i, j)));
            lp.add_constraint(format!("frontier_{i}"), ins.chain(outs), Sense::Ge, 0.0);
        }
    }

    pub(crate) fn extract(&self, sol: &LpSolution) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let get = |vs: &[VarId]| vs.iter().map(|v| sol.value(*v)).collect::<Vec<_>>();
        (get(&self.v), get(&self.theta), get(&self.u), get(&self.sigma))
    }
}

/// Dual of the weighted-slack primal for unit `dmu`.
///
/// The prices carry sign restrictions (`v, u >= 0`), so this is exactly the
/// dual of the primal with its balance rows relaxed to inequalities. The two
/// optima agree unless some input slack sits at its cap `x_lj`; there the
/// dual objective can be strictly larger.
pub fn solve_dual(panel: &DmuPanel, weights: &VariableWeights, epsilon: f64, dmu: usize) -> Result<DualSolution> {
    check_epsilon(epsilon)?;
    check_dmu(panel, dmu)?;
    weights.check_against(panel)?;
    let mut lp = LpProblem::minimize();
    let vars = DualVars::add(&mut lp, panel);
    for (v, c) in vars.objective_terms(panel, epsilon, dmu) {
        lp.set_objective(v, c);
    }
    vars.add_frontier_rows(&mut lp, panel);
    for j in 0..panel.num_inputs() {
        lp.add_constraint(
            format!("input_weight_{j}"),
            [(vars.v[j], 1.0), (vars.theta[j], 1.0)],
            Sense::Ge,
            weights.input[j],
        );
    }
    for j in 0..panel.num_outputs() {
        lp.add_constraint(
            format!("output_weight_{j}"),
            [(vars.u[j], 1.0), (vars.sigma[j], 1.0)],
            Sense::Ge,
            weights.output[j],
        );
    }
    let sol = solve_checked(&lp, panel, dmu, epsilon)?;
    let (input_prices, input_caps, output_prices, output_floors) = vars.extract(&sol);
    Ok(DualSolution {
        dmu_id: panel.dmu_ids()[dmu].clone(),
        input_prices,
        input_caps,
        output_prices,
        output_floors,
        objective: sol.objective,
    })
}
