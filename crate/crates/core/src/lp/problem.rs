use std::fmt;

use crate::error::{Error, Result};

use super::simplex;

/// Feasibility and optimality tolerance shared by every solver-facing check.
pub const TOLERANCE: f64 = 1e-7;

/// Handle to a variable of one [`LpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Handle to a constraint row of one [`LpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId(pub(crate) usize);

impl RowId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violate this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A dense linear program: bounded variables, linear rows, one objective.
///
/// Problems are built incrementally and are not modified by [`LpProblem::solve`].
#[derive(Debug, Clone)]
pub struct LpProblem {
    direction: Direction,
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
    objective: Vec<f64>,
}

impl LpProblem {
    pub fn new(direction: Direction) -> Self {
        LpProblem {
            direction,
            vars: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
        }
    }

    pub fn minimize() -> Self {
        Self::new(Direction::Minimize)
    }

    pub fn maximize() -> Self {
        Self::new(Direction::Maximize)
    }

    /// Adds a variable with bounds `lower <= x <= upper`; either side may be infinite.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.objective.push(0.0);
        VarId(self.vars.len() - 1)
    }

    pub fn add_nonneg(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, f64::INFINITY)
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn set_objective(&mut self, var: VarId, coeff: f64) {
        if let Some(c) = self.objective.get_mut(var.0) {
            *c = coeff;
        }
    }

    /// Adds a row. Repeated variables in `coeffs` are summed.
    pub fn add_constraint<I>(&mut self, name: impl Into<String>, coeffs: I, sense: Sense, rhs: f64) -> RowId
    where
        I: IntoIterator<Item = (VarId, f64)>,
    {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in coeffs {
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some(entry) => entry.1 += a,
                None => merged.push((v, a)),
            }
        }
        self.rows.push(Constraint {
            name: name.into(),
            coeffs: merged,
            sense,
            rhs,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn objective_coeffs(&self) -> &[f64] {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() {
                return Err(Error::validation(format!(
                    "variable '{}' (#{i}) has a NaN bound",
                    v.name
                )));
            }
            if v.lower > v.upper {
                return Err(Error::validation(format!(
                    "variable '{}' has lower bound {} above upper bound {}",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(Error::validation(format!("variable '{}' has an empty domain", v.name)));
            }
        }
        for (i, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::validation(format!(
                    "objective coefficient of '{}' is not finite",
                    self.vars[i].name
                )));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(Error::validation(format!(
                    "constraint '{}' has non-finite rhs",
                    row.name
                )));
            }
            for &(v, a) in &row.coeffs {
                if v.0 >= self.vars.len() {
                    return Err(Error::validation(format!(
                        "constraint '{}' references undeclared variable #{}",
                        row.name, v.0
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::validation(format!(
                        "constraint '{}' has non-finite coefficient on '{}'",
                        row.name, self.vars[v.0].name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.solve_with(&SolverOptions::default())
    }

    pub fn solve_with(&self, options: &SolverOptions) -> Result<LpSolution> {
        self.validate()?;
        simplex::solve(self, options)
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self.vars.iter().zip(values).map(|(v, &x)| {
            let below = if v.lower.is_finite() { v.lower - x } else { 0.0 };
            let above = if v.upper.is_finite() { x - v.upper } else { 0.0 };
            below.max(above).max(0.0)
        });
        let rows = self.rows.iter().map(|r| r.violation(values));
        bounds.chain(rows).fold(0.0, f64::max)
    }
}

fn fmt_bound(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}

fn fmt_terms(f: &mut fmt::Formatter<'_>, vars: &[Variable], terms: &[(VarId, f64)]) -> fmt::Result {
    if terms.is_empty() {
        return write!(f, "0");
    }
    for (n, &(v, a)) in terms.iter().enumerate() {
        let sign = if a < 0.0 {
            "-"
        } else if n == 0 {
            ""
        } else {
            "+"
        };
        if n > 0 {
            write!(f, " ")?;
        }
        write!(f, "{sign}")?;
        if n > 0 || a < 0.0 {
            write!(f, " ")?;
        }
        write!(f, "{} {}", a.abs(), vars[v.0].name)?;
    }
    Ok(())
}

/// Plain-text dump in an LP-file-like layout, for bug reports.
impl fmt::Display for LpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head = match self.direction {
            Direction::Minimize => "minimize",
            Direction::Maximize => "maximize",
        };
        writeln!(f, "{head}")?;
        let obj: Vec<(VarId, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (VarId(i), *c))
            .collect();
        write!(f, "  obj: ")?;
        fmt_terms(f, &self.vars, &obj)?;
        writeln!(f)?;
        writeln!(f, "subject to")?;
        for row in &self.rows {
            write!(f, "  {}: ", row.name)?;
            fmt_terms(f, &self.vars, &row.coeffs)?;
            writeln!(f, " {} {}", row.sense.symbol(), row.rhs)?;
        }
        writeln!(f, "bounds")?;
        for v in &self.vars {
            writeln!(f, "  {} <= {} <= {}", fmt_bound(v.lower), v.name, fmt_bound(v.upper))?;
        }
        write!(f, "end")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value in the problem's own direction; NaN unless optimal.
    pub objective: f64,
    /// One value per variable; empty unless optimal.
    pub primal: Vec<f64>,
    /// Sensitivity of the optimal objective to each row's rhs; `None` unless optimal.
    pub duals: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.primal[var.0]
    }

    pub fn dual(&self, row: RowId) -> Option<f64> {
        self.duals.as_ref().map(|d| d[row.0])
    }

    pub(crate) fn not_optimal(status: LpStatus, iterations: usize) -> Self {
        LpSolution {
            status,
            objective: f64::NAN,
            primal: Vec::new(),
            duals: None,
            iterations,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tolerance: f64,
    /// Iterations of Dantzig pricing per phase before switching to Bland's rule.
    /// `None` scales the budget with problem size.
    pub dantzig_budget: Option<usize>,
    pub max_iterations: Option<usize>,
    /// Basis inverse is recomputed from scratch after this many pivots.
    pub refactor_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: TOLERANCE,
            dantzig_budget: None,
            max_iterations: None,
            refactor_every: 40,
        }
    }
}
