//! Dense two-phase revised simplex.
//!
//! The problem is rewritten as `min c'x, Ax = b, x >= 0, b >= 0` with slack,
//! surplus and artificial columns. The basis inverse is kept explicitly and
//! updated with elementary row operations, then recomputed from scratch every
//! few pivots. Pricing is Dantzig's rule until the per-phase iteration budget
//! runs out, after which Bland's rule guarantees termination.

use crate::error::{Error, Result};

use super::problem::{Direction, LpProblem, LpSolution, LpStatus, Sense, SolverOptions};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + col
    Shift { col: usize, offset: f64 },
    /// x = offset - col
    Mirror { col: usize, offset: f64 },
    /// x = pos - neg
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct StandardForm {
    /// Column-major: `cols[j][i]` is row i of column j.
    cols: Vec<Vec<f64>>,
    kinds: Vec<ColKind>,
    b: Vec<f64>,
    cost: Vec<f64>,
    var_map: Vec<VarMap>,
    flipped: Vec<bool>,
    user_rows: usize,
    initial_basis: Vec<usize>,
}

impl StandardForm {
    fn build(p: &LpProblem) -> Self {
        let vars = p.variables();
        let sign = match p.direction() {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        };

        let mut var_map = Vec::with_capacity(vars.len());
        let mut ncols = 0usize;
        let mut structural_cost = Vec::new();
        // extra rows `col <= width` for doubly bounded variables
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for (j, v) in vars.iter().enumerate() {
            let c = sign * p.objective_coeffs()[j];
            if v.lower.is_finite() {
                var_map.push(VarMap::Shift {
                    col: ncols,
                    offset: v.lower,
                });
                structural_cost.push(c);
                if v.upper.is_finite() {
                    bound_rows.push((ncols, v.upper - v.lower));
                }
                ncols += 1;
            } else if v.upper.is_finite() {
                var_map.push(VarMap::Mirror {
                    col: ncols,
                    offset: v.upper,
                });
                structural_cost.push(-c);
                ncols += 1;
            } else {
                var_map.push(VarMap::Split {
                    pos: ncols,
                    neg: ncols + 1,
                });
                structural_cost.push(c);
                structural_cost.push(-c);
                ncols += 2;
            }
        }

        let user_rows = p.num_constraints();
        let m = user_rows + bound_rows.len();
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        let mut senses = Vec::with_capacity(m);

        for con in p.constraints() {
            let mut row = vec![0.0; ncols];
            let mut rhs = con.rhs;
            for &(v, a) in &con.coeffs {
                match var_map[v.index()] {
                    VarMap::Shift { col, offset } => {
                        row[col] += a;
                        rhs -= a * offset;
                    }
                    VarMap::Mirror { col, offset } => {
                        row[col] -= a;
                        rhs -= a * offset;
                    }
                    VarMap::Split { pos, neg } => {
                        row[pos] += a;
                        row[neg] -= a;
                    }
                }
            }
            rows.push(row);
            b.push(rhs);
            senses.push(con.sense);
        }
        for &(col, width) in &bound_rows {
            let mut row = vec![0.0; ncols];
            row[col] = 1.0;
            rows.push(row);
            b.push(width);
            senses.push(Sense::Le);
        }

        let mut cols: Vec<Vec<f64>> = (0..ncols).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let mut kinds = vec![ColKind::Structural; ncols];
        let mut cost = structural_cost;

        // slack/surplus columns
        let mut slack_of_row: Vec<Option<usize>> = vec![None; m];
        for (i, sense) in senses.iter().enumerate() {
            let coef = match sense {
                Sense::Le => 1.0,
                Sense::Ge => -1.0,
                Sense::Eq => continue,
            };
            let mut col = vec![0.0; m];
            col[i] = coef;
            slack_of_row[i] = Some(cols.len());
            cols.push(col);
            kinds.push(ColKind::Slack);
            cost.push(0.0);
        }

        let mut flipped = vec![false; m];
        for i in 0..m {
            if b[i] < 0.0 {
                flipped[i] = true;
                b[i] = -b[i];
                for col in cols.iter_mut() {
                    col[i] = -col[i];
                }
            }
        }

        let mut initial_basis = Vec::with_capacity(m);
        for i in 0..m {
            match slack_of_row[i] {
                Some(s) if cols[s][i] > 0.0 => initial_basis.push(s),
                _ => {
                    let mut col = vec![0.0; m];
                    col[i] = 1.0;
                    initial_basis.push(cols.len());
                    cols.push(col);
                    kinds.push(ColKind::Artificial);
                    cost.push(0.0);
                }
            }
        }

        StandardForm {
            cols,
            kinds,
            b,
            cost,
            var_map,
            flipped,
            user_rows,
            initial_basis,
        }
    }

    fn rows(&self) -> usize {
        self.b.len()
    }

    fn ncols(&self) -> usize {
        self.cols.len()
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

struct Tableau<'a> {
    sf: &'a StandardForm,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    refactor_every: usize,
    max_iterations: usize,
}

impl<'a> Tableau<'a> {
    fn new(sf: &'a StandardForm, opts: &SolverOptions) -> Self {
        let m = sf.rows();
        let n = sf.ncols();
        let mut is_basic = vec![false; n];
        for &j in &sf.initial_basis {
            is_basic[j] = true;
        }
        let mut binv = vec![vec![0.0; m]; m];
        for (i, &j) in sf.initial_basis.iter().enumerate() {
            // initial basic columns are unit vectors
            binv[i][i] = 1.0 / sf.cols[j][i];
        }
        let xb = sf.b.iter().enumerate().map(|(i, bi)| bi * binv[i][i]).collect();
        let max_iterations = opts.max_iterations.unwrap_or(50 * (m + n) + 1000);
        Tableau {
            sf,
            basis: sf.initial_basis.clone(),
            is_basic,
            binv,
            xb,
            iterations: 0,
            since_refactor: 0,
            refactor_every: opts.refactor_every.max(1),
            max_iterations,
        }
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut y = vec![0.0; m];
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                for (yk, bik) in y.iter_mut().zip(&self.binv[i]) {
                    *yk += cb * bik;
                }
            }
        }
        y
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let a = &self.sf.cols[j];
        self.binv
            .iter()
            .map(|row| row.iter().zip(a).map(|(r, x)| r * x).sum())
            .collect()
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m();
        let piv = alpha[r];
        let theta = self.xb[r] / piv;
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * alpha[i];
            }
        }
        self.xb[r] = theta;

        let pivot_row: Vec<f64> = self.binv[r].iter().map(|v| v / piv).collect();
        for i in 0..m {
            if i == r || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            for (dst, src) in self.binv[i].iter_mut().zip(&pivot_row) {
                *dst -= f * src;
            }
        }
        self.binv[r] = pivot_row;

        self.is_basic[self.basis[r]] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
        self.since_refactor += 1;
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        // Gauss-Jordan with partial pivoting on [B | I]
        let mut a: Vec<Vec<f64>> = (0..m)
            .map(|i| self.basis.iter().map(|&j| self.sf.cols[j][i]).collect())
            .collect();
        let mut inv: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
            .collect();
        for c in 0..m {
            let mut p = c;
            for i in c + 1..m {
                if a[i][c].abs() > a[p][c].abs() {
                    p = i;
                }
            }
            if a[p][c].abs() < SINGULAR_TOL {
                return Err(Error::solver("simplex", "basis matrix became singular"));
            }
            a.swap(c, p);
            inv.swap(c, p);
            let d = a[c][c];
            for k in 0..m {
                a[c][k] /= d;
                inv[c][k] /= d;
            }
            for i in 0..m {
                if i != c && a[i][c] != 0.0 {
                    let f = a[i][c];
                    for k in 0..m {
                        a[i][k] -= f * a[c][k];
                        inv[i][k] -= f * inv[c][k];
                    }
                }
            }
        }
        // inv is B^{-1} with rows indexed by basis position
        self.binv = inv;
        self.xb = self
            .binv
            .iter()
            .map(|row| row.iter().zip(&self.sf.b).map(|(r, b)| r * b).sum())
            .collect();
        self.since_refactor = 0;
        Ok(())
    }

    fn run(&mut self, cost: &[f64], dantzig_budget: usize) -> Result<PhaseOutcome> {
        let n = self.sf.ncols();
        let mut phase_iters = 0usize;
        loop {
            if self.since_refactor >= self.refactor_every {
                self.refactor()?;
            }
            if self.iterations >= self.max_iterations {
                return Err(Error::solver(
                    "simplex",
                    format!("iteration limit {} reached", self.max_iterations),
                ));
            }
            let bland = phase_iters >= dantzig_budget;
            let y = self.duals(cost);

            let mut entering: Option<(usize, f64)> = None;
            for j in 0..n {
                if self.is_basic[j] || self.sf.kinds[j] == ColKind::Artificial {
                    continue;
                }
                let col = &self.sf.cols[j];
                let d = cost[j] - y.iter().zip(col).map(|(a, b)| a * b).sum::<f64>();
                if d < -OPT_TOL {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| d < best) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };

            let alpha = self.column(q);
            let mut best: Option<(usize, f64)> = None;
            for (i, &a) in alpha.iter().enumerate() {
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.xb[i].max(0.0) / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if ratio < br && !tie {
                            Some((i, ratio))
                        } else if tie {
                            let better = if bland {
                                self.basis[i] < self.basis[bi]
                            } else {
                                a > alpha[bi] || (a == alpha[bi] && self.basis[i] < self.basis[bi])
                            };
                            if better {
                                Some((i, ratio.min(br)))
                            } else {
                                Some((bi, ratio.min(br)))
                            }
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = best else {
                return Ok(PhaseOutcome::Unbounded);
            };
            self.xb[r] = self.xb[r].max(0.0);
            self.pivot(r, q, &alpha);
            self.iterations += 1;
            phase_iters += 1;
        }
    }

    /// Pivots basic artificials out of the basis where a structural or slack
    /// column can replace them. Those left behind sit on redundant rows.
    fn expel_artificials(&mut self) {
        let n = self.sf.ncols();
        for r in 0..self.m() {
            if self.sf.kinds[self.basis[r]] != ColKind::Artificial {
                continue;
            }
            let mut pick: Option<(usize, f64)> = None;
            for j in 0..n {
                if self.is_basic[j] || self.sf.kinds[j] == ColKind::Artificial {
                    continue;
                }
                let a: f64 = self.binv[r].iter().zip(&self.sf.cols[j]).map(|(x, y)| x * y).sum();
                if a.abs() > PIVOT_TOL && pick.is_none_or(|(_, best)| a.abs() > best.abs()) {
                    pick = Some((j, a));
                }
            }
            if let Some((q, _)) = pick {
                let alpha = self.column(q);
                self.pivot(r, q, &alpha);
            }
        }
    }

    fn values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.sf.ncols()];
        for (i, &j) in self.basis.iter().enumerate() {
            x[j] = self.xb[i].max(0.0);
        }
        x
    }
}

pub(crate) fn solve(p: &LpProblem, opts: &SolverOptions) -> Result<LpSolution> {
    let sf = StandardForm::build(p);
    let m = sf.rows();
    let n = sf.ncols();
    let budget = opts.dantzig_budget.unwrap_or(10 * (m + n) + 50);
    let mut t = Tableau::new(&sf, opts);

    let has_artificials = sf.kinds.contains(&ColKind::Artificial);
    if has_artificials {
        let phase1_cost: Vec<f64> = sf
            .kinds
            .iter()
            .map(|k| if *k == ColKind::Artificial { 1.0 } else { 0.0 })
            .collect();
        t.run(&phase1_cost, budget)?;
        t.refactor()?;
        let infeasibility: f64 = t
            .basis
            .iter()
            .zip(&t.xb)
            .filter(|(j, _)| sf.kinds[**j] == ColKind::Artificial)
            .map(|(_, x)| x.max(0.0))
            .sum();
        let scale = sf.b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        if infeasibility > opts.tolerance * scale {
            return Ok(LpSolution::not_optimal(LpStatus::Infeasible, t.iterations));
        }
        t.expel_artificials();
        t.refactor()?;
    }

    match t.run(&sf.cost, budget)? {
        PhaseOutcome::Unbounded => return Ok(LpSolution::not_optimal(LpStatus::Unbounded, t.iterations)),
        PhaseOutcome::Optimal => {}
    }
    if m > 0 {
        t.refactor()?;
    }

    let xs = t.values();
    let primal: Vec<f64> = sf
        .var_map
        .iter()
        .map(|map| match *map {
            VarMap::Shift { col, offset } => offset + xs[col],
            VarMap::Mirror { col, offset } => offset - xs[col],
            VarMap::Split { pos, neg } => xs[pos] - xs[neg],
        })
        .collect();

    let y = t.duals(&sf.cost);
    let dir_sign = match p.direction() {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let duals: Vec<f64> = (0..sf.user_rows)
        .map(|i| {
            let flip = if sf.flipped[i] { -1.0 } else { 1.0 };
            dir_sign * flip * y[i]
        })
        .collect();

    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: p.objective_value(&primal),
        primal,
        duals: Some(duals),
        iterations: t.iterations,
    })
}
