//! Dense bounded-variable primal simplex for small linear programs.
//!
//! Every constraint row gets a slack column whose bounds encode the relation
//! (`≤`: `[0, ∞)`, `≥`: `(−∞, 0]`, `=`: `[0, 0]`), so all rows become
//! equalities and variable bounds are handled in the ratio test rather than
//! as extra rows. Phase one minimizes the sum of artificial columns; phase
//! two reuses the basis with artificials pinned at zero.
//!
//! Pricing is Dantzig's rule, switching to Bland's rule after
//! [`BLAND_AFTER`] pivots. The basis inverse is kept explicitly and rebuilt
//! from scratch every [`REINVERT_EVERY`] pivots.

use std::fmt;

use thiserror::Error;

/// Internal stand-in for an infinite bound. Never exposed: callers pass
/// `f64::INFINITY`/`f64::NEG_INFINITY` and get them back.
const BIG: f64 = 1e30;
pub const FEAS_TOL: f64 = 1e-8;
pub const PIVOT_TOL: f64 = 1e-10;
pub const BOUND_TOL: f64 = 1e-10;
const OPT_TOL: f64 = 1e-9;
pub const MAX_PIVOTS: usize = 10_000;
pub const BLAND_AFTER: usize = 500;
const REINVERT_EVERY: usize = 50;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub row: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `optimize objective·x` subject to row constraints and `lo ≤ x ≤ hi`.
/// Variables default to `[0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, sense: Sense) -> Self {
        let n = objective.len();
        Self { objective, sense, constraints: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, row: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { row, relation, rhs });
        self
    }

    pub fn bound(&mut self, var: usize, lo: f64, hi: f64) -> &mut Self {
        self.bounds[var] = (lo, hi);
        self
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if n == 0 {
            return Err(LpError::Malformed("program has no variables".into()));
        }
        if self.bounds.len() != n {
            return Err(LpError::Malformed(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("objective has non-finite coefficients".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.row.len() != n {
                return Err(LpError::Malformed(format!("row {i} has length {}, expected {n}", c.row.len())));
            }
            if c.row.iter().any(|v| !v.is_finite()) || !c.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {i} has non-finite entries")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("variable {j} has bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn linear(f: &mut fmt::Formatter<'_>, coeffs: &[f64]) -> fmt::Result {
            let mut first = true;
            for (j, c) in coeffs.iter().enumerate() {
                if *c == 0.0 {
                    continue;
                }
                let sep = if first { "" } else { " + " };
                write!(f, "{sep}{c:e} x{j}")?;
                first = false;
            }
            if first {
                f.write_str("0")?;
            }
            Ok(())
        }
        let sense = match self.sense {
            Sense::Minimize => "minimize",
            Sense::Maximize => "maximize",
        };
        writeln!(f, "{sense}")?;
        f.write_str("  obj: ")?;
        linear(f, &self.objective)?;
        writeln!(f)?;
        writeln!(f, "subject to")?;
        for (i, c) in self.constraints.iter().enumerate() {
            write!(f, "  c{i}: ")?;
            linear(f, &c.row)?;
            writeln!(f, " {} {:e}", c.relation, c.rhs)?;
        }
        writeln!(f, "bounds")?;
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            writeln!(f, "  {lo:e} <= x{j} <= {hi:e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub pivots: usize,
}

pub fn solve_lp(p: &LinearProgram) -> Result<LpSolution, LpError> {
    p.validate()?;
    Solver::new(p).solve(p)
}

fn is_inf(v: f64) -> bool {
    v.abs() >= BIG
}

fn to_internal(v: f64) -> f64 {
    v.clamp(-BIG, BIG)
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Solver {
    m: usize,
    n_struct: usize,
    /// Columns of the scaled equality system, structural then slack then artificial.
    cols: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// Row-major `m × m` basis inverse.
    binv: Vec<f64>,
    pivots: usize,
    since_reinvert: usize,
}

impl Solver {
    fn new(p: &LinearProgram) -> Self {
        let m = p.constraints.len();
        let n = p.num_vars();
        let ncols = n + 2 * m;

        let mut cols = vec![vec![0.0; m]; ncols];
        let mut rhs = vec![0.0; m];
        let mut lo = vec![0.0; ncols];
        let mut hi = vec![0.0; ncols];

        for (i, c) in p.constraints.iter().enumerate() {
            let scale = c.row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            for j in 0..n {
                cols[j][i] = c.row[j] / scale;
            }
            rhs[i] = c.rhs / scale;
            cols[n + i][i] = 1.0;
            let (slo, shi) = match c.relation {
                Relation::Le => (0.0, BIG),
                Relation::Ge => (-BIG, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lo[n + i] = slo;
            hi[n + i] = shi;
        }
        for (j, &(l, h)) in p.bounds.iter().enumerate() {
            lo[j] = to_internal(l);
            hi[j] = to_internal(h);
        }

        let mut x = vec![0.0; ncols];
        for j in 0..n {
            x[j] = if !is_inf(lo[j]) {
                lo[j]
            } else if !is_inf(hi[j]) {
                hi[j]
            } else {
                0.0
            };
        }

        // Crash basis: a slack when it can absorb the residual, else an artificial.
        let mut basis = vec![0; m];
        let mut is_basic = vec![false; ncols];
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            let resid = rhs[i] - (0..n).map(|j| cols[j][i] * x[j]).sum::<f64>();
            let slack = n + i;
            let art = n + m + i;
            if resid >= lo[slack] && resid <= hi[slack] {
                basis[i] = slack;
                x[slack] = resid;
                binv[i * m + i] = 1.0;
                lo[art] = 0.0;
                hi[art] = 0.0;
            } else {
                let sign = if resid >= 0.0 { 1.0 } else { -1.0 };
                cols[art][i] = sign;
                basis[i] = art;
                x[art] = resid.abs();
                binv[i * m + i] = sign;
                lo[art] = 0.0;
                hi[art] = BIG;
            }
            is_basic[basis[i]] = true;
        }

        Self { m, n_struct: n, cols, rhs, lo, hi, x, basis, is_basic, binv, pivots: 0, since_reinvert: 0 }
    }

    fn art_range(&self) -> std::ops::Range<usize> {
        self.n_struct + self.m..self.n_struct + 2 * self.m
    }

    fn solve(mut self, p: &LinearProgram) -> Result<LpSolution, LpError> {
        let n = self.n_struct;
        let ncols = self.cols.len();

        // Phase one.
        let mut cost = vec![0.0; ncols];
        for j in self.art_range() {
            if self.hi[j] > 0.0 {
                cost[j] = 1.0;
            }
        }
        let b_scale = self.rhs.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if cost.iter().any(|&c| c > 0.0) {
            self.run(&cost)?;
            let infeas: f64 = self.art_range().map(|j| self.x[j]).sum();
            if infeas > FEAS_TOL * b_scale {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    x: self.x[..n].to_vec(),
                    objective_value: f64::NAN,
                    pivots: self.pivots,
                });
            }
        }
        for j in self.art_range() {
            self.hi[j] = 0.0;
            if !self.is_basic[j] {
                self.x[j] = 0.0;
            }
        }
        self.drive_out_artificials();

        // Phase two.
        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let c_scale = p.objective.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let c_scale = if c_scale > 0.0 { c_scale } else { 1.0 };
        let mut cost = vec![0.0; ncols];
        for j in 0..n {
            cost[j] = sign * p.objective[j] / c_scale;
        }
        let end = self.run(&cost)?;
        if let PhaseEnd::Unbounded = end {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: self.x[..n].to_vec(),
                objective_value: sign * f64::INFINITY,
                pivots: self.pivots,
            });
        }

        let mut x = self.x[..n].to_vec();
        for (j, v) in x.iter_mut().enumerate() {
            let (l, h) = p.bounds[j];
            if *v < l {
                if l - *v > FEAS_TOL {
                    return Err(LpError::Numerical(format!("x{j} = {v} violates lower bound {l}")));
                }
                *v = l;
            }
            if *v > h {
                if *v - h > FEAS_TOL {
                    return Err(LpError::Numerical(format!("x{j} = {v} violates upper bound {h}")));
                }
                *v = h;
            }
        }
        for (i, c) in p.constraints.iter().enumerate() {
            let lhs: f64 = c.row.iter().zip(&x).map(|(a, b)| a * b).sum();
            let scale = c.row.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            if viol > FEAS_TOL * scale {
                return Err(LpError::Numerical(format!(
                    "post-solve check: row {i} violated by {viol:e}"
                )));
            }
        }
        let objective_value = p.objective.iter().zip(&x).map(|(a, b)| a * b).sum();
        Ok(LpSolution { status: LpStatus::Optimal, x, objective_value, pivots: self.pivots })
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let col = &self.cols[j];
        let mut out = vec![0.0; m];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.binv[r * m..(r + 1) * m];
            *o = row.iter().zip(col).map(|(a, b)| a * b).sum();
        }
        out
    }

    fn run(&mut self, cost: &[f64]) -> Result<PhaseEnd, LpError> {
        let m = self.m;
        let ncols = self.cols.len();
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(LpError::Numerical(format!("pivot cap of {MAX_PIVOTS} exceeded")));
            }
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert()?;
            }
            let bland = self.pivots >= BLAND_AFTER;

            // Duals y = c_B B^{-1}.
            let mut y = vec![0.0; m];
            for (r, &bj) in self.basis.iter().enumerate() {
                let cb = cost[bj];
                if cb != 0.0 {
                    for (k, yk) in y.iter_mut().enumerate() {
                        *yk += cb * self.binv[r * m + k];
                    }
                }
            }

            let mut entering: Option<(usize, f64)> = None;
            for j in 0..ncols {
                if self.is_basic[j] || self.hi[j] - self.lo[j] <= 0.0 {
                    continue;
                }
                let d = cost[j] - y.iter().zip(&self.cols[j]).map(|(a, b)| a * b).sum::<f64>();
                let can_up = self.x[j] < self.hi[j] - BOUND_TOL;
                let can_down = self.x[j] > self.lo[j] + BOUND_TOL;
                let eligible = (d < -OPT_TOL && can_up) || (d > OPT_TOL && can_down);
                if !eligible {
                    continue;
                }
                match entering {
                    None => entering = Some((j, d)),
                    Some((_, best)) if !bland && d.abs() > best.abs() => entering = Some((j, d)),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some((j, d)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.column(j);

            let mut theta = if is_inf(self.lo[j]) || is_inf(self.hi[j]) {
                f64::INFINITY
            } else {
                self.hi[j] - self.lo[j]
            };
            let mut leave: Option<(usize, f64)> = None;
            for (r, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let bj = self.basis[r];
                let rate = -dir * a;
                let limit = if rate < 0.0 {
                    if is_inf(self.lo[bj]) {
                        continue;
                    }
                    ((self.x[bj] - self.lo[bj]) / -rate).max(0.0)
                } else {
                    if is_inf(self.hi[bj]) {
                        continue;
                    }
                    ((self.hi[bj] - self.x[bj]) / rate).max(0.0)
                };
                let better = match leave {
                    None => limit < theta,
                    Some((best_r, _)) => {
                        if limit < theta - 1e-12 {
                            true
                        } else if limit <= theta + 1e-12 {
                            if bland {
                                bj < self.basis[best_r]
                            } else {
                                a.abs() > alpha[best_r].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = theta.min(limit);
                    leave = Some((r, rate));
                }
            }
            if theta.is_infinite() {
                return Ok(PhaseEnd::Unbounded);
            }

            self.x[j] += dir * theta;
            for (r, &a) in alpha.iter().enumerate() {
                let bj = self.basis[r];
                self.x[bj] -= dir * theta * a;
            }
            match leave {
                None => {
                    // Bound flip.
                    self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                }
                Some((r, rate)) => {
                    let out = self.basis[r];
                    self.x[out] = if rate < 0.0 { self.lo[out] } else { self.hi[out] };
                    self.pivot(r, j, &alpha);
                }
            }
            self.pivots += 1;
            self.since_reinvert += 1;
        }
    }

    fn pivot(&mut self, r: usize, j: usize, alpha: &[f64]) {
        let m = self.m;
        let out = self.basis[r];
        let piv = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        for i in 0..m {
            if i == r || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
        }
        self.basis[r] = j;
        self.is_basic[out] = false;
        self.is_basic[j] = true;
    }

    /// Degenerate pivots replacing basic artificials by real columns where possible.
    fn drive_out_artificials(&mut self) {
        let arts = self.art_range();
        for r in 0..self.m {
            if !arts.contains(&self.basis[r]) {
                continue;
            }
            let row: Vec<f64> = self.binv[r * self.m..(r + 1) * self.m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..arts.start {
                if self.is_basic[j] {
                    continue;
                }
                let v: f64 = row.iter().zip(&self.cols[j]).map(|(a, b)| a * b).sum();
                if v.abs() > 1e-7 && best.is_none_or(|(_, b)| v.abs() > b.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.column(j);
                let out = self.basis[r];
                self.x[out] = 0.0;
                self.pivot(r, j, &alpha);
            }
        }
        // Values are recomputed so the artificial residue does not leak.
        let _ = self.reinvert();
    }

    /// Rebuild `B^{-1}` by Gauss–Jordan elimination and recompute basic values.
    fn reinvert(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (c, &bj) in self.basis.iter().enumerate() {
            for r in 0..m {
                a[r * m + c] = self.cols[bj][r];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let piv_row = (col..m)
                .max_by(|&p, &q| a[p * m + col].abs().total_cmp(&a[q * m + col].abs()))
                .unwrap_or(col);
            let piv = a[piv_row * m + col];
            if piv.abs() < 1e-13 {
                return Err(LpError::Numerical("singular basis during reinversion".into()));
            }
            if piv_row != col {
                for k in 0..m {
                    a.swap(piv_row * m + k, col * m + k);
                    inv.swap(piv_row * m + k, col * m + k);
                }
            }
            for k in 0..m {
                a[col * m + k] /= piv;
                inv[col * m + k] /= piv;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[r * m + k] -= f * a[col * m + k];
                    inv[r * m + k] -= f * inv[col * m + k];
                }
            }
        }
        self.binv = inv;

        let mut resid = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.is_basic[j] || self.x[j] == 0.0 {
                continue;
            }
            for (r, v) in resid.iter_mut().enumerate() {
                *v -= col[r] * self.x[j];
            }
        }
        for r in 0..m {
            let v: f64 = (0..m).map(|k| self.binv[r * m + k] * resid[k]).sum();
            self.x[self.basis[r]] = v;
        }
        self.since_reinvert = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_box() {
        let mut p = LinearProgram::new(vec![1.0, 1.0], Sense::Maximize);
        p.constrain(vec![1.0, 0.0], Relation::Le, 1.0).constrain(vec![0.0, 1.0], Relation::Le, 2.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 3.0).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible() {
        let mut p = LinearProgram::new(vec![1.0], Sense::Minimize);
        p.constrain(vec![1.0], Relation::Ge, 5.0).constrain(vec![1.0], Relation::Le, 3.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded() {
        let mut p = LinearProgram::new(vec![1.0, -1.0], Sense::Maximize);
        p.constrain(vec![1.0, -1.0], Relation::Ge, -1.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variable_and_equality() {
        // min x0 s.t. x0 - x1 = -3, x1 in [0, 2], x0 free -> x0 = -3.
        let mut p = LinearProgram::new(vec![1.0, 0.0], Sense::Minimize);
        p.bound(0, f64::NEG_INFINITY, f64::INFINITY).bound(1, 0.0, 2.0);
        p.constrain(vec![1.0, -1.0], Relation::Eq, -3.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value + 3.0).abs() < 1e-12);
    }

    #[test]
    fn upper_bounded_only() {
        // max -x s.t. x <= 4, x in (-inf, 4]; min is unbounded below but max of -x is at
        // x -> -inf, so the program is unbounded.
        let mut p = LinearProgram::new(vec![-1.0], Sense::Maximize);
        p.bound(0, f64::NEG_INFINITY, 4.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
        let mut p = LinearProgram::new(vec![1.0], Sense::Maximize);
        p.bound(0, f64::NEG_INFINITY, 4.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.x, vec![4.0]);
    }

    #[test]
    fn malformed() {
        let mut p = LinearProgram::new(vec![1.0, 2.0], Sense::Minimize);
        p.constrain(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve_lp(&p), Err(LpError::Malformed(_))));
        let mut p = LinearProgram::new(vec![1.0], Sense::Minimize);
        p.bound(0, 2.0, 1.0);
        assert!(matches!(solve_lp(&p), Err(LpError::Malformed(_))));
        let p = LinearProgram::new(vec![], Sense::Minimize);
        assert!(matches!(solve_lp(&p), Err(LpError::Malformed(_))));
    }

    #[test]
    fn deterministic() {
        let mut p = LinearProgram::new(vec![3.0, 2.0, -1.0], Sense::Maximize);
        p.constrain(vec![1.0, 1.0, 1.0], Relation::Le, 4.0)
            .constrain(vec![1.0, 3.0, 0.0], Relation::Le, 6.0)
            .constrain(vec![0.0, 1.0, -1.0], Relation::Ge, -1.0);
        for j in 0..3 {
            p.bound(j, 0.0, 3.0);
        }
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn dump_is_readable() {
        let mut p = LinearProgram::new(vec![1.0, 0.0], Sense::Minimize);
        p.constrain(vec![1.0, 2.0], Relation::Ge, 1.0);
        let s = p.to_string();
        assert!(s.starts_with("minimize\n"));
        assert!(s.contains("c0: 1e0 x0 + 2e0 x1 >= 1e0"));
        assert!(s.contains("0e0 <= x1 <= inf"));
    }
}
