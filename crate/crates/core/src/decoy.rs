//! Three-intensity `(μ, ν, 0)` decoy-state estimation.
//!
//! Single-photon-pair yields are bracketed by linear programs over the
//! truncated photon-number yields `Y_nm`, `n, m ≤ n_cut`. The intervals then
//! constrain the transfer rates `q`, and a second family of LPs bounds the
//! virtual error rates and the ZZ statistics.
//!
//! Gains span many orders of magnitude over distance, so every LP is solved
//! in units of its largest right-hand side.

use rayon::prelude::*;

use crate::channel::{poisson_pmf, wcs_gains, GainTable, Level, MeasurementModel, StatePair, STATE_PAIRS};
use crate::error::Error;
use crate::lpcore::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::reconstruct::virtual_row;
use crate::source::{pauli_row, Basis, PreparedEnsemble};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoySettings {
    pub mu: f64,
    pub nu: f64,
    pub n_cut: usize,
    /// Probabilities of choosing `μ`, `ν` and vacuum.
    pub priors: [f64; 3],
}

impl Default for DecoySettings {
    fn default() -> Self {
        Self { mu: 0.3, nu: 0.05, n_cut: 8, priors: [1.0 / 3.0; 3] }
    }
}

impl DecoySettings {
    pub fn new(mu: f64, nu: f64) -> Self {
        Self { mu, nu, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.mu.is_finite() && self.nu.is_finite()) || self.nu <= 0.0 || self.mu <= self.nu {
            return Err(Error::Domain(format!(
                "decoy intensities must satisfy mu > nu > 0 (mu={}, nu={})",
                self.mu, self.nu
            )));
        }
        if self.n_cut < 2 {
            return Err(Error::Domain(format!("n_cut = {} must be at least 2", self.n_cut)));
        }
        let sum: f64 = self.priors.iter().sum();
        if self.priors.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("intensity priors {:?} must sum to 1", self.priors)));
        }
        Ok(())
    }

    pub fn intensities(&self) -> [f64; 3] {
        [self.mu, self.nu, 0.0]
    }

    /// Joint single-photon emission probability at signal-signal.
    pub fn p11(&self) -> f64 {
        let p1 = poisson_pmf(self.mu, 1);
        p1 * p1
    }
}

/// Photon-number orders simulated beyond `n_cut` when generating gains, so
/// the estimator sees a genuine truncation tail.
pub const SIMULATION_EXTRA_ORDERS: usize = 6;

/// Gains for the decoy settings `s` from the ground-truth relay model.
pub fn simulated_gains(
    ea: &PreparedEnsemble,
    eb: &PreparedEnsemble,
    m: &MeasurementModel,
    s: &DecoySettings,
) -> Result<GainTable, Error> {
    s.validate()?;
    wcs_gains(ea, eb, m, s.mu, s.nu, s.n_cut + SIMULATION_EXTRA_ORDERS)
}

/// Bounds on a conditional single-photon-pair yield.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldInterval {
    pub lo: f64,
    pub hi: f64,
}

impl YieldInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
            return Err(Error::Domain(format!("invalid yield interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(y: f64) -> Self {
        Self { lo: y, hi: y }
    }

    pub fn contains(&self, y: f64, tol: f64) -> bool {
        y >= self.lo - tol && y <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn solved(p: &LinearProgram, what: &str) -> Result<Vec<f64>, Error> {
    let sol = solve_lp(p)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.x),
        LpStatus::Infeasible => Err(Error::DataInconsistency(format!("{what}: constraints are infeasible"))),
        LpStatus::Unbounded => Err(Error::DataInconsistency(format!("{what}: program is unbounded"))),
    }
}

/// Extreme value of `Y_11` consistent with a 3×3 grid of gains.
///
/// `weight` is the state-choice probability already folded into the gains,
/// and bounds every `Y_nm` from above; the result is in the same units as
/// the gains.
fn decoy_extreme(
    grid: &[[f64; 3]; 3],
    levels: [f64; 3],
    weight: f64,
    n_cut: usize,
    sense: Sense,
) -> Result<f64, Error> {
    let k = n_cut + 1;
    let pois: Vec<Vec<f64>> = levels.iter().map(|&l| (0..k).map(|n| poisson_pmf(l, n)).collect()).collect();
    let mass: Vec<f64> = pois.iter().map(|p| p.iter().sum()).collect();
    let top = grid.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let s = if top > 0.0 { top } else { 1.0 };

    let mut obj = vec![0.0; k * k];
    obj[k + 1] = 1.0;
    let mut lp = LinearProgram::new(obj, sense);
    for v in 0..k * k {
        lp.bound(v, 0.0, weight / s);
    }
    for a in 0..3 {
        for b in 0..3 {
            let row: Vec<f64> = (0..k * k).map(|v| pois[a][v / k] * pois[b][v % k]).collect();
            let q = grid[a][b];
            let tail = (1.0 - mass[a] * mass[b]).max(0.0) * weight;
            lp.constrain(row.clone(), Relation::Le, q / s);
            if q - tail > 0.0 {
                lp.constrain(row, Relation::Ge, (q - tail) / s);
            }
        }
    }
    let x = solved(&lp, "decoy estimate")?;
    Ok((x[k + 1] * s).max(0.0))
}

fn decoy_interval(grid: &[[f64; 3]; 3], levels: [f64; 3], weight: f64, n_cut: usize) -> Result<(f64, f64), Error> {
    let lo = decoy_extreme(grid, levels, weight, n_cut, Sense::Minimize)?;
    let hi = decoy_extreme(grid, levels, weight, n_cut, Sense::Maximize)?;
    Ok((lo.min(hi), hi))
}

/// Conditional single-photon-pair yield interval for one state pair.
pub fn bound_pair_yield(g: &GainTable, pair: StatePair, s: &DecoySettings) -> Result<YieldInterval, Error> {
    s.validate()?;
    let w = g.weight(pair);
    if w <= 0.0 {
        return Err(Error::Domain(format!("state pair {pair} is never prepared")));
    }
    let (lo, hi) = decoy_interval(g.pair_grid(pair), g.intensities, w, s.n_cut)?;
    Ok(YieldInterval { lo: (lo / w).clamp(0.0, 1.0), hi: (hi / w).clamp(0.0, 1.0) })
}

pub fn bound_all_pairs(g: &GainTable, s: &DecoySettings) -> Result<[YieldInterval; 16], Error> {
    let v: Vec<YieldInterval> =
        STATE_PAIRS.par_iter().map(|&p| bound_pair_yield(g, p, s)).collect::<Result<_, _>>()?;
    Ok(v.try_into().expect("sixteen pairs"))
}

/// Linear constraints on `q` implied by yield intervals and positivity of
/// the announcement operator.
#[derive(Debug, Clone, PartialEq)]
pub struct QConstraints {
    pub rows: Vec<([f64; 16], YieldInterval)>,
    scale: f64,
}

pub fn q_constraints(intervals: &[YieldInterval; 16], ea: &PreparedEnsemble, eb: &PreparedEnsemble) -> QConstraints {
    let rows: Vec<_> = STATE_PAIRS
        .iter()
        .zip(intervals.iter())
        .map(|(p, iv)| (pauli_row(ea.actual(p.a), eb.actual(p.b)), *iv))
        .collect();
    let top = intervals.iter().fold(0.0f64, |a, iv| a.max(iv.hi));
    QConstraints { rows, scale: if top > 0.0 { top } else { 1.0 } }
}

impl QConstraints {
    /// Extreme value of `objective · q` over the feasible region.
    pub fn optimize(&self, objective: &[f64; 16], sense: Sense) -> Result<f64, Error> {
        let s = self.scale;
        let mut lp = LinearProgram::new(objective.to_vec(), sense);
        lp.bound(0, 0.0, 1.0 / s);
        for v in 1..16 {
            lp.bound(v, -1.0 / s, 1.0 / s);
            for sign in [1.0, -1.0] {
                let mut row = vec![0.0; 16];
                row[v] = sign;
                row[0] = -1.0;
                lp.constrain(row, Relation::Le, 0.0);
            }
        }
        for (row, iv) in &self.rows {
            if iv.hi <= iv.lo {
                lp.constrain(row.to_vec(), Relation::Eq, iv.lo / s);
            } else {
                lp.constrain(row.to_vec(), Relation::Le, iv.hi / s);
                lp.constrain(row.to_vec(), Relation::Ge, iv.lo / s);
            }
        }
        let x = solved(&lp, "transfer-rate bound")?;
        Ok(objective.iter().zip(x.iter()).map(|(c, v)| c * v).sum::<f64>() * s)
    }
}

fn add(a: [f64; 16], b: [f64; 16]) -> [f64; 16] {
    let mut out = a;
    for (o, v) in out.iter_mut().zip(b.iter()) {
        *o += v;
    }
    out
}

fn fraction(num: f64, other: f64, what: &str) -> Result<f64, Error> {
    let (num, other) = (num.max(0.0), other.max(0.0));
    if num + other <= 0.0 {
        return Err(Error::NoSignal(format!("no detections bounding {what}")));
    }
    Ok((num / (num + other)).clamp(0.0, 1.0))
}

/// Lower and upper bound of the virtual error rate in basis pair `(alpha, chi)`.
pub fn bound_error_rate_lp(
    cons: &QConstraints,
    ea: &PreparedEnsemble,
    eb: &PreparedEnsemble,
    alpha: Basis,
    chi: Basis,
) -> Result<(f64, f64), Error> {
    let row = |j, s| virtual_row(ea, eb, j, alpha, s, chi);
    let same = add(row(0, 0), row(1, 1));
    let diff = add(row(0, 1), row(1, 0));
    let what = format!("e_{alpha}{chi}");
    let e_up = fraction(
        cons.optimize(&same, Sense::Maximize)?,
        cons.optimize(&diff, Sense::Minimize)?,
        &what,
    )?;
    let e_low = fraction(
        cons.optimize(&same, Sense::Minimize)?,
        cons.optimize(&diff, Sense::Maximize)?,
        &what,
    )?;
    Ok((e_low.min(e_up), e_up))
}

/// Bounds on `e_XX, e_XY, e_YX, e_YY`.
pub fn bound_xy_error_rates(
    cons: &QConstraints,
    ea: &PreparedEnsemble,
    eb: &PreparedEnsemble,
) -> Result<[(f64, f64); 4], Error> {
    let pairs = [(Basis::X, Basis::X), (Basis::X, Basis::Y), (Basis::Y, Basis::X), (Basis::Y, Basis::Y)];
    let v: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(a, c)| bound_error_rate_lp(cons, ea, eb, a, c))
        .collect::<Result<_, _>>()?;
    Ok([v[0], v[1], v[2], v[3]])
}

/// Smallest `C = Σ (1 − 2e)²` over the given error-rate intervals.
pub fn worst_case_c(intervals: &[(f64, f64); 4]) -> f64 {
    intervals
        .iter()
        .map(|&(lo, hi)| {
            if lo <= 0.5 && hi >= 0.5 {
                0.0
            } else {
                (1.0 - 2.0 * lo).powi(2).min((1.0 - 2.0 * hi).powi(2))
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZzBounds {
    /// Lower bound on the bit-summed joint single-photon ZZ yield.
    pub y11_zz_low: f64,
    pub e_zz_up: f64,
    pub q_zz_mumu: f64,
    pub e_zz_mumu: f64,
}

fn summed_grid(g: &GainTable, keep: impl Fn(&StatePair) -> bool) -> ([[f64; 3]; 3], f64) {
    let mut grid = [[0.0; 3]; 3];
    let mut weight = 0.0;
    for p in STATE_PAIRS.iter().filter(|p| keep(p)) {
        weight += g.weight(*p);
        for (dst, src) in grid.iter_mut().zip(g.pair_grid(*p).iter()) {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += s;
            }
        }
    }
    (grid, weight)
}

pub fn bound_zz(g: &GainTable, s: &DecoySettings) -> Result<ZzBounds, Error> {
    s.validate()?;
    let (all, w_all) = summed_grid(g, |p| p.is_zz());
    let (err, w_err) = summed_grid(g, |p| p.is_zz_error());
    let (ok, w_ok) = summed_grid(g, |p| p.is_zz() && !p.is_zz_error());

    let (sig, _) = (Level::Signal.index(), ());
    let q_zz_mumu = all[sig][sig];
    if q_zz_mumu <= 0.0 {
        return Err(Error::NoSignal("no signal-signal ZZ detections".into()));
    }
    let e_zz_mumu = (err[sig][sig] / q_zz_mumu).clamp(0.0, 1.0);

    let y11_zz_low = decoy_extreme(&all, g.intensities, w_all, s.n_cut, Sense::Minimize)?;
    let err_up = decoy_extreme(&err, g.intensities, w_err, s.n_cut, Sense::Maximize)?;
    let ok_low = decoy_extreme(&ok, g.intensities, w_ok, s.n_cut, Sense::Minimize)?;
    let e_zz_up = fraction(err_up, ok_low, "e_ZZ")?;
    Ok(ZzBounds { y11_zz_low, e_zz_up, q_zz_mumu, e_zz_mumu })
}

/// Everything the weak-coherent-source rate needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecuritySummary {
    pub c_low: f64,
    pub e_zz_up: f64,
    pub y11_zz_low: f64,
    pub p11: f64,
    pub q_zz_mumu: f64,
    pub e_zz_mumu: f64,
    /// `(e_low, e_up)` for `XX, XY, YX, YY`.
    pub e_bounds: [(f64, f64); 4],
}

impl SecuritySummary {
    pub fn validate(&self) -> Result<(), Error> {
        let unit = [self.e_zz_up, self.y11_zz_low, self.p11, self.q_zz_mumu, self.e_zz_mumu];
        if !(0.0..=4.0).contains(&self.c_low) || unit.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InconsistentModel(format!("summary out of range: {self:?}")));
        }
        Ok(())
    }
}

pub fn security_summary(
    g: &GainTable,
    ea: &PreparedEnsemble,
    eb: &PreparedEnsemble,
    s: &DecoySettings,
) -> Result<SecuritySummary, Error> {
    let intervals = bound_all_pairs(g, s)?;
    let cons = q_constraints(&intervals, ea, eb);
    let e_bounds = bound_xy_error_rates(&cons, ea, eb)?;
    let zz = bound_zz(g, s)?;
    let summary = SecuritySummary {
        c_low: worst_case_c(&e_bounds),
        e_zz_up: zz.e_zz_up,
        y11_zz_low: zz.y11_zz_low,
        p11: s.p11(),
        q_zz_mumu: zz.q_zz_mumu,
        e_zz_mumu: zz.e_zz_mumu,
        e_bounds,
    };
    summary.validate()?;
    Ok(summary)
}
