//! Intensity optimization and cutoff-distance search.

use rayon::prelude::*;

use super::{evaluate_point, evaluate_wcs, Metrics, Mode, Scenario};
use crate::error::Error;

/// Search range for the signal intensity.
pub const MU_RANGE: (f64, f64) = (0.05, 0.8);
/// Smallest decoy intensity considered.
pub const NU_MIN: f64 = 0.01;
const GRID: usize = 10;
const ROUNDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub mu: f64,
    pub nu: f64,
    pub rate: f64,
    /// False when no candidate produced a positive key rate.
    pub positive: bool,
    pub metrics: Metrics,
}

fn candidates(mu: (f64, f64), nu: (f64, f64)) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(GRID * GRID);
    for i in 0..GRID {
        let m = mu.0 + (mu.1 - mu.0) * i as f64 / (GRID - 1) as f64;
        let top = nu.1.min(m);
        if top <= nu.0 {
            continue;
        }
        // ν stays strictly below both μ and the current upper edge.
        for j in 0..GRID {
            out.push((m, nu.0 + (top - nu.0) * j as f64 / GRID as f64));
        }
    }
    out
}

/// Grid search over `(μ, ν)` with three rounds of 10×10 grids, each
/// centered on the previous best and one grid step wide on either side.
pub fn optimize_intensities(sc: &Scenario) -> Result<Optimum, Error> {
    if sc.mode != Mode::Wcs {
        return Err(Error::Domain("intensity optimization needs wcs mode".into()));
    }
    let mut mu = MU_RANGE;
    let mut nu = (NU_MIN, MU_RANGE.1);
    let mut best: Option<(f64, f64, Metrics)> = None;
    let mut last_err = None;

    for _ in 0..ROUNDS {
        let grid = candidates(mu, nu);
        let results: Vec<Result<Metrics, Error>> = grid
            .par_iter()
            .map(|&(m, n)| {
                let mut point = sc.clone();
                point.decoy.mu = m;
                point.decoy.nu = n;
                evaluate_wcs(&point)
            })
            .collect();
        for (&(m, n), r) in grid.iter().zip(results) {
            match r {
                Ok(metrics) if best.as_ref().is_none_or(|b| metrics.r_raw() > b.2.r_raw()) => {
                    best = Some((m, n, metrics));
                }
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
        }
        let Some((bm, bn, _)) = best else { break };
        let mu_step = (mu.1 - mu.0) / (GRID - 1) as f64;
        let nu_step = (nu.1.min(bm) - nu.0) / GRID as f64;
        mu = ((bm - mu_step).max(MU_RANGE.0), (bm + mu_step).min(MU_RANGE.1));
        nu = ((bn - nu_step).max(NU_MIN), bn + nu_step);
    }

    match best {
        Some((mu, nu, metrics)) => {
            Ok(Optimum { mu, nu, rate: metrics.r_raw(), positive: metrics.r_raw() > 0.0, metrics })
        }
        None => Err(last_err.unwrap_or_else(|| Error::NoSignal("no intensity candidates".into()))),
    }
}

/// Largest total distance in `[lo, hi]` with a positive key rate, located
/// by bisection to within `tol` km. Assumes the rate falls with distance.
/// Returns `None` when the rate is not positive at `lo`.
pub fn max_positive_distance(sc: &Scenario, lo: f64, hi: f64, tol: f64) -> Result<Option<f64>, Error> {
    let positive = |d: f64| -> Result<bool, Error> {
        match evaluate_point(&sc.with("distance", d)?) {
            Ok(m) => Ok(m.r_raw() > 0.0),
            Err(Error::NoSignal(_)) => Ok(false),
            Err(e) => Err(e),
        }
    };
    if !positive(lo)? {
        return Ok(None);
    }
    if positive(hi)? {
        return Ok(Some(hi));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if positive(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Some(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_grid_keeps_nu_below_mu() {
        let c = candidates(MU_RANGE, (NU_MIN, MU_RANGE.1));
        assert_eq!(c.len(), 100);
        assert!(c.iter().all(|&(m, n)| n < m && n >= NU_MIN));
        assert!(candidates((0.005, 0.009), (NU_MIN, 0.8)).is_empty());
    }

    #[test]
    fn rejects_sps_mode() {
        let sc = Scenario { mode: Mode::Sps, ..Scenario::default() };
        assert!(matches!(optimize_intensities(&sc), Err(Error::Domain(_))));
    }
}
