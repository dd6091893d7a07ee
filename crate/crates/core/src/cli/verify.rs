//! Self-check: each production path is compared against an independent
//! reference from [`crate::oracle`] on generated inputs.

use std::f64::consts::TAU;
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{evaluate_sps, Mode, Scenario};
use crate::channel::{effective_operator, transfer_rates, MeasurementModel, YieldTable, STATE_PAIRS};
use crate::decoy::{bound_all_pairs, bound_xy_error_rates, q_constraints, simulated_gains, DecoySettings};
use crate::error::Error;
use crate::lpcore::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::oracle::{direct_error_rate, direct_yield, random_psd, vertex_enumeration};
use crate::qalg::singlet_projector;
use crate::reconstruct::{build_system, quantity_c, solve_q, xy_error_rates};
use crate::source::{Basis, FlawParams, PreparedEnsemble};

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Negative control: permute the reconstructed `q` before comparing.
    pub corrupt_q_order: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_error: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub elapsed: Duration,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_error < self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<18} max_error={:.3e} tol={:.0e} cases={} time={:.2}s",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.max_error,
            self.tolerance,
            self.cases,
            self.elapsed.as_secs_f64()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed()).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

fn timed(name: &'static str, tolerance: f64, run: impl FnOnce() -> (f64, usize)) -> CheckResult {
    let start = Instant::now();
    let (max_error, cases) = run();
    // NaN must not pass.
    let max_error = if max_error.is_nan() { f64::INFINITY } else { max_error };
    CheckResult { name, max_error, tolerance, cases, elapsed: start.elapsed() }
}

fn random_flaws(rng: &mut ChaCha8Rng) -> FlawParams {
    let mut small = || rng.gen_range(-0.2..=0.2);
    let (delta1, delta2, delta3, delta4, theta1, theta2) = (small(), small(), small(), small(), small(), small());
    FlawParams { delta1, delta2, delta3, delta4, theta1, theta2, beta: rng.gen_range(0.0..TAU) }
}

/// Yields `P_a P_b Tr[D ρ_a ⊗ ρ_b]` by explicit traces.
fn oracle_yields(d: &crate::qalg::HermOp4, ea: &PreparedEnsemble, eb: &PreparedEnsemble) -> YieldTable {
    YieldTable(STATE_PAIRS.map(|p| ea.prob(p.a) * eb.prob(p.b) * direct_yield(d, ea.actual(p.a), eb.actual(p.b))))
}

/// Random PSD relays and random flaws: reconstructed `q` against the trace
/// definition.
pub fn check_round_trip(cases: usize, seed: u64, opts: VerifyOptions) -> CheckResult {
    timed("round-trip", 1e-9, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..cases {
            let (fa, fb) = (random_flaws(&mut rng), random_flaws(&mut rng));
            let d = random_psd(|| rng.gen_range(-1.0..1.0));
            let err = (|| -> Result<f64, Error> {
                let (ea, eb) = (PreparedEnsemble::new(fa)?, PreparedEnsemble::new(fb)?);
                let truth = transfer_rates(&d)?;
                let mut q = solve_q(&build_system(&ea, &eb, &oracle_yields(&d, &ea, &eb)))?;
                if opts.corrupt_q_order {
                    q.0.swap(1, 4);
                }
                Ok(q.max_abs_diff(&truth))
            })();
            worst = worst.max(err.unwrap_or(f64::INFINITY));
        }
        (worst, cases)
    })
}

/// Flaw-free sources and a pure singlet relay.
pub fn check_ideal_fixed_point() -> CheckResult {
    timed("ideal-fixed-point", 1e-10, || {
        let run = || -> Result<f64, Error> {
            let f = FlawParams::ideal();
            let e = PreparedEnsemble::new(f)?;
            let d = singlet_projector();
            let q = solve_q(&build_system(&e, &e, &oracle_yields(&d, &e, &e)))?;
            let got = xy_error_rates(&q, &e, &e)?;
            let pairs = [(Basis::X, Basis::X), (Basis::X, Basis::Y), (Basis::Y, Basis::X), (Basis::Y, Basis::Y)];
            let mut worst = 0.0f64;
            for (g, (a, c)) in got.iter().zip(pairs) {
                worst = worst.max((g - direct_error_rate(&d, &f, &f, a, c)?).abs());
            }
            worst = worst.max((quantity_c(got[0], got[1], got[2], got[3]) - 2.0).abs());

            let sc = Scenario {
                mode: Mode::Sps,
                model: MeasurementModel { eta_det: 1.0, dark: 0.0, ..MeasurementModel::default() },
                ..Scenario::default()
            };
            let m = evaluate_sps(&sc)?;
            let q11: f64 = STATE_PAIRS
                .iter()
                .filter(|p| p.is_zz())
                .map(|p| e.prob(p.a) * e.prob(p.b) * direct_yield(&d, e.actual(p.a), e.actual(p.b)))
                .sum();
            for v in [m.e_zz_up, m.rate.eve.i_e, m.c_low - 2.0, m.q_zz_mumu - q11, m.rate.r_raw - q11] {
                worst = worst.max(v.abs());
            }
            Ok(worst)
        };
        (run().unwrap_or(f64::INFINITY), 1)
    })
}

/// `C` over a `steps × steps` grid of independent frame rotations.
pub fn check_beta_invariance(steps: usize) -> CheckResult {
    timed("beta-invariance", 1e-9, || {
        let d = singlet_projector();
        let mut worst = 0.0f64;
        for i in 0..steps {
            for j in 0..steps {
                let fa = FlawParams { beta: TAU * i as f64 / steps as f64, ..FlawParams::ideal() };
                let fb = FlawParams { beta: TAU * j as f64 / steps as f64, ..FlawParams::ideal() };
                let c = (|| -> Result<f64, Error> {
                    let (ea, eb) = (PreparedEnsemble::new(fa)?, PreparedEnsemble::new(fb)?);
                    let q = solve_q(&build_system(&ea, &eb, &oracle_yields(&d, &ea, &eb)))?;
                    let [a, b, c, e] = xy_error_rates(&q, &ea, &eb)?;
                    Ok(quantity_c(a, b, c, e))
                })();
                worst = worst.max(c.map_or(f64::INFINITY, |c| (c - 2.0).abs()));
            }
        }
        (worst, steps * steps)
    })
}

/// Largest bracketing violation over a grid of distances and uniform flaws.
/// Yield violations are relative to the true yield; error-rate violations
/// are absolute.
pub fn check_decoy_bracketing(distances: &[f64], deltas: &[f64], s: &DecoySettings) -> CheckResult {
    timed("decoy-bracketing", 1e-9, || {
        let mut worst = 0.0f64;
        let mut cases = 0;
        for &dist in distances {
            for &delta in deltas {
                let f = FlawParams::uniform(delta);
                let m = MeasurementModel::symmetric(dist);
                let run = || -> Result<f64, Error> {
                    let e = PreparedEnsemble::new(f)?;
                    let d = effective_operator(&m);
                    let g = simulated_gains(&e, &e, &m, s)?;
                    let intervals = bound_all_pairs(&g, s)?;
                    let mut w = 0.0f64;
                    for (p, iv) in STATE_PAIRS.iter().zip(intervals.iter()) {
                        let y = direct_yield(&d, e.actual(p.a), e.actual(p.b));
                        let miss = (iv.lo - y).max(y - iv.hi).max(0.0);
                        w = w.max(miss / y.max(f64::MIN_POSITIVE));
                    }
                    let bounds = bound_xy_error_rates(&q_constraints(&intervals, &e, &e), &e, &e)?;
                    let pairs = [(Basis::X, Basis::X), (Basis::X, Basis::Y), (Basis::Y, Basis::X), (Basis::Y, Basis::Y)];
                    for ((lo, hi), (a, c)) in bounds.iter().zip(pairs) {
                        let exact = direct_error_rate(&d, &f, &f, a, c)?;
                        w = w.max((lo - exact).max(exact - hi).max(0.0));
                    }
                    Ok(w)
                };
                worst = worst.max(run().unwrap_or(f64::INFINITY));
                cases += 1;
            }
        }
        (worst, cases)
    })
}

/// A random box-bounded program with up to five variables and five rows.
/// Most right-hand sides are built around an interior point; some are
/// random and may be infeasible.
pub fn random_program(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(1..=5);
    let m = rng.gen_range(1..=5);
    let objective: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sense = if rng.gen_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    let mut lp = LinearProgram::new(objective, sense);
    let mut x0 = vec![0.0; n];
    for (j, x) in x0.iter_mut().enumerate() {
        let lo = rng.gen_range(-1.0..0.0);
        let hi = lo + rng.gen_range(0.5..2.0);
        lp.bound(j, lo, hi);
        *x = rng.gen_range(lo..hi);
    }
    let anchored = rng.gen_bool(0.8);
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let at: f64 = row.iter().zip(&x0).map(|(a, b)| a * b).sum();
        let (rel, rhs) = match rng.gen_range(0..5) {
            0 => (Relation::Eq, at),
            1 | 2 => (Relation::Le, at + rng.gen_range(0.0..0.5)),
            _ => (Relation::Ge, at - rng.gen_range(0.0..0.5)),
        };
        let rhs = if anchored { rhs } else { rng.gen_range(-1.0..1.0) };
        lp.constrain(row, rel, rhs);
    }
    lp
}

/// Simplex optimum against exhaustive vertex enumeration.
pub fn check_lp_oracle(cases: usize, seed: u64) -> CheckResult {
    timed("lp-vertex-oracle", 1e-9, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..cases {
            let lp = random_program(&mut rng);
            let err = match (solve_lp(&lp), vertex_enumeration(&lp, 1e-9)) {
                (Ok(sol), Some(best)) if sol.status == LpStatus::Optimal => (sol.objective_value - best).abs(),
                (Ok(sol), None) if sol.status == LpStatus::Infeasible => 0.0,
                _ => f64::INFINITY,
            };
            worst = worst.max(err);
        }
        (worst, cases)
    })
}

/// The full self-check at its default sizes.
pub fn verify(opts: VerifyOptions) -> VerifyReport {
    let checks = vec![
        check_round_trip(200, DEFAULT_SEED, opts),
        check_ideal_fixed_point(),
        check_beta_invariance(13),
        check_decoy_bracketing(&[0.0, 50.0, 100.0, 150.0], &[0.0, 0.063, 0.126], &DecoySettings::default()),
        check_lp_oracle(50, DEFAULT_SEED),
    ];
    VerifyReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_order_is_caught() {
        assert!(check_round_trip(5, 1, VerifyOptions::default()).passed());
        assert!(!check_round_trip(5, 1, VerifyOptions { corrupt_q_order: true }).passed());
    }

    #[test]
    fn cheap_checks_pass() {
        assert!(check_ideal_fixed_point().passed());
        assert!(check_beta_invariance(3).passed());
        assert!(check_lp_oracle(20, 7).passed());
    }

    #[test]
    fn report_lines() {
        let r = VerifyReport { checks: vec![check_beta_invariance(2)] };
        let text = r.to_string();
        assert!(text.starts_with("PASS beta-invariance"));
        assert!(text.contains("max_error=") && text.ends_with("1 checks, 0 failed"));
    }
}
