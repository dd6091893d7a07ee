//! Scenario runner: distance and flaw sweeps, heatmaps, intensity
//! optimization and the self-check.

mod config;
mod optimize;
mod output;
pub mod verify;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

pub use config::parse_scenario;
pub use optimize::{max_positive_distance, optimize_intensities, Optimum, MU_RANGE, NU_MIN};
pub use output::{write_csv, CSV_HEADER};

use crate::channel::{effective_operator, sps_yields, transfer_rates, MeasurementModel};
use crate::decoy::{security_summary, simulated_gains, DecoySettings};
use crate::error::Error;
use crate::rate::{rate_sps, rate_wcs, RateResult, SpsInputs, WcsInputs, F_EC};
use crate::reconstruct::{build_system, quantity_c, solve_q, xy_error_rates, zz_statistics};
use crate::source::{FlawParams, PreparedEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sps,
    Wcs,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "sps" => Ok(Mode::Sps),
            "wcs" => Ok(Mode::Wcs),
            _ => Err(Error::Domain(format!("unknown mode {s:?}, expected sps or wcs"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sps => "sps",
            Mode::Wcs => "wcs",
        })
    }
}

/// One swept axis: `steps` evenly spaced values from `from` to `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn new(variable: &str, from: f64, to: f64, steps: usize) -> Self {
        Self { variable: variable.to_string(), from, to, steps }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.steps < 2 || !(self.from < self.to) {
            return Err(Error::Domain(format!(
                "sweep over {} needs from < to and at least 2 steps (got {}..{} in {})",
                self.variable, self.from, self.to, self.steps
            )));
        }
        Scenario::default().set_variable(&self.variable, self.from)
    }

    pub fn values(&self) -> Vec<f64> {
        let span = self.to - self.from;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.to } else { self.from + span * i as f64 / (self.steps - 1) as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mode: Mode,
    pub alice: FlawParams,
    pub bob: FlawParams,
    pub model: MeasurementModel,
    pub decoy: DecoySettings,
    /// Re-optimize `(μ, ν)` at every grid point.
    pub optimize: bool,
    pub f_ec: f64,
    pub sweep: Option<SweepSpec>,
    /// `(x, y)` axes of a two-variable grid.
    pub heatmap: Option<(SweepSpec, SweepSpec)>,
    pub output: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            mode: Mode::Wcs,
            alice: FlawParams::ideal(),
            bob: FlawParams::ideal(),
            model: MeasurementModel::default(),
            decoy: DecoySettings::default(),
            optimize: false,
            f_ec: F_EC,
            sweep: None,
            heatmap: None,
            output: None,
        }
    }
}

fn set_party(p: &mut FlawParams, field: &str, v: f64) -> bool {
    match field {
        "delta1" => p.delta1 = v,
        "delta2" => p.delta2 = v,
        "delta3" => p.delta3 = v,
        "delta4" => p.delta4 = v,
        "theta1" => p.theta1 = v,
        "theta2" => p.theta2 = v,
        "beta" => p.beta = v,
        "delta" => *p = FlawParams { delta1: v, delta2: v, delta3: v, delta4: v, ..*p },
        "delta_z" => *p = FlawParams { delta1: v, delta2: v, ..*p },
        "delta_xy" => *p = FlawParams { delta3: v, delta4: v, ..*p },
        "theta" => *p = FlawParams { theta1: v, theta2: v, ..*p },
        _ => return false,
    }
    true
}

impl Scenario {
    /// Set a numeric parameter by name. Accepts every numeric config key plus
    /// the shorthands `distance`, `mu`, `nu` and the flaw names without a
    /// party prefix, which apply to both parties.
    pub fn set_variable(&mut self, name: &str, v: f64) -> Result<(), Error> {
        if !v.is_finite() {
            return Err(Error::Domain(format!("{name} = {v} is not finite")));
        }
        let ok = match name {
            "distance" | "model.distance" => {
                self.model.dist_a = v / 2.0;
                self.model.dist_b = v / 2.0;
                true
            }
            "model.distance_a" => {
                self.model.dist_a = v;
                true
            }
            "model.distance_b" => {
                self.model.dist_b = v;
                true
            }
            "model.eta_det" => {
                self.model.eta_det = v;
                true
            }
            "model.dark" => {
                self.model.dark = v;
                true
            }
            "model.loss_db_per_km" => {
                self.model.loss_coeff = v;
                true
            }
            "mu" | "decoy.mu" => {
                self.decoy.mu = v;
                true
            }
            "nu" | "decoy.nu" => {
                self.decoy.nu = v;
                true
            }
            "rate.f_ec" => {
                self.f_ec = v;
                true
            }
            _ => {
                if let Some(field) = name.strip_prefix("alice.") {
                    set_party(&mut self.alice, field, v)
                } else if let Some(field) = name.strip_prefix("bob.") {
                    set_party(&mut self.bob, field, v)
                } else {
                    set_party(&mut self.alice, name, v) && set_party(&mut self.bob, name, v)
                }
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("unknown variable {name:?}")))
        }
    }

    pub fn with(&self, name: &str, v: f64) -> Result<Self, Error> {
        let mut sc = self.clone();
        sc.set_variable(name, v)?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.alice.validate()?;
        self.bob.validate()?;
        self.model.validate()?;
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return Err(Error::Domain(format!("f_ec = {} must be at least 1", self.f_ec)));
        }
        if self.mode == Mode::Wcs {
            self.decoy.validate()?;
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        if let Some((x, y)) = &self.heatmap {
            x.validate()?;
            y.validate()?;
        }
        Ok(())
    }
}

/// Key-rate outputs at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Intensities used, for the weak-coherent-source mode.
    pub mu_nu: Option<(f64, f64)>,
    pub rate: RateResult,
    pub c_low: f64,
    pub e_zz_up: f64,
    pub e_zz_mumu: f64,
    pub q_zz_mumu: f64,
}

impl Metrics {
    pub fn r_raw(&self) -> f64 {
        self.rate.r_raw
    }

    pub fn validate(&self) -> Result<(), Error> {
        let i_e = self.rate.eve.i_e;
        if !(0.0..=1.0).contains(&i_e) || !(0.0..=4.0).contains(&self.c_low) || !(0.0..=1.0).contains(&self.e_zz_up) {
            return Err(Error::InconsistentModel(format!(
                "record out of range: I_E={i_e}, C_low={}, e_zz_up={}",
                self.c_low, self.e_zz_up
            )));
        }
        Ok(())
    }
}

/// Key rate with exact single-photon statistics.
pub fn evaluate_sps(sc: &Scenario) -> Result<Metrics, Error> {
    let ea = PreparedEnsemble::new(sc.alice)?;
    let eb = PreparedEnsemble::new(sc.bob)?;
    sc.model.validate()?;
    let truth = transfer_rates(&effective_operator(&sc.model))?;
    let yields = sps_yields(&ea, &eb, &truth)?;
    let q = solve_q(&build_system(&ea, &eb, &yields))?;
    let [xx, xy, yx, yy] = xy_error_rates(&q, &ea, &eb)?;
    let c = quantity_c(xx, xy, yx, yy);
    let (e_zz, q_zz) = zz_statistics(&yields)?;
    let rate = rate_sps(&SpsInputs { q11_zz: q_zz, e11_zz: e_zz, c, f_ec: sc.f_ec });
    Ok(Metrics { mu_nu: None, rate, c_low: c, e_zz_up: e_zz, e_zz_mumu: e_zz, q_zz_mumu: q_zz })
}

/// Decoy-state key rate at the scenario's fixed intensities.
pub fn evaluate_wcs(sc: &Scenario) -> Result<Metrics, Error> {
    let ea = PreparedEnsemble::new(sc.alice)?;
    let eb = PreparedEnsemble::new(sc.bob)?;
    let gains = simulated_gains(&ea, &eb, &sc.model, &sc.decoy)?;
    let s = security_summary(&gains, &ea, &eb, &sc.decoy)?;
    let rate = rate_wcs(&WcsInputs {
        p11: s.p11,
        y11_zz_low: s.y11_zz_low,
        c_low: s.c_low,
        e_zz_up: s.e_zz_up,
        q_zz_mumu: s.q_zz_mumu,
        e_zz_mumu: s.e_zz_mumu,
        f_ec: sc.f_ec,
    });
    Ok(Metrics {
        mu_nu: Some((sc.decoy.mu, sc.decoy.nu)),
        rate,
        c_low: s.c_low,
        e_zz_up: s.e_zz_up,
        e_zz_mumu: s.e_zz_mumu,
        q_zz_mumu: s.q_zz_mumu,
    })
}

/// Full pipeline at the scenario's parameters, optimizing intensities first
/// when requested.
pub fn evaluate_point(sc: &Scenario) -> Result<Metrics, Error> {
    sc.validate()?;
    let m = match sc.mode {
        Mode::Sps => evaluate_sps(sc)?,
        Mode::Wcs if sc.optimize => optimize_intensities(sc)?.metrics,
        Mode::Wcs => evaluate_wcs(sc)?,
    };
    m.validate()?;
    Ok(m)
}

/// One row of sweep or heatmap output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub x: f64,
    pub y: Option<f64>,
    pub result: Result<Metrics, String>,
}

impl RunRecord {
    pub fn r_raw(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|m| m.rate.r_raw)
    }
}

fn evaluate_at(sc: &Scenario, assignments: &[(&str, f64)]) -> Result<Metrics, Error> {
    let mut point = sc.clone();
    for (name, v) in assignments {
        point.set_variable(name, *v)?;
    }
    evaluate_point(&point)
}

/// Evaluate the scenario along its sweep axis. Per-point failures are kept
/// in the records; only an invalid scenario is an error.
pub fn run_scenario(sc: &Scenario) -> Result<Vec<RunRecord>, Error> {
    let sweep = sc.sweep.as_ref().ok_or_else(|| Error::Domain("scenario has no sweep".into()))?;
    sweep.validate()?;
    let records = sweep
        .values()
        .par_iter()
        .map(|&x| RunRecord { x, y: None, result: evaluate_at(sc, &[(&sweep.variable, x)]).map_err(|e| e.to_string()) })
        .collect();
    Ok(records)
}

/// Row-major `(x, y)` grid over the heatmap axes.
pub fn heatmap(sc: &Scenario) -> Result<Vec<RunRecord>, Error> {
    let (xs, ys) = sc.heatmap.as_ref().ok_or_else(|| Error::Domain("scenario has no heatmap axes".into()))?;
    xs.validate()?;
    ys.validate()?;
    let cells: Vec<(f64, f64)> = xs.values().into_iter().flat_map(|x| ys.values().into_iter().map(move |y| (x, y))).collect();
    let records = cells
        .par_iter()
        .map(|&(x, y)| RunRecord {
            x,
            y: Some(y),
            result: evaluate_at(sc, &[(&xs.variable, x), (&ys.variable, y)]).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(records)
}
