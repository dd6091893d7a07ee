//! Eve's information bound and the asymptotic key rates.

use crate::error::Error;

/// Default error-correction inefficiency.
pub const F_EC: f64 = 1.16;

/// `−x log₂ x − (1−x) log₂(1−x)`, with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64, Error> {
    if !(-1e-12..=1.0 + 1e-12).contains(&x) {
        return Err(Error::Domain(format!("entropy argument {x} outside [0, 1]")));
    }
    let x = x.clamp(0.0, 1.0);
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    Ok(term(x) + term(1.0 - x))
}

fn h(x: f64) -> f64 {
    binary_entropy(x.clamp(0.0, 1.0)).expect("argument clamped")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveInfo {
    pub i_e: f64,
    pub u: f64,
    pub v: f64,
}

/// Information leaked to Eve given `C` and the ZZ error rate.
///
/// `I_E = (1−e) H((1+u)/2) + e H((1+v)/2)`. Error rates above one half are
/// treated as a full leak.
pub fn eve_info(c: f64, e_zz: f64) -> EveInfo {
    let c = c.clamp(0.0, 4.0);
    let e = e_zz.max(0.0);
    if e > 0.5 {
        return EveInfo { i_e: 1.0, u: 0.0, v: 0.0 };
    }
    let half_c = c / 2.0;
    let u = if e >= 1.0 { 1.0 } else { (half_c.sqrt() / (1.0 - e)).min(1.0) };
    let v = if e == 0.0 {
        0.0
    } else {
        let arg = half_c - (1.0 - e).powi(2) * u * u;
        debug_assert!(arg > -1e-9, "sqrt argument {arg} clamped");
        (arg.max(0.0).sqrt() / e).min(1.0)
    };
    let i_e = (1.0 - e) * h((1.0 + u) / 2.0) + e * h((1.0 + v) / 2.0);
    EveInfo { i_e: i_e.clamp(0.0, 1.0), u, v }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpsInputs {
    pub q11_zz: f64,
    pub e11_zz: f64,
    pub c: f64,
    pub f_ec: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WcsInputs {
    pub p11: f64,
    pub y11_zz_low: f64,
    pub c_low: f64,
    pub e_zz_up: f64,
    pub q_zz_mumu: f64,
    pub e_zz_mumu: f64,
    pub f_ec: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateResult {
    pub r_raw: f64,
    pub r_clamped: f64,
    pub eve: EveInfo,
    /// Privacy-amplified gain before error correction.
    pub gain_term: f64,
    /// Error-correction leakage.
    pub ec_term: f64,
}

impl RateResult {
    fn new(gain_term: f64, ec_term: f64, eve: EveInfo) -> Self {
        let r_raw = gain_term - ec_term;
        Self { r_raw, r_clamped: r_raw.max(0.0), eve, gain_term, ec_term }
    }
}

pub fn rate_sps(inp: &SpsInputs) -> RateResult {
    let eve = eve_info(inp.c, inp.e11_zz);
    let gain_term = inp.q11_zz * (1.0 - eve.i_e);
    let ec_term = inp.q11_zz * inp.f_ec * h(inp.e11_zz);
    RateResult::new(gain_term, ec_term, eve)
}

pub fn rate_wcs(inp: &WcsInputs) -> RateResult {
    let eve = eve_info(inp.c_low, inp.e_zz_up);
    let gain_term = inp.p11 * inp.y11_zz_low * (1.0 - eve.i_e);
    let ec_term = inp.q_zz_mumu * inp.f_ec * h(inp.e_zz_mumu);
    RateResult::new(gain_term, ec_term, eve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.11).unwrap() - 0.49992).abs() < 1e-5);
        assert!(matches!(binary_entropy(1.1), Err(Error::Domain(_))));
        assert!(matches!(binary_entropy(-0.01), Err(Error::Domain(_))));
        assert_eq!(binary_entropy(-1e-13).unwrap(), 0.0);
    }

    #[test]
    fn eve_info_limits() {
        let e = eve_info(2.0, 0.0);
        assert_eq!(e.u, 1.0);
        assert!(e.i_e.abs() < 1e-15);
        let e = eve_info(0.0, 0.5);
        assert_eq!((e.u, e.v), (0.0, 0.0));
        assert!((e.i_e - 1.0).abs() < 1e-15);
        assert_eq!(eve_info(4.0, 0.6).i_e, 1.0);
    }

    #[test]
    fn sps_examples() {
        let r = rate_sps(&SpsInputs { q11_zz: 1.0, e11_zz: 0.0, c: 2.0, f_ec: F_EC });
        assert!((r.r_raw - 1.0).abs() < 1e-15);
        let r = rate_sps(&SpsInputs { q11_zz: 0.0, e11_zz: 0.0, c: 2.0, f_ec: F_EC });
        assert_eq!(r.r_raw, 0.0);
        let r = rate_sps(&SpsInputs { q11_zz: 1.0 / 32.0, e11_zz: 0.0, c: 2.0, f_ec: F_EC });
        assert!((r.r_raw - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn wcs_examples() {
        let base = WcsInputs {
            p11: 0.1,
            y11_zz_low: 0.0,
            c_low: 2.0,
            e_zz_up: 0.02,
            q_zz_mumu: 1e-3,
            e_zz_mumu: 0.03,
            f_ec: F_EC,
        };
        let r = rate_wcs(&base);
        assert!((r.r_raw + 1e-3 * F_EC * binary_entropy(0.03).unwrap()).abs() < 1e-18);
        assert!(r.r_raw <= 0.0 && r.r_clamped == 0.0);

        let r = rate_wcs(&WcsInputs { y11_zz_low: 0.02, e_zz_up: 0.0, e_zz_mumu: 0.0, ..base });
        assert!((r.r_raw - 0.1 * 0.02).abs() < 1e-15);
    }
}
