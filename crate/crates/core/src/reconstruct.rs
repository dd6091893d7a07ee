//! Recovering the relay's transfer rates from observed yields.
//!
//! Each of the sixteen actual state pairs contributes one linear equation
//! `Y = P_a P_b · row(a, b) · q`. With four linearly independent Bloch
//! vectors per party the system is the Kronecker product of two invertible
//! 4×4 matrices and can be solved for `q`. Virtual yields, and from them the
//! X/Y error rates entering `C`, are then linear functionals of `q`.

use nalgebra::{SMatrix, SVector};

use crate::channel::{TransferRates, YieldTable, NEG_YIELD_TOL, STATE_PAIRS};
use crate::error::Error;
use crate::source::{pauli_row, Basis, PreparedEnsemble};

/// Systems with a 1-norm condition estimate above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

type Mat16 = SMatrix<f64, 16, 16>;
type Vec16 = SVector<f64, 16>;

/// The sixteen-equation system in the fixed [`STATE_PAIRS`] row order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionSystem {
    pub matrix: [[f64; 16]; 16],
    pub rhs: [f64; 16],
    /// `‖A‖₁ ‖A⁻¹‖₁`, or infinity when the matrix is singular.
    pub condition: f64,
}

impl ReconstructionSystem {
    /// Row-major dump, 16 coefficients then the right-hand side per line.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (row, rhs) in self.matrix.iter().zip(self.rhs.iter()) {
            let cells: Vec<String> = row.iter().chain(std::iter::once(rhs)).map(|v| format!("{v:.11e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    fn mat(&self) -> Mat16 {
        Mat16::from_fn(|r, c| self.matrix[r][c])
    }
}

fn one_norm(m: &Mat16) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Coefficient matrix of the actual-state system.
pub fn system_matrix(ea: &PreparedEnsemble, eb: &PreparedEnsemble) -> [[f64; 16]; 16] {
    let mut m = [[0.0; 16]; 16];
    for (row, pair) in m.iter_mut().zip(STATE_PAIRS.iter()) {
        let w = ea.prob(pair.a) * eb.prob(pair.b);
        let r = pauli_row(ea.actual(pair.a), eb.actual(pair.b));
        for (dst, src) in row.iter_mut().zip(r.iter()) {
            *dst = w * src;
        }
    }
    m
}

pub fn build_system(ea: &PreparedEnsemble, eb: &PreparedEnsemble, yields: &YieldTable) -> ReconstructionSystem {
    let matrix = system_matrix(ea, eb);
    let a = Mat16::from_fn(|r, c| matrix[r][c]);
    let condition = match a.try_inverse() {
        Some(inv) => one_norm(&a) * one_norm(&inv),
        None => f64::INFINITY,
    };
    ReconstructionSystem { matrix, rhs: yields.0, condition }
}

pub fn solve_q(sys: &ReconstructionSystem) -> Result<TransferRates, Error> {
    if !sys.condition.is_finite() || sys.condition >= MAX_CONDITION {
        return Err(Error::SingularPreparation { condition: sys.condition });
    }
    let a = sys.mat();
    let b = Vec16::from_column_slice(&sys.rhs);
    let q = a
        .lu()
        .solve(&b)
        .ok_or(Error::SingularPreparation { condition: f64::INFINITY })?;
    let resid = (a * q - b).amax();
    let scale = b.amax().max(1.0);
    if resid >= 1e-9 * scale {
        return Err(Error::SingularPreparation { condition: sys.condition });
    }
    let mut out = [0.0; 16];
    out.copy_from_slice(q.as_slice());
    Ok(TransferRates(out))
}

/// Coefficient row, including `P^vir P^vir`, of one virtual yield in `q`.
pub fn virtual_row(ea: &PreparedEnsemble, eb: &PreparedEnsemble, j: u8, alpha: Basis, s: u8, chi: Basis) -> [f64; 16] {
    let va = ea.virtual_state(alpha, j);
    let vb = eb.virtual_state(chi, s);
    let w = va.prob * vb.prob;
    pauli_row(&va.state, &vb.state).map(|v| w * v)
}

pub fn virtual_yield(
    q: &TransferRates,
    ea: &PreparedEnsemble,
    eb: &PreparedEnsemble,
    j: u8,
    alpha: Basis,
    s: u8,
    chi: Basis,
) -> Result<f64, Error> {
    let y = q.dot(&virtual_row(ea, eb, j, alpha, s, chi));
    if y < -NEG_YIELD_TOL {
        return Err(Error::InconsistentModel(format!(
            "virtual yield {j}{alpha},{s}{chi} = {y:e} is negative"
        )));
    }
    Ok(y.max(0.0))
}

/// Error rate in the `(alpha, chi)` basis pair: matching bits count as errors
/// because the singlet announcement anti-correlates the parties.
pub fn error_rate(q: &TransferRates, ea: &PreparedEnsemble, eb: &PreparedEnsemble, alpha: Basis, chi: Basis) -> Result<f64, Error> {
    let y = |j, s| virtual_yield(q, ea, eb, j, alpha, s, chi);
    let same = y(0, 0)? + y(1, 1)?;
    let diff = y(0, 1)? + y(1, 0)?;
    let total = same + diff;
    if total <= 0.0 {
        return Err(Error::NoSignal(format!("no virtual detections in basis pair {alpha}{chi}")));
    }
    Ok((same / total).clamp(0.0, 1.0))
}

/// `C = Σ (1 − 2e)²` over the four X/Y basis pairs.
pub fn quantity_c(e_xx: f64, e_xy: f64, e_yx: f64, e_yy: f64) -> f64 {
    [e_xx, e_xy, e_yx, e_yy].iter().map(|e| (1.0 - 2.0 * e).powi(2)).sum()
}

/// The four X/Y error rates in the order `XX, XY, YX, YY`.
pub fn xy_error_rates(q: &TransferRates, ea: &PreparedEnsemble, eb: &PreparedEnsemble) -> Result<[f64; 4], Error> {
    Ok([
        error_rate(q, ea, eb, Basis::X, Basis::X)?,
        error_rate(q, ea, eb, Basis::X, Basis::Y)?,
        error_rate(q, ea, eb, Basis::Y, Basis::X)?,
        error_rate(q, ea, eb, Basis::Y, Basis::Y)?,
    ])
}

/// ZZ error rate and total ZZ yield read directly from the actual-state yields.
pub fn zz_statistics(yields: &YieldTable) -> Result<(f64, f64), Error> {
    let mut err = 0.0;
    let mut total = 0.0;
    for p in STATE_PAIRS.iter().filter(|p| p.is_zz()) {
        let y = yields.get(*p);
        total += y;
        if p.is_zz_error() {
            err += y;
        }
    }
    if total <= 0.0 {
        return Err(Error::NoSignal("no ZZ detections".into()));
    }
    Ok((err / total, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sps_yields, transfer_rates};
    use crate::qalg::singlet_projector;
    use crate::source::FlawParams;

    fn ideal() -> PreparedEnsemble {
        PreparedEnsemble::new(FlawParams::ideal()).unwrap()
    }

    fn singlet_q() -> TransferRates {
        transfer_rates(&singlet_projector()).unwrap()
    }

    #[test]
    fn ideal_system_recovers_singlet() {
        let e = ideal();
        let q = singlet_q();
        let sys = build_system(&e, &e, &sps_yields(&e, &e, &q).unwrap());
        assert!(sys.condition.is_finite() && sys.condition < 1e3);
        let got = solve_q(&sys).unwrap();
        assert!(got.max_abs_diff(&q) < 1e-14);
    }

    #[test]
    fn zero_rhs_gives_zero_q() {
        let e = ideal();
        let sys = build_system(&e, &e, &YieldTable([0.0; 16]));
        assert_eq!(solve_q(&sys).unwrap(), TransferRates::zero());
    }

    #[test]
    fn duplicated_state_is_singular() {
        let e = ideal();
        let mut sys = build_system(&e, &e, &YieldTable([0.0; 16]));
        // 0X ≡ 0Z on Alice's side: rows of (0X, ·) copy rows of (0Z, ·).
        let copy = [(8, 0), (9, 1), (10, 4), (11, 6)];
        for (dst, src) in copy {
            sys.matrix[dst] = sys.matrix[src];
        }
        let a = Mat16::from_fn(|r, c| sys.matrix[r][c]);
        sys.condition = match a.try_inverse() {
            Some(inv) => one_norm(&a) * one_norm(&inv),
            None => f64::INFINITY,
        };
        assert!(matches!(solve_q(&sys), Err(Error::SingularPreparation { .. })));
    }

    #[test]
    fn ideal_virtual_yields() {
        let e = ideal();
        let q = singlet_q();
        let y = virtual_yield(&q, &e, &e, 0, Basis::X, 0, Basis::X).unwrap();
        assert!(y.abs() < 1e-15);
        let y = virtual_yield(&q, &e, &e, 0, Basis::X, 0, Basis::Y).unwrap();
        assert!((y - 1.0 / 16.0).abs() < 1e-15);
        let y = virtual_yield(&TransferRates::zero(), &e, &e, 1, Basis::Y, 0, Basis::X).unwrap();
        assert_eq!(y, 0.0);
    }

    #[test]
    fn ideal_error_rates() {
        let e = ideal();
        let q = singlet_q();
        let [xx, xy, yx, yy] = xy_error_rates(&q, &e, &e).unwrap();
        assert!(xx.abs() < 1e-15 && yy.abs() < 1e-15);
        assert!((xy - 0.5).abs() < 1e-15 && (yx - 0.5).abs() < 1e-15);
        let (ezz, _) = zz_statistics(&sps_yields(&e, &e, &q).unwrap()).unwrap();
        assert!(ezz.abs() < 1e-15);
        assert!(matches!(
            error_rate(&TransferRates::zero(), &e, &e, Basis::X, Basis::X),
            Err(Error::NoSignal(_))
        ));
    }

    #[test]
    fn c_examples() {
        assert!((quantity_c(0.0, 0.5, 0.5, 0.0) - 2.0).abs() < 1e-15);
        assert_eq!(quantity_c(0.5, 0.5, 0.5, 0.5), 0.0);
        assert_eq!(quantity_c(0.0, 0.0, 0.0, 0.0), 4.0);
    }

    #[test]
    fn csv_has_seventeen_columns() {
        let e = ideal();
        let sys = build_system(&e, &e, &YieldTable([0.0; 16]));
        let csv = sys.to_csv();
        assert_eq!(csv.lines().count(), 16);
        assert!(csv.lines().all(|l| l.split(',').count() == 17));
    }
}
