//! Slow, independent reference computations used by the self-check and the
//! test suites. None of these share code paths with the production pipeline
//! beyond the basic operator types.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

use crate::error::Error;
use crate::lpcore::{LinearProgram, Relation, Sense};
use crate::qalg::{bloch_compose, tensor, trace_product, BlochState, HermOp4, C64};
use crate::source::{ket, Basis, FlawParams, StateLabel};

/// Optimum of a box-bounded LP by exhaustive enumeration of basic solutions.
///
/// Every bound must be finite. Returns `None` when no vertex is feasible.
pub fn vertex_enumeration(lp: &LinearProgram, tol: f64) -> Option<f64> {
    let n = lp.num_vars();
    assert!(
        lp.bounds.iter().all(|(lo, hi)| lo.is_finite() && hi.is_finite()),
        "vertex enumeration needs a bounded box"
    );
    // Candidate hyperplanes: every row at equality, then each bound.
    let mut planes: Vec<(Vec<f64>, f64)> = lp.constraints.iter().map(|c| (c.row.clone(), c.rhs)).collect();
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lo));
        planes.push((e, hi));
    }

    let feasible = |x: &[f64]| {
        lp.bounds.iter().zip(x).all(|(&(lo, hi), &v)| v >= lo - tol && v <= hi + tol)
            && lp.constraints.iter().all(|c| {
                let lhs: f64 = c.row.iter().zip(x).map(|(a, b)| a * b).sum();
                let scale = c.row.iter().fold(1.0f64, |m, a| m.max(a.abs()));
                match c.relation {
                    Relation::Le => lhs <= c.rhs + tol * scale,
                    Relation::Ge => lhs >= c.rhs - tol * scale,
                    Relation::Eq => (lhs - c.rhs).abs() <= tol * scale,
                }
            })
    };

    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(n);
    combinations(planes.len(), n, &mut pick, &mut |idx| {
        let a = DMatrix::from_fn(n, n, |r, c| planes[idx[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| planes[idx[r]].1);
        let Some(x) = a.lu().solve(&b) else { return };
        if x.iter().any(|v| !v.is_finite()) || !feasible(x.as_slice()) {
            return;
        }
        let val: f64 = lp.objective.iter().zip(x.iter()).map(|(c, v)| c * v).sum();
        best = Some(match (best, lp.sense) {
            (None, _) => val,
            (Some(b), Sense::Minimize) => b.min(val),
            (Some(b), Sense::Maximize) => b.max(val),
        });
    });
    best
}

fn combinations(n: usize, k: usize, pick: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    let start = pick.last().map_or(0, |&l| l + 1);
    for i in start..n {
        if n - i < k - pick.len() {
            break;
        }
        pick.push(i);
        combinations(n, k, pick, f);
        pick.pop();
    }
}

/// Virtual state from an explicit purification of the Z-basis preparation.
///
/// Builds `|Ψ⟩ = (|0⟩|φ_0Z⟩ + |1⟩|φ_1Z⟩)/√2` on ancilla ⊗ system, applies
/// the transposed ancilla projector for outcome `bit` in `basis`, and traces
/// out the ancilla. Returns the unnormalized result in Bloch form; its
/// weight is the probability of the outcome.
pub fn virtual_by_purification(p: &FlawParams, basis: Basis, bit: u8) -> BlochState {
    let phi0 = ket(p, StateLabel::Z0);
    let phi1 = ket(p, StateLabel::Z1);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let psi = Vector4::new(phi0[0] * h, phi0[1] * h, phi1[0] * h, phi1[1] * h);
    let rho = psi * psi.adjoint();

    let sign = if bit == 0 { 1.0 } else { -1.0 };
    let e = match basis {
        Basis::X => [C64::new(h, 0.0), C64::new(sign * h, 0.0)],
        Basis::Y => [C64::new(h, 0.0), C64::new(0.0, sign * h)],
    };
    // Transpose of |e⟩⟨e| is |e*⟩⟨e*|.
    let ec = [e[0].conj(), e[1].conj()];
    let mut proj = Matrix4::<C64>::zeros();
    for a in 0..2 {
        for b in 0..2 {
            for s in 0..2 {
                proj[(2 * a + s, 2 * b + s)] = ec[a] * ec[b].conj();
            }
        }
    }
    let post = proj * rho * proj;
    let mut sys = [[C64::new(0.0, 0.0); 2]; 2];
    for (s, row) in sys.iter_mut().enumerate() {
        for (t, v) in row.iter_mut().enumerate() {
            *v = post[(s, t)] + post[(2 + s, 2 + t)];
        }
    }
    let w = (sys[0][0] + sys[1][1]).re;
    if w <= 0.0 {
        return BlochState::new(0.0, 0.0, 0.0, 0.0);
    }
    BlochState::new(
        w,
        2.0 * sys[1][0].re / w,
        2.0 * sys[1][0].im / w,
        (sys[0][0].re - sys[1][1].re) / w,
    )
}

/// `Tr[D ρ_a ⊗ ρ_b]` by explicit matrix products.
pub fn direct_yield(d: &HermOp4, a: &BlochState, b: &BlochState) -> f64 {
    trace_product(d, &tensor(&bloch_compose(a), &bloch_compose(b)))
}

/// Error rate in basis pair `(alpha, chi)` from purified virtual states.
pub fn direct_error_rate(d: &HermOp4, fa: &FlawParams, fb: &FlawParams, alpha: Basis, chi: Basis) -> Result<f64, Error> {
    let y = |j: u8, s: u8| {
        let va = virtual_by_purification(fa, alpha, j);
        let vb = virtual_by_purification(fb, chi, s);
        direct_yield(d, &va, &vb)
    };
    let same = y(0, 0) + y(1, 1);
    let total = same + y(0, 1) + y(1, 0);
    if total <= 0.0 {
        return Err(Error::NoSignal(format!("no virtual detections in {alpha}{chi}")));
    }
    Ok(same / total)
}

/// Random positive semidefinite 4×4 operator `G G† / ‖G G†‖` with entries
/// of `G` drawn from `sample`.
pub fn random_psd(mut sample: impl FnMut() -> f64) -> HermOp4 {
    let g = Matrix4::<C64>::from_fn(|_, _| C64::new(sample(), sample()));
    let m = g * g.adjoint();
    let scale = m.trace().re.max(f64::MIN_POSITIVE);
    HermOp4::new(m.map(|v| v / scale)).expect("G G† is Hermitian")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalg::singlet_projector;
    use crate::source::PreparedEnsemble;

    #[test]
    fn enumeration_small_box() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0], Sense::Maximize);
        lp.bound(0, 0.0, 1.0).bound(1, 0.0, 1.0);
        lp.constrain(vec![1.0, 2.0], Relation::Le, 2.0);
        assert!((vertex_enumeration(&lp, 1e-12).unwrap() - 1.5).abs() < 1e-12);
        lp.constrain(vec![1.0, 1.0], Relation::Ge, 3.0);
        assert_eq!(vertex_enumeration(&lp, 1e-12), None);
    }

    #[test]
    fn purification_matches_virtual_states() {
        let f = FlawParams { delta1: 0.1, delta2: -0.05, delta3: 0.2, theta1: 0.3, beta: 1.0, ..FlawParams::ideal() };
        let e = PreparedEnsemble::new(f).unwrap();
        for basis in Basis::BOTH {
            for bit in 0..2 {
                let o = virtual_by_purification(&f, basis, bit);
                let v = e.virtual_state(basis, bit);
                assert!((o.weight - v.prob).abs() < 1e-14);
                assert!((o.x - v.state.x).abs() < 1e-14 && (o.y - v.state.y).abs() < 1e-14 && (o.z - v.state.z).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ideal_direct_rates() {
        let d = singlet_projector();
        let f = FlawParams::ideal();
        assert!(direct_error_rate(&d, &f, &f, Basis::X, Basis::X).unwrap().abs() < 1e-15);
        assert!((direct_error_rate(&d, &f, &f, Basis::X, Basis::Y).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn random_psd_is_normalized() {
        let mut k = 0.0;
        let d = random_psd(|| {
            k += 0.37;
            (k * 7.0f64).sin()
        });
        assert!((d.trace() - 1.0).abs() < 1e-12);
        assert!(d.eigenvalues()[0] > -1e-12);
    }
}
