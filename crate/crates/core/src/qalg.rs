//! Small dense Hermitian algebra for one- and two-qubit operators.
//!
//! Operators are stored as fixed-size complex matrices; single-qubit states
//! are usually carried around as [`BlochState`]s and only expanded into
//! matrices when a trace against a two-qubit operator is needed.

use nalgebra::{Complex, Matrix2, Matrix4};

use crate::error::Error;

pub type C64 = Complex<f64>;

/// Tolerance on conjugate symmetry accepted at construction.
pub const HERMITIAN_TOL: f64 = 1e-9;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

fn max_asymmetry<const N: usize>(m: &nalgebra::SMatrix<C64, N, N>) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..N {
        for c in r..N {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Hermitian 2×2 operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermOp2(Matrix2<C64>);

/// Hermitian 4×4 operator on two qubits, first factor is the high bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermOp4(Matrix4<C64>);

impl HermOp2 {
    pub fn new(m: Matrix2<C64>) -> Result<Self, Error> {
        let asym = max_asymmetry(&m);
        if asym > HERMITIAN_TOL {
            return Err(Error::InvalidOperator(format!(
                "2x2 operator not Hermitian (asymmetry {asym:e})"
            )));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn pauli_x() -> Self {
        Self(Matrix2::new(ZERO, ONE, ONE, ZERO))
    }

    pub fn pauli_y() -> Self {
        Self(Matrix2::new(ZERO, -I, I, ZERO))
    }

    pub fn pauli_z() -> Self {
        Self(Matrix2::new(ONE, ZERO, ZERO, -ONE))
    }

    /// `[σ_I, σ_X, σ_Y, σ_Z]`.
    pub fn paulis() -> [Self; 4] {
        [Self::identity(), Self::pauli_x(), Self::pauli_y(), Self::pauli_z()]
    }

    /// Projector `|ψ⟩⟨ψ|` for an (unnormalized) ket.
    pub fn projector(ket: [C64; 2]) -> Self {
        let v = nalgebra::Vector2::new(ket[0], ket[1]);
        Self(v * v.adjoint())
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, k: f64) -> Self {
        Self(self.0 * C64::new(k, 0.0))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.0 - other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Add for HermOp2 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl HermOp4 {
    pub fn new(m: Matrix4<C64>) -> Result<Self, Error> {
        let asym = max_asymmetry(&m);
        if asym > HERMITIAN_TOL {
            return Err(Error::InvalidOperator(format!(
                "4x4 operator not Hermitian (asymmetry {asym:e})"
            )));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn zero() -> Self {
        Self(Matrix4::zeros())
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, k: f64) -> Self {
        Self(self.0 * C64::new(k, 0.0))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let eig = self.0.symmetric_eigenvalues();
        let mut out = [eig[0], eig[1], eig[2], eig[3]];
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.0 - other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Add for HermOp4 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

/// A single-qubit operator written as `(weight/2)(σ_I + x σ_X + y σ_Y + z σ_Z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub weight: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochState {
    pub const fn new(weight: f64, x: f64, y: f64, z: f64) -> Self {
        Self { weight, x, y, z }
    }

    /// Unit-weight state with the given Bloch vector.
    pub const fn pure(x: f64, y: f64, z: f64) -> Self {
        Self::new(1.0, x, y, z)
    }

    pub fn vector(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// `[1, x, y, z]`, the coefficient vector in the Pauli basis.
    pub fn pauli_coeffs(&self) -> [f64; 4] {
        [1.0, self.x, self.y, self.z]
    }
}

pub fn bloch_decompose(op: &HermOp2) -> Result<BlochState, Error> {
    let m = op.matrix();
    let asym = max_asymmetry(m);
    if asym > HERMITIAN_TOL {
        return Err(Error::InvalidOperator(format!(
            "operator not Hermitian (asymmetry {asym:e})"
        )));
    }
    let weight = op.trace();
    if weight == 0.0 {
        return Ok(BlochState::new(0.0, 0.0, 0.0, 0.0));
    }
    // Tr[ρ σ_k] with ρ = op / weight.
    let x = (m[(0, 1)] + m[(1, 0)]).re / weight;
    let y = (I * (m[(0, 1)] - m[(1, 0)])).re / weight;
    let z = (m[(0, 0)] - m[(1, 1)]).re / weight;
    Ok(BlochState::new(weight, x, y, z))
}

pub fn bloch_compose(b: &BlochState) -> HermOp2 {
    let h = C64::new(b.weight / 2.0, 0.0);
    let m = Matrix2::new(
        h * (1.0 + b.z),
        h * C64::new(b.x, -b.y),
        h * C64::new(b.x, b.y),
        h * (1.0 - b.z),
    );
    HermOp2(m)
}

pub fn tensor(a: &HermOp2, b: &HermOp2) -> HermOp4 {
    HermOp4(a.0.kronecker(&b.0))
}

/// Real part of `Tr[a b]`.
pub fn trace_product(a: &HermOp4, b: &HermOp4) -> f64 {
    let mut acc = ZERO;
    for r in 0..4 {
        for c in 0..4 {
            acc += a.0[(r, c)] * b.0[(c, r)];
        }
    }
    debug_assert!(acc.im.abs() < 1e-10 * (1.0 + acc.re.abs()));
    acc.re
}

/// Projector onto `(|01⟩ − |10⟩)/√2`.
pub fn singlet_projector() -> HermOp4 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = nalgebra::Vector4::new(ZERO, C64::new(s, 0.0), C64::new(-s, 0.0), ZERO);
    HermOp4(v * v.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn decompose_basis_states() {
        let zero = HermOp2::projector([c(1.0), c(0.0)]);
        assert_eq!(bloch_decompose(&zero).unwrap(), BlochState::pure(0.0, 0.0, 1.0));

        let mixed = HermOp2::identity().scale(0.5);
        assert_eq!(bloch_decompose(&mixed).unwrap(), BlochState::pure(0.0, 0.0, 0.0));

        let plus = HermOp2::projector([c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]);
        let b = bloch_decompose(&plus).unwrap();
        assert!((b.weight - 1.0).abs() < 1e-15);
        assert!((b.x - 1.0).abs() < 1e-15 && b.y.abs() < 1e-15 && b.z.abs() < 1e-15);
    }

    #[test]
    fn decompose_zero_weight() {
        let b = bloch_decompose(&HermOp2::pauli_z()).unwrap();
        assert_eq!(b, BlochState::new(0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = Matrix2::new(c(1.0), c(1.0), c(0.0), c(0.0));
        assert!(matches!(HermOp2::new(m), Err(Error::InvalidOperator(_))));
    }

    #[test]
    fn compose_examples() {
        let p0 = bloch_compose(&BlochState::pure(0.0, 0.0, 1.0));
        assert!(p0.max_abs_diff(&HermOp2::projector([c(1.0), c(0.0)])) < 1e-15);

        let plus_i = bloch_compose(&BlochState::pure(0.0, 1.0, 0.0));
        let expect = HermOp2::projector([c(FRAC_1_SQRT_2), C64::new(0.0, FRAC_1_SQRT_2)]);
        assert!(plus_i.max_abs_diff(&expect) < 1e-15);

        let quarter = bloch_compose(&BlochState::new(0.5, 0.0, 0.0, 0.0));
        assert!(quarter.max_abs_diff(&HermOp2::identity().scale(0.25)) < 1e-15);
    }

    #[test]
    fn tensor_examples() {
        let ii = tensor(&HermOp2::identity(), &HermOp2::identity());
        assert!(ii.max_abs_diff(&HermOp4::identity()) < 1e-15);

        let zz = tensor(&HermOp2::pauli_z(), &HermOp2::pauli_z());
        let diag = [1.0, -1.0, -1.0, 1.0];
        for r in 0..4 {
            for col in 0..4 {
                let want = if r == col { diag[r] } else { 0.0 };
                assert_eq!(zz.matrix()[(r, col)], c(want));
            }
        }

        // σ_X ⊗ σ_Y: anti-diagonal (-i, i, -i, i) reading rows top to bottom.
        let xy = tensor(&HermOp2::pauli_x(), &HermOp2::pauli_y());
        let anti = [-I, I, -I, I];
        for r in 0..4 {
            for col in 0..4 {
                let want = if r + col == 3 { anti[r] } else { ZERO };
                assert_eq!(xy.matrix()[(r, col)], want);
            }
        }
    }

    #[test]
    fn trace_product_examples() {
        let id = HermOp4::identity();
        assert_eq!(trace_product(&id, &id), 4.0);
        let p = singlet_projector();
        assert!((trace_product(&p, &p) - 1.0).abs() < 1e-15);
        let xx = tensor(&HermOp2::pauli_x(), &HermOp2::pauli_x());
        assert!((trace_product(&p, &xx) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn singlet_entries_and_spectrum() {
        let p = singlet_projector();
        assert!((p.trace() - 1.0).abs() < 1e-15);
        assert!((p.matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert_eq!(p.matrix()[(0, 0)], ZERO);
        let ev = p.eigenvalues();
        for (got, want) in ev.iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-10);
        }
    }
}
