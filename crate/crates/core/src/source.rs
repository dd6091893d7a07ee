//! Flawed four-state preparation and the derived virtual X/Y states.
//!
//! Each party emits one of `{0Z, 1Z, 0X, 0Y}`, pure qubit states whose
//! amplitudes are perturbed by time-bin flaws (`delta1..delta4`), phase
//! modulator flaws (`theta1`, `theta2`) and a slow frame rotation `beta`.
//!
//! The virtual states are what the party would have emitted had it prepared
//! `(|0⟩_A|φ_0Z⟩ + |1⟩_A|φ_1Z⟩)/√2` and measured the ancilla `A` in the X or
//! Y basis. They depend only on the two Z states.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::qalg::{BlochState, C64};

/// Below this distance from unit overlap the two Z states count as identical.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlawParams {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub delta4: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub beta: f64,
}

impl FlawParams {
    pub fn ideal() -> Self {
        Self::default()
    }

    /// Same flaw `delta` on all four states.
    pub fn uniform(delta: f64) -> Self {
        Self { delta1: delta, delta2: delta, delta3: delta, delta4: delta, ..Self::default() }
    }

    pub fn z_flaw(delta: f64) -> Self {
        Self { delta1: delta, delta2: delta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let all = [
            self.delta1, self.delta2, self.delta3, self.delta4, self.theta1, self.theta2, self.beta,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("flaw parameters must be finite".into()));
        }
        for (i, d) in [self.delta1, self.delta2, self.delta3, self.delta4].iter().enumerate() {
            if d.abs() >= FRAC_PI_2 {
                return Err(Error::Domain(format!("|delta{}| = {} must be below pi/2", i + 1, d.abs())));
            }
        }
        Ok(())
    }
}

/// The four states actually emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateLabel {
    Z0,
    Z1,
    X0,
    Y0,
}

impl StateLabel {
    pub const ALL: [StateLabel; 4] = [StateLabel::Z0, StateLabel::Z1, StateLabel::X0, StateLabel::Y0];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_z(self) -> bool {
        matches!(self, StateLabel::Z0 | StateLabel::Z1)
    }

    /// Bit value of a Z state.
    pub fn z_bit(self) -> Option<u8> {
        match self {
            StateLabel::Z0 => Some(0),
            StateLabel::Z1 => Some(1),
            _ => None,
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StateLabel::Z0 => "0Z",
            StateLabel::Z1 => "1Z",
            StateLabel::X0 => "0X",
            StateLabel::Y0 => "0Y",
        };
        f.write_str(s)
    }
}

impl FromStr for StateLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "0Z" => Ok(StateLabel::Z0),
            "1Z" => Ok(StateLabel::Z1),
            "0X" => Ok(StateLabel::X0),
            "0Y" => Ok(StateLabel::Y0),
            other => Err(Error::Domain(format!("unknown state label {other:?}"))),
        }
    }
}

/// Measurement basis of the virtual protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Y,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::X, Basis::Y];

    fn index(self) -> usize {
        match self {
            Basis::X => 0,
            Basis::Y => 1,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::X => "X",
            Basis::Y => "Y",
        })
    }
}

/// Normalized virtual state with its emission probability `Tr[ρ^vir]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualState {
    pub prob: f64,
    pub state: BlochState,
}

/// Amplitudes `(a, b)` of `a|0⟩ + b|1⟩` for one of the four emitted states.
pub fn ket(p: &FlawParams, label: StateLabel) -> [C64; 2] {
    let real = |v: f64| C64::new(v, 0.0);
    match label {
        StateLabel::Z0 => [real((p.delta1 / 2.0).cos()), real((p.delta1 / 2.0).sin())],
        StateLabel::Z1 => [real((p.delta2 / 2.0).sin()), real((p.delta2 / 2.0).cos())],
        StateLabel::X0 => {
            let half = FRAC_PI_4 + p.delta3 / 2.0;
            [real(half.sin()), C64::from_polar(half.cos(), p.theta1 + p.beta)]
        }
        StateLabel::Y0 => {
            let half = FRAC_PI_4 + p.delta4 / 2.0;
            [real(half.sin()), C64::from_polar(half.cos(), FRAC_PI_2 + p.theta2 + p.beta)]
        }
    }
}

/// Weighted Bloch form of an unnormalized ket; weight is its squared norm.
pub fn bloch_of_ket(k: [C64; 2]) -> BlochState {
    let w = k[0].norm_sqr() + k[1].norm_sqr();
    if w == 0.0 {
        return BlochState::new(0.0, 0.0, 0.0, 0.0);
    }
    let cross = k[0].conj() * k[1];
    BlochState::new(
        w,
        2.0 * cross.re / w,
        2.0 * cross.im / w,
        (k[0].norm_sqr() - k[1].norm_sqr()) / w,
    )
}

pub fn prepare_actual(p: &FlawParams, label: StateLabel) -> BlochState {
    let b = bloch_of_ket(ket(p, label));
    BlochState::pure(b.x, b.y, b.z)
}

/// Virtual X/Y states, indexed `[basis][bit]`.
pub fn virtual_states(p: &FlawParams) -> Result<[[VirtualState; 2]; 2], Error> {
    let phi0 = ket(p, StateLabel::Z0);
    let phi1 = ket(p, StateLabel::Z1);
    let overlap = (phi0[0].conj() * phi1[0] + phi0[1].conj() * phi1[1]).norm();
    if 1.0 - overlap < DEGENERACY_TOL {
        return Err(Error::DegenerateSource { overlap: 1.0 - overlap });
    }

    // Projecting the ancilla onto |j_α⟩* leaves (|φ_0Z⟩ + coef |φ_1Z⟩)/2 on the
    // emitted system; the conjugate keeps Y labels aligned with |±i⟩ since
    // the Z-state amplitudes are real.
    let project = |coef: C64| -> VirtualState {
        let res = [(phi0[0] + coef * phi1[0]) * 0.5, (phi0[1] + coef * phi1[1]) * 0.5];
        let b = bloch_of_ket(res);
        VirtualState { prob: b.weight, state: BlochState::pure(b.x, b.y, b.z) }
    };

    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    Ok([[project(one), project(-one)], [project(i), project(-i)]])
}

/// The 16-entry coefficient row multiplying `q` for the state pair `(a, b)`.
pub fn pauli_row(a: &BlochState, b: &BlochState) -> [f64; 16] {
    let ca = a.pauli_coeffs();
    let cb = b.pauli_coeffs();
    let mut row = [0.0; 16];
    for (i, x) in ca.iter().enumerate() {
        for (j, y) in cb.iter().enumerate() {
            row[4 * i + j] = x * y;
        }
    }
    row
}

/// One party's emitted states and virtual states.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedEnsemble {
    pub flaws: FlawParams,
    actual: [BlochState; 4],
    probs: [f64; 4],
    virt: [[VirtualState; 2]; 2],
}

impl PreparedEnsemble {
    pub fn new(flaws: FlawParams) -> Result<Self, Error> {
        Self::with_probabilities(flaws, [0.25; 4])
    }

    pub fn with_probabilities(flaws: FlawParams, probs: [f64; 4]) -> Result<Self, Error> {
        flaws.validate()?;
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("emission probabilities {probs:?} must sum to 1")));
        }
        let actual = StateLabel::ALL.map(|l| prepare_actual(&flaws, l));
        let virt = virtual_states(&flaws)?;
        Ok(Self { flaws, actual, probs, virt })
    }

    pub fn actual(&self, label: StateLabel) -> &BlochState {
        &self.actual[label.index()]
    }

    pub fn prob(&self, label: StateLabel) -> f64 {
        self.probs[label.index()]
    }

    pub fn virtual_state(&self, basis: Basis, bit: u8) -> &VirtualState {
        &self.virt[basis.index()][bit as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalg::{bloch_compose, bloch_decompose, HermOp2};

    fn close3(b: &BlochState, v: [f64; 3], tol: f64) -> bool {
        (b.x - v[0]).abs() < tol && (b.y - v[1]).abs() < tol && (b.z - v[2]).abs() < tol
    }

    #[test]
    fn ideal_actual_states() {
        let p = FlawParams::ideal();
        assert!(close3(&prepare_actual(&p, StateLabel::Z0), [0.0, 0.0, 1.0], 1e-15));
        assert!(close3(&prepare_actual(&p, StateLabel::Z1), [0.0, 0.0, -1.0], 1e-15));
        assert!(close3(&prepare_actual(&p, StateLabel::X0), [1.0, 0.0, 0.0], 1e-15));
        assert!(close3(&prepare_actual(&p, StateLabel::Y0), [0.0, 1.0, 0.0], 1e-15));
    }

    #[test]
    fn flawed_x_state_matches_outer_product() {
        let p = FlawParams { delta3: 0.126, ..Default::default() };
        let b = prepare_actual(&p, StateLabel::X0);
        assert!(close3(&b, [0.126f64.cos(), 0.0, 0.126f64.sin()], 1e-14));
        let via_matrix = bloch_decompose(&HermOp2::projector(ket(&p, StateLabel::X0))).unwrap();
        assert!(close3(&b, via_matrix.vector(), 1e-14));
    }

    #[test]
    fn unknown_label() {
        assert!(matches!("1X".parse::<StateLabel>(), Err(Error::Domain(_))));
        assert_eq!("0Y".parse::<StateLabel>().unwrap(), StateLabel::Y0);
    }

    #[test]
    fn ideal_virtual_states() {
        let e = PreparedEnsemble::new(FlawParams::ideal()).unwrap();
        let v0x = e.virtual_state(Basis::X, 0);
        assert!((v0x.prob - 0.5).abs() < 1e-15 && close3(&v0x.state, [1.0, 0.0, 0.0], 1e-15));
        let v0y = e.virtual_state(Basis::Y, 0);
        assert!((v0y.prob - 0.5).abs() < 1e-15 && close3(&v0y.state, [0.0, 1.0, 0.0], 1e-15));
        let v1y = e.virtual_state(Basis::Y, 1);
        assert!((v1y.prob - 0.5).abs() < 1e-15 && close3(&v1y.state, [0.0, -1.0, 0.0], 1e-15));
        let v1x = e.virtual_state(Basis::X, 1);
        assert!(close3(&v1x.state, [-1.0, 0.0, 0.0], 1e-15));
    }

    #[test]
    fn mixture_identity() {
        let p = FlawParams { delta1: 0.2, delta2: -0.1, delta3: 0.05, theta1: 0.3, beta: 1.0, ..Default::default() };
        let e = PreparedEnsemble::new(p).unwrap();
        let avg = (bloch_compose(e.actual(StateLabel::Z0)) + bloch_compose(e.actual(StateLabel::Z1))).scale(0.5);
        for basis in Basis::BOTH {
            let (a, b) = (e.virtual_state(basis, 0), e.virtual_state(basis, 1));
            assert!((a.prob + b.prob - 1.0).abs() < 1e-12);
            let mix = bloch_compose(&BlochState { weight: a.prob, ..a.state })
                + bloch_compose(&BlochState { weight: b.prob, ..b.state });
            assert!(mix.max_abs_diff(&avg) < 1e-12);
        }
    }

    #[test]
    fn degenerate_z_states() {
        // delta1 + delta2 = pi makes |φ_0Z⟩ = |φ_1Z⟩, but that needs |delta| >= pi/2;
        // drive the virtual construction directly.
        let p = FlawParams { delta1: FRAC_PI_2, delta2: FRAC_PI_2, ..Default::default() };
        assert!(matches!(virtual_states(&p), Err(Error::DegenerateSource { .. })));
        assert!(matches!(PreparedEnsemble::new(p), Err(Error::Domain(_))));
    }

    #[test]
    fn pauli_row_examples() {
        let z = BlochState::pure(0.0, 0.0, 1.0);
        let row = pauli_row(&z, &z);
        let ones: Vec<usize> = (0..16).filter(|&i| row[i] != 0.0).map(|i| i + 1).collect();
        assert_eq!(ones, vec![1, 4, 13, 16]);
        assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));

        let row = pauli_row(&BlochState::pure(1.0, 0.0, 0.0), &BlochState::pure(0.0, 1.0, 0.0));
        let ones: Vec<usize> = (0..16).filter(|&i| row[i] != 0.0).map(|i| i + 1).collect();
        assert_eq!(ones, vec![1, 3, 5, 7]);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let r = PreparedEnsemble::with_probabilities(FlawParams::ideal(), [0.5, 0.5, 0.5, 0.0]);
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
