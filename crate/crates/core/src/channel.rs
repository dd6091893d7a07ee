//! Ground-truth model of the untrusted Bell-state measurement.
//!
//! The relay announces `|Ψ−⟩` through a POVM element `D`. For one photon
//! from each side it takes the form `D = κ P(Ψ−) + y0 I` with
//! `κ = t_a t_b (1 − d)²`, so the linear relation between yields and the
//! transfer-rate vector `q` holds exactly.
//!
//! Multi-photon pulses use a coincidence-counting model over four detection
//! modes (two detectors, two time bins). Arrived photons are binomially
//! thinned; each mode fires a dark count with probability `d`. An
//! announcement is a click pattern in exactly the two `Ψ−` modes:
//!
//! * no photon: both target modes dark, `A0 = 2d²(1−d)²`;
//! * one photon: the photon plus one dark count, `A1 = d(1−d)²`;
//! * two photons: `(1−d)²(Tr[P(Ψ−) σ⊗σ'] + d/4)`, with `σ, σ'` the states of
//!   the two arrived photons (two photons from the same pure source never
//!   project onto the singlet);
//! * three or more: isotropic, `2(1−d)² 2^{−k}(1 − 2(1−d)2^{−k})`.

use crate::error::Error;
use crate::qalg::{singlet_projector, tensor, trace_product, BlochState, HermOp2, HermOp4};
use crate::source::{pauli_row, PreparedEnsemble, StateLabel};

/// Tolerance for PSD checks on announcement operators.
pub const PSD_TOL: f64 = 1e-9;
/// Negative yields down to this value are float noise and clamp to zero.
pub const NEG_YIELD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementModel {
    pub eta_det: f64,
    /// Dark-count probability per detector per gate.
    pub dark: f64,
    /// Fiber loss in dB/km.
    pub loss_coeff: f64,
    pub dist_a: f64,
    pub dist_b: f64,
}

impl Default for MeasurementModel {
    fn default() -> Self {
        Self { eta_det: 0.145, dark: 6.02e-6, loss_coeff: 0.2, dist_a: 0.0, dist_b: 0.0 }
    }
}

impl MeasurementModel {
    /// Relay placed in the middle of a link of `total_km`.
    pub fn symmetric(total_km: f64) -> Self {
        Self { dist_a: total_km / 2.0, dist_b: total_km / 2.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let finite = [self.eta_det, self.dark, self.loss_coeff, self.dist_a, self.dist_b]
            .iter()
            .all(|v| v.is_finite());
        if !finite
            || !(0.0..=1.0).contains(&self.eta_det)
            || !(0.0..=1.0).contains(&self.dark)
            || self.loss_coeff < 0.0
            || self.dist_a < 0.0
            || self.dist_b < 0.0
        {
            return Err(Error::Domain(format!("invalid measurement model {self:?}")));
        }
        Ok(())
    }

    fn transmittance(&self, dist: f64) -> f64 {
        self.eta_det * 10f64.powf(-self.loss_coeff * dist / 10.0)
    }

    pub fn t_a(&self) -> f64 {
        self.transmittance(self.dist_a)
    }

    pub fn t_b(&self) -> f64 {
        self.transmittance(self.dist_b)
    }

    fn coincidence(&self) -> Coincidence {
        Coincidence { t_a: self.t_a(), t_b: self.t_b(), d: self.dark }
    }

    /// Weight `κ` of the singlet projector in the single-pair operator.
    pub fn singlet_weight(&self) -> f64 {
        self.coincidence().kappa()
    }

    /// Isotropic background `y0` of the single-pair operator.
    pub fn background(&self) -> f64 {
        self.coincidence().y0()
    }
}

#[derive(Debug, Clone, Copy)]
struct Coincidence {
    t_a: f64,
    t_b: f64,
    d: f64,
}

impl Coincidence {
    fn keep(&self) -> f64 {
        (1.0 - self.d) * (1.0 - self.d)
    }

    fn a0(&self) -> f64 {
        2.0 * self.d * self.d * self.keep()
    }

    fn a1(&self) -> f64 {
        self.d * self.keep()
    }

    fn pair(&self, singlet_overlap: f64) -> f64 {
        self.keep() * (singlet_overlap + self.d / 4.0)
    }

    fn multi(&self, k: usize) -> f64 {
        let h = 0.5f64.powi(k as i32);
        2.0 * self.keep() * h * (1.0 - 2.0 * (1.0 - self.d) * h)
    }

    fn kappa(&self) -> f64 {
        self.t_a * self.t_b * self.keep()
    }

    fn y0(&self) -> f64 {
        let (ta, tb) = (self.t_a, self.t_b);
        (1.0 - ta) * (1.0 - tb) * self.a0()
            + (ta * (1.0 - tb) + tb * (1.0 - ta)) * self.a1()
            + ta * tb * self.pair(0.0)
    }

    /// Conditional announcement probability for `n` photons in state `a`
    /// and `m` photons in state `b`.
    fn yield_nm(&self, n: usize, m: usize, a: &BlochState, b: &BlochState) -> f64 {
        let pa = binomial_pmf(n, self.t_a);
        let pb = binomial_pmf(m, self.t_b);
        let mut total = 0.0;
        for (ka, wa) in pa.iter().enumerate() {
            for (kb, wb) in pb.iter().enumerate() {
                let w = wa * wb;
                if w == 0.0 {
                    continue;
                }
                let amp = match (ka, kb) {
                    (0, 0) => self.a0(),
                    (1, 0) | (0, 1) => self.a1(),
                    (1, 1) => self.pair(singlet_overlap(a, b)),
                    (2, 0) => self.pair(singlet_overlap(a, a)),
                    (0, 2) => self.pair(singlet_overlap(b, b)),
                    _ => self.multi(ka + kb),
                };
                total += w * amp;
            }
        }
        total
    }
}

/// `Tr[P(Ψ−) ρ_a ⊗ ρ_b]` for unit-weight states.
fn singlet_overlap(a: &BlochState, b: &BlochState) -> f64 {
    (1.0 - a.dot(b)) / 4.0
}

fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    let mut coef = 1.0;
    for k in 0..=n {
        out[k] = coef * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
        coef = coef * (n - k) as f64 / (k + 1) as f64;
    }
    out
}

/// `e^{−λ} λ^n / n!`.
pub fn poisson_pmf(lambda: f64, n: usize) -> f64 {
    let mut p = (-lambda).exp();
    for k in 1..=n {
        p *= lambda / k as f64;
    }
    p
}

/// Single-photon-pair announcement operator `κ P(Ψ−) + y0 I`.
pub fn effective_operator(m: &MeasurementModel) -> HermOp4 {
    singlet_projector().scale(m.singlet_weight()) + HermOp4::identity().scale(m.background())
}

/// The sixteen Pauli transmission rates `q_{l⊗l'} = ¼ Tr[D σ_l ⊗ σ_l']`,
/// ordered `II, IX, IY, IZ, XI, XX, …, ZZ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferRates(pub [f64; 16]);

impl TransferRates {
    pub const LABELS: [&'static str; 16] = [
        "II", "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY", "ZZ",
    ];

    pub fn zero() -> Self {
        Self([0.0; 16])
    }

    pub fn as_array(&self) -> &[f64; 16] {
        &self.0
    }

    pub fn dot(&self, row: &[f64; 16]) -> f64 {
        row.iter().zip(self.0.iter()).map(|(r, q)| r * q).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Rebuild `D = Σ q_{ll'} σ_l ⊗ σ_l'`.
    pub fn operator(&self) -> HermOp4 {
        let paulis = HermOp2::paulis();
        let mut d = HermOp4::zero();
        for (i, a) in paulis.iter().enumerate() {
            for (j, b) in paulis.iter().enumerate() {
                d = d + tensor(a, b).scale(self.0[4 * i + j]);
            }
        }
        d
    }
}

pub fn transfer_rates(d: &HermOp4) -> Result<TransferRates, Error> {
    let min_eig = d.eigenvalues()[0];
    if min_eig < -PSD_TOL {
        return Err(Error::InvalidChannel(format!(
            "announcement operator not PSD (min eigenvalue {min_eig:e})"
        )));
    }
    let paulis = HermOp2::paulis();
    let mut q = [0.0; 16];
    for (i, a) in paulis.iter().enumerate() {
        for (j, b) in paulis.iter().enumerate() {
            q[4 * i + j] = 0.25 * trace_product(d, &tensor(a, b));
        }
    }
    Ok(TransferRates(q))
}

/// Ordered pair of emitted states `(alice, bob)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StatePair {
    pub a: StateLabel,
    pub b: StateLabel,
}

const fn sp(a: StateLabel, b: StateLabel) -> StatePair {
    StatePair { a, b }
}

/// Fixed ordering of the sixteen state pairs, shared by yield tables and the
/// reconstruction system: ZZ(4), Z-0X(2), Z-0Y(2), 0X-Z(2), 0X-0X, 0X-0Y,
/// 0Y-Z(2), 0Y-0X, 0Y-0Y.
pub const STATE_PAIRS: [StatePair; 16] = {
    use StateLabel::*;
    [
        sp(Z0, Z0), sp(Z0, Z1), sp(Z1, Z0), sp(Z1, Z1),
        sp(Z0, X0), sp(Z1, X0),
        sp(Z0, Y0), sp(Z1, Y0),
        sp(X0, Z0), sp(X0, Z1),
        sp(X0, X0), sp(X0, Y0),
        sp(Y0, Z0), sp(Y0, Z1),
        sp(Y0, X0), sp(Y0, Y0),
    ]
};

impl StatePair {
    pub fn index(&self) -> usize {
        STATE_PAIRS.iter().position(|p| p == self).expect("all 16 pairs are listed")
    }

    pub fn is_zz(&self) -> bool {
        self.a.is_z() && self.b.is_z()
    }

    /// ZZ pair whose bits agree, i.e. an error event under the singlet.
    pub fn is_zz_error(&self) -> bool {
        self.is_zz() && self.a.z_bit() == self.b.z_bit()
    }
}

impl std::fmt::Display for StatePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

/// Joint yields per state pair, including the emission probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldTable(pub [f64; 16]);

impl YieldTable {
    pub fn get(&self, pair: StatePair) -> f64 {
        self.0[pair.index()]
    }
}

fn clamp_yield(y: f64, what: &dyn std::fmt::Display) -> Result<f64, Error> {
    if y < -NEG_YIELD_TOL {
        return Err(Error::InconsistentModel(format!("negative yield {y:e} for {what}")));
    }
    Ok(y.max(0.0))
}

pub fn sps_yields(
    ea: &PreparedEnsemble,
    eb: &PreparedEnsemble,
    q: &TransferRates,
) -> Result<YieldTable, Error> {
    let mut out = [0.0; 16];
    for (slot, pair) in out.iter_mut().zip(STATE_PAIRS.iter()) {
        let w = ea.prob(pair.a) * eb.prob(pair.b);
        let y = w * q.dot(&pauli_row(ea.actual(pair.a), eb.actual(pair.b)));
        *slot = clamp_yield(y, pair)?;
    }
    Ok(YieldTable(out))
}

/// Intensity slot of the three-intensity decoy scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Signal,
    Decoy,
    Vacuum,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Signal, Level::Decoy, Level::Vacuum];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Joint gains per (state pair, Alice level, Bob level).
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    /// Mean photon numbers `[μ, ν, 0]`.
    pub intensities: [f64; 3],
    /// State-choice probability `P_a P_b` folded into each pair's gains.
    weights: [f64; 16],
    gains: [[[f64; 3]; 3]; 16],
}

impl GainTable {
    pub fn from_raw(intensities: [f64; 3], weights: [f64; 16], gains: [[[f64; 3]; 3]; 16]) -> Self {
        Self { intensities, weights, gains }
    }

    pub fn weight(&self, pair: StatePair) -> f64 {
        self.weights[pair.index()]
    }

    pub fn get(&self, pair: StatePair, la: Level, lb: Level) -> f64 {
        self.gains[pair.index()][la.index()][lb.index()]
    }

    pub fn pair_grid(&self, pair: StatePair) -> &[[f64; 3]; 3] {
        &self.gains[pair.index()]
    }

    pub fn set(&mut self, pair: StatePair, la: Level, lb: Level, value: f64) {
        self.gains[pair.index()][la.index()][lb.index()] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (StatePair, Level, Level, f64)> + '_ {
        STATE_PAIRS.iter().flat_map(move |&p| {
            Level::ALL.iter().flat_map(move |&la| {
                Level::ALL.iter().map(move |&lb| (p, la, lb, self.get(p, la, lb)))
            })
        })
    }

    /// CSV dump: `pair,alice_level,bob_level,gain`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("pair,alice_intensity,bob_intensity,gain\n");
        for (p, la, lb, g) in self.iter() {
            s.push_str(&format!(
                "{p},{:.11e},{:.11e},{g:.11e}\n",
                self.intensities[la.index()],
                self.intensities[lb.index()]
            ));
        }
        s
    }
}

/// Conditional yield of the photon-number pair `(n, m)` for a state pair;
/// the `(1, 1)` term coincides with the single-pair operator model.
pub fn photon_number_yield(
    m: &MeasurementModel,
    a: &BlochState,
    b: &BlochState,
    n: usize,
    mm: usize,
) -> f64 {
    m.coincidence().yield_nm(n, mm, a, b)
}

pub fn wcs_gains(
    ea: &PreparedEnsemble,
    eb: &PreparedEnsemble,
    m: &MeasurementModel,
    mu: f64,
    nu: f64,
    n_cut: usize,
) -> Result<GainTable, Error> {
    m.validate()?;
    if !(mu.is_finite() && nu.is_finite()) || nu < 0.0 || mu <= nu {
        return Err(Error::Domain(format!("intensities must satisfy mu > nu >= 0 (mu={mu}, nu={nu})")));
    }
    if n_cut < 2 {
        return Err(Error::Domain(format!("n_cut = {n_cut} must be at least 2")));
    }
    let levels = [mu, nu, 0.0];
    let q = transfer_rates(&effective_operator(m))?;
    let model = m.coincidence();
    let pois: Vec<Vec<f64>> =
        levels.iter().map(|&l| (0..=n_cut).map(|n| poisson_pmf(l, n)).collect()).collect();

    let mut gains = [[[0.0; 3]; 3]; 16];
    let weights = STATE_PAIRS.map(|p| ea.prob(p.a) * eb.prob(p.b));
    for (slot, pair) in gains.iter_mut().zip(STATE_PAIRS.iter()) {
        let (sa, sb) = (ea.actual(pair.a), eb.actual(pair.b));
        let mut ynm = vec![vec![0.0; n_cut + 1]; n_cut + 1];
        for (n, row) in ynm.iter_mut().enumerate() {
            for (k, y) in row.iter_mut().enumerate() {
                *y = if n == 1 && k == 1 {
                    q.dot(&pauli_row(sa, sb)).max(0.0)
                } else {
                    model.yield_nm(n, k, sa, sb)
                };
            }
        }
        let w = weights[pair.index()];
        for la in 0..3 {
            for lb in 0..3 {
                let mut acc = 0.0;
                for n in 0..=n_cut {
                    for k in 0..=n_cut {
                        acc += pois[la][n] * pois[lb][k] * ynm[n][k];
                    }
                }
                slot[la][lb] = w * acc;
            }
        }
    }
    Ok(GainTable { intensities: levels, weights, gains })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::FlawParams;

    fn lossless() -> MeasurementModel {
        MeasurementModel { eta_det: 1.0, dark: 0.0, loss_coeff: 0.2, dist_a: 0.0, dist_b: 0.0 }
    }

    #[test]
    fn operator_limits() {
        let d = effective_operator(&lossless());
        assert!(d.max_abs_diff(&singlet_projector()) < 1e-15);
        let off = MeasurementModel { eta_det: 0.0, ..lossless() };
        assert!(effective_operator(&off).max_abs_diff(&HermOp4::zero()) < 1e-15);
    }

    #[test]
    fn operator_scalars_at_100km() {
        let m = MeasurementModel { eta_det: 0.145, dark: 6.02e-6, loss_coeff: 0.2, dist_a: 50.0, dist_b: 50.0 };
        // 0.2 dB/km over 50 km is 10 dB per arm.
        let t = 0.145 * 0.1;
        assert!((m.t_a() - t).abs() < 1e-15);
        let d = 6.02e-6f64;
        let keep = (1.0 - d) * (1.0 - d);
        assert!((m.singlet_weight() - t * t * keep).abs() < 1e-18);
        let y0 = (1.0 - t) * (1.0 - t) * 2.0 * d * d * keep + 2.0 * t * (1.0 - t) * d * keep + t * t * keep * d / 4.0;
        assert!((m.background() - y0).abs() < 1e-20);
        let op = effective_operator(&m);
        let v = op.matrix()[(1, 1)].re;
        assert!((v - (t * t * keep / 2.0 + y0)).abs() < 1e-18);
    }

    #[test]
    fn singlet_rates() {
        let q = transfer_rates(&singlet_projector()).unwrap();
        for (i, v) in q.0.iter().enumerate() {
            let want = match i {
                0 => 0.25,
                5 | 10 | 15 => -0.25,
                _ => 0.0,
            };
            assert!((v - want).abs() < 1e-15, "entry {}", TransferRates::LABELS[i]);
        }
        let q_id = transfer_rates(&HermOp4::identity()).unwrap();
        assert_eq!(q_id.0[0], 1.0);
        assert!(q_id.0[1..].iter().all(|v| v.abs() < 1e-15));
        let half = transfer_rates(&singlet_projector().scale(0.5)).unwrap();
        for (h, f) in half.0.iter().zip(q.0.iter()) {
            assert!((h - 0.5 * f).abs() < 1e-15);
        }
        assert!(q.operator().max_abs_diff(&singlet_projector()) < 1e-15);
    }

    #[test]
    fn rejects_non_psd() {
        let bad = singlet_projector().scale(-1.0);
        assert!(matches!(transfer_rates(&bad), Err(Error::InvalidChannel(_))));
    }

    #[test]
    fn ideal_singlet_yields() {
        let e = PreparedEnsemble::new(FlawParams::ideal()).unwrap();
        let q = transfer_rates(&singlet_projector()).unwrap();
        let y = sps_yields(&e, &e, &q).unwrap();
        use StateLabel::*;
        assert!((y.get(sp(Z0, Z1)) - 1.0 / 32.0).abs() < 1e-15);
        assert!(y.get(sp(Z0, Z0)).abs() < 1e-15);
        assert!(y.get(sp(X0, X0)).abs() < 1e-15);
        assert!((y.get(sp(X0, Y0)) - 1.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn pair_indices_round_trip() {
        for (i, p) in STATE_PAIRS.iter().enumerate() {
            assert_eq!(p.index(), i);
        }
        assert_eq!(STATE_PAIRS.iter().filter(|p| p.is_zz_error()).count(), 2);
    }

    #[test]
    fn wcs_single_pair_component() {
        let e = PreparedEnsemble::new(FlawParams::ideal()).unwrap();
        let mu = 0.4;
        let m = MeasurementModel { eta_det: 0.145, dark: 0.0, ..lossless() };
        let eta: f64 = 0.145;
        let z1 = BlochState::pure(0.0, 0.0, 1.0);
        let z2 = BlochState::pure(0.0, 0.0, -1.0);
        let y11 = photon_number_yield(&m, &z1, &z2, 1, 1);
        assert!((y11 - eta * eta / 2.0).abs() < 1e-15);
        let p1 = poisson_pmf(mu, 1);
        let contribution = p1 * p1 * (1.0 / 16.0) * y11;
        assert!((contribution - p1 * p1 / 16.0 * eta * eta * 0.5).abs() < 1e-18);
        let g = wcs_gains(&e, &e, &m, mu, 0.1, 8).unwrap();
        assert!(g.get(sp(StateLabel::Z0, StateLabel::Z1), Level::Signal, Level::Signal) > contribution);
    }

    #[test]
    fn vacuum_without_dark_counts_is_silent() {
        let e = PreparedEnsemble::new(FlawParams::uniform(0.063)).unwrap();
        let m = MeasurementModel { dark: 0.0, ..MeasurementModel::symmetric(50.0) };
        let g = wcs_gains(&e, &e, &m, 0.5, 0.1, 8).unwrap();
        for p in STATE_PAIRS {
            assert_eq!(g.get(p, Level::Vacuum, Level::Vacuum), 0.0);
        }
    }

    #[test]
    fn wcs_rejects_bad_intensities() {
        let e = PreparedEnsemble::new(FlawParams::ideal()).unwrap();
        let m = MeasurementModel::default();
        assert!(matches!(wcs_gains(&e, &e, &m, 0.1, 0.2, 8), Err(Error::Domain(_))));
        assert!(matches!(wcs_gains(&e, &e, &m, 0.5, -0.1, 8), Err(Error::Domain(_))));
        assert!(matches!(wcs_gains(&e, &e, &m, 0.5, 0.1, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn poisson_and_binomial_normalize() {
        let s: f64 = (0..40).map(|n| poisson_pmf(0.7, n)).sum();
        assert!((s - 1.0).abs() < 1e-14);
        let b: f64 = binomial_pmf(7, 0.3).iter().sum();
        assert!((b - 1.0).abs() < 1e-14);
        assert_eq!(poisson_pmf(0.0, 0), 1.0);
        assert_eq!(poisson_pmf(0.0, 3), 0.0);
    }
}
