//! Interference channel models and antenna selection.
//!
//! Three models share the same array manifold:
//!
//! * [`LosScenario`]: single-antenna transmitters, one line-of-sight
//!   direction per transmitter/receiver pair,
//! * [`MultipathScenario`]: single-antenna transmitters with a finite set of
//!   specular reflections per link,
//! * [`MimoScenario`]: ray-based MIMO links `H = sum_l g_l a_R(theta_l)
//!   a_T(psi_l)^T`.
//!
//! A [`SelectionMatrix`] routes a sorted subset of array elements into the
//! receive (or transmit) chains.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::array_manifold::{
    element_phase, full_steering_vector, steering_vector, Direction, SteeringVector, UlaGeometry,
};
use crate::error::{Error, Result};
use crate::linalg::{cis, CMatrix, CVector};
use crate::nulling::SparseBeamformer;

/// 0/1 selection of `len()` antennas out of `num_elements`, one nonzero per
/// column, stored as the sorted list of selected indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectionMatrix {
    support: Vec<usize>,
    num_elements: usize,
}

impl SelectionMatrix {
    pub fn new(support: Vec<usize>, num_elements: usize) -> Result<Self> {
        let Some(&last) = support.last() else {
            return Err(Error::EmptySupport);
        };
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedSupport);
        }
        if last >= num_elements {
            return Err(Error::IndexOutOfRange {
                index: last,
                len: num_elements,
            });
        }
        Ok(Self {
            support,
            num_elements,
        })
    }

    pub fn identity(num_elements: usize) -> Self {
        Self {
            support: (0..num_elements).collect(),
            num_elements,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    /// `S^H v`: the selected entries of a full-array vector.
    pub fn apply(&self, v: &CVector) -> Result<CVector> {
        if v.len() != self.num_elements {
            return Err(Error::InvalidArgument(format!(
                "vector of length {} does not match {} array elements",
                v.len(),
                self.num_elements
            )));
        }
        Ok(CVector::from_iterator(
            self.len(),
            self.support.iter().map(|&n| v[n]),
        ))
    }

    /// Selection applied after `self`: picks positions of `inner` out of the
    /// already selected antennas.
    pub fn then(&self, inner: &SelectionMatrix) -> Result<SelectionMatrix> {
        if inner.num_elements != self.len() {
            return Err(Error::InvalidArgument(format!(
                "inner selection expects {} inputs, outer provides {}",
                inner.num_elements,
                self.len()
            )));
        }
        Ok(SelectionMatrix {
            support: inner.support.iter().map(|&k| self.support[k]).collect(),
            num_elements: self.num_elements,
        })
    }

    /// Dense `num_elements x len` 0/1 matrix.
    pub fn to_matrix(&self) -> CMatrix {
        let mut s = CMatrix::zeros(self.num_elements, self.len());
        for (col, &row) in self.support.iter().enumerate() {
            s[(row, col)] = Complex64::new(1.0, 0.0);
        }
        s
    }
}

fn check_user(index: usize, users: usize) -> Result<()> {
    if index >= users {
        Err(Error::UserOutOfRange { index, users })
    } else {
        Ok(())
    }
}

/// K-user line-of-sight interference channel with single-antenna
/// transmitters. `doa[i][j]` is the direction of transmitter `j` seen from
/// receiver `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosScenario {
    doa: Vec<Vec<Direction>>,
    power: Vec<f64>,
    noise_var: f64,
    power_cap: f64,
}

impl LosScenario {
    pub fn new(
        doa: Vec<Vec<Direction>>,
        power: Vec<f64>,
        noise_var: f64,
        power_cap: f64,
    ) -> Result<Self> {
        let k = doa.len();
        if k == 0 {
            return Err(Error::InvalidArgument("scenario needs at least one user".into()));
        }
        if doa.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidArgument("direction table must be K x K".into()));
        }
        if power.len() != k {
            return Err(Error::InvalidArgument(format!(
                "expected {k} transmit powers, got {}",
                power.len()
            )));
        }
        if let Some(p) = power.iter().find(|&&p| !(p >= 0.0 && p <= power_cap)) {
            return Err(Error::InvalidArgument(format!(
                "transmit power {p} outside [0, {power_cap}]"
            )));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        Ok(Self {
            doa,
            power,
            noise_var,
            power_cap,
        })
    }

    /// Scenario in which receiver `rx` sees the given directions and every
    /// other receiver sees the same row.
    pub fn from_receiver_view(doas: Vec<Direction>, power: Vec<f64>, noise_var: f64) -> Result<Self> {
        let cap = power.iter().copied().fold(0.0, f64::max);
        let doa = vec![doas.clone(); doas.len()];
        Self::new(doa, power, noise_var, cap)
    }

    pub fn num_users(&self) -> usize {
        self.doa.len()
    }

    pub fn doa(&self, rx: usize, tx: usize) -> Direction {
        self.doa[rx][tx]
    }

    pub fn doas_at(&self, rx: usize) -> &[Direction] {
        &self.doa[rx]
    }

    pub fn power(&self, user: usize) -> f64 {
        self.power[user]
    }

    pub fn powers(&self) -> &[f64] {
        &self.power
    }

    pub fn power_cap(&self) -> f64 {
        self.power_cap
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        Self::new(self.doa.clone(), self.power.clone(), noise_var, self.power_cap)
    }

    /// Same powers and noise, directions replaced row by row.
    pub fn with_doas(&self, doa: Vec<Vec<Direction>>) -> Result<Self> {
        Self::new(doa, self.power.clone(), self.noise_var, self.power_cap)
    }

    pub(crate) fn check_user(&self, user: usize) -> Result<()> {
        check_user(user, self.num_users())
    }
}

/// 2x1 (or r x 1) line-of-sight channel from transmitter `tx` to receiver
/// `rx` on the selected antennas.
pub fn los_channel_vector(
    scenario: &LosScenario,
    rx_user: usize,
    tx_user: usize,
    support: &SelectionMatrix,
    geometry: &UlaGeometry,
) -> Result<SteeringVector> {
    scenario.check_user(rx_user)?;
    scenario.check_user(tx_user)?;
    steering_vector(geometry, support.indices(), scenario.doa(rx_user, tx_user))
}

/// One specular path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub gain: Complex64,
    pub doa: Direction,
    pub dod: Direction,
    /// Propagation delay in seconds.
    pub delay: f64,
}

impl PathSpec {
    /// Gain with the carrier phase of the delay folded in.
    pub fn phased_gain(&self, carrier_hz: f64) -> Complex64 {
        self.gain * cis(TAU * (carrier_hz * self.delay).fract())
    }
}

fn check_path_order(paths: &[PathSpec]) -> Result<()> {
    if paths.iter().any(|p| !(p.gain.re.is_finite() && p.gain.im.is_finite())) {
        return Err(Error::InvalidArgument("path gains must be finite".into()));
    }
    if paths.iter().any(|p| !(p.delay >= 0.0)) {
        return Err(Error::InvalidArgument("path delays must be non-negative".into()));
    }
    if paths
        .windows(2)
        .any(|w| w[0].gain.norm() < w[1].gain.norm() * (1.0 - 1e-12))
    {
        return Err(Error::InvalidArgument(
            "desired path magnitudes must be non-increasing".into(),
        ));
    }
    Ok(())
}

/// Specular multipath interference channel with single-antenna transmitters.
/// Only direction of arrival and gain matter; the departure direction is
/// carried for uniformity with the MIMO model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipathScenario {
    paths: Vec<Vec<Vec<PathSpec>>>,
    power: Vec<f64>,
    noise_var: f64,
}

impl MultipathScenario {
    pub fn new(paths: Vec<Vec<Vec<PathSpec>>>, power: Vec<f64>, noise_var: f64) -> Result<Self> {
        let k = paths.len();
        if k == 0 || paths.iter().any(|row| row.len() != k) || power.len() != k {
            return Err(Error::InvalidArgument(
                "multipath scenario needs a K x K path table and K powers".into(),
            ));
        }
        for (i, row) in paths.iter().enumerate() {
            check_path_order(&row[i])?;
        }
        if !(noise_var > 0.0) {
            return Err(Error::InvalidArgument("noise variance must be positive".into()));
        }
        Ok(Self {
            paths,
            power,
            noise_var,
        })
    }

    pub fn num_users(&self) -> usize {
        self.paths.len()
    }

    pub fn paths(&self, rx: usize, tx: usize) -> &[PathSpec] {
        &self.paths[rx][tx]
    }

    pub fn power(&self, user: usize) -> f64 {
        self.power[user]
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
}

/// Residual interference power `sum_{k != i} P_k sum_l |w^H a(theta_kl)|^2
/// |g_kl|^2` left after beamforming with `w` at receiver `rx_user`.
pub fn residual_interference_power(
    scenario: &MultipathScenario,
    rx_user: usize,
    w: &SparseBeamformer,
    geometry: &UlaGeometry,
) -> Result<f64> {
    check_user(rx_user, scenario.num_users())?;
    geometry.check_support(w.support())?;
    let mut total = 0.0;
    for k in (0..scenario.num_users()).filter(|&k| k != rx_user) {
        let mut per_user = 0.0;
        for path in scenario.paths(rx_user, k) {
            let a = steering_vector(geometry, w.support(), path.doa)?;
            per_user += w.weights().dotc(a.entries()).norm_sqr() * path.gain.norm_sqr();
        }
        total += scenario.power(k) * per_user;
    }
    Ok(total)
}

/// Ray-based MIMO interference channel. Transmitter `j` drives
/// `tx_geometry[j].num_elements()` antennas, one stream per antenna, and
/// splits its power equally across streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimoScenario {
    rx_geometry: UlaGeometry,
    tx_geometry: Vec<UlaGeometry>,
    rx_chains: usize,
    paths: Vec<Vec<Vec<PathSpec>>>,
    power: Vec<f64>,
    noise_var: f64,
    carrier_hz: f64,
}

impl MimoScenario {
    pub fn new(
        rx_geometry: UlaGeometry,
        tx_geometry: Vec<UlaGeometry>,
        rx_chains: usize,
        paths: Vec<Vec<Vec<PathSpec>>>,
        power: Vec<f64>,
        noise_var: f64,
        carrier_hz: f64,
    ) -> Result<Self> {
        let k = tx_geometry.len();
        if k == 0 || paths.len() != k || paths.iter().any(|row| row.len() != k) || power.len() != k
        {
            return Err(Error::InvalidArgument(
                "MIMO scenario needs K transmit arrays, a K x K path table and K powers".into(),
            ));
        }
        if rx_chains == 0 || rx_chains > rx_geometry.num_elements() {
            return Err(Error::InvalidArgument(format!(
                "{rx_chains} receive chains cannot be fed from {} antennas",
                rx_geometry.num_elements()
            )));
        }
        for (i, row) in paths.iter().enumerate() {
            check_path_order(&row[i])?;
        }
        if power.iter().any(|&p| !(p >= 0.0)) || !(noise_var > 0.0) || !(carrier_hz > 0.0) {
            return Err(Error::InvalidArgument(
                "powers must be non-negative, noise variance and carrier positive".into(),
            ));
        }
        Ok(Self {
            rx_geometry,
            tx_geometry,
            rx_chains,
            paths,
            power,
            noise_var,
            carrier_hz,
        })
    }

    pub fn num_users(&self) -> usize {
        self.tx_geometry.len()
    }

    pub fn rx_geometry(&self) -> &UlaGeometry {
        &self.rx_geometry
    }

    pub fn tx_geometry(&self, user: usize) -> &UlaGeometry {
        &self.tx_geometry[user]
    }

    /// Number of streams (= transmit antennas) of `user`.
    pub fn streams(&self, user: usize) -> usize {
        self.tx_geometry[user].num_elements()
    }

    pub fn rx_chains(&self) -> usize {
        self.rx_chains
    }

    pub fn paths(&self, rx: usize, tx: usize) -> &[PathSpec] {
        &self.paths[rx][tx]
    }

    pub fn power(&self, user: usize) -> f64 {
        self.power[user]
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        let mut s = self.clone();
        if !(noise_var > 0.0) {
            return Err(Error::InvalidArgument("noise variance must be positive".into()));
        }
        s.noise_var = noise_var;
        Ok(s)
    }

    pub(crate) fn check_user(&self, user: usize) -> Result<()> {
        check_user(user, self.num_users())
    }
}

/// `sum_l g_l a_R(theta_l)[rx] a_T(psi_l)[tx]^T` (plain transpose), an
/// `r x t` matrix. Delay phases are not applied.
pub fn mimo_channel_matrix(
    scenario: &MimoScenario,
    rx_user: usize,
    tx_user: usize,
    rx_support: &SelectionMatrix,
    tx_support: &SelectionMatrix,
) -> Result<CMatrix> {
    scenario.check_user(rx_user)?;
    scenario.check_user(tx_user)?;
    let paths = scenario.paths(rx_user, tx_user);
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no paths from transmitter {tx_user} to receiver {rx_user}"
        )));
    }
    let rx_geom = scenario.rx_geometry();
    let tx_geom = scenario.tx_geometry(tx_user);
    let mut h = CMatrix::zeros(rx_support.len(), tx_support.len());
    for path in paths {
        let a_r = steering_vector(rx_geom, rx_support.indices(), path.doa)?;
        let a_t = steering_vector(tx_geom, tx_support.indices(), path.dod)?;
        h += a_r.entries() * a_t.entries().transpose() * path.gain;
    }
    Ok(h)
}

/// Narrowband channel seen by stream `m` of transmitter `tx_user`:
/// `sum_l g_l exp(j 2 pi f_c tau_l) a(theta_l)[rx] a_m(psi_l)`.
///
/// The receive phase reference is array element 0 (not the first selected
/// element), so vectors for different supports are mutually consistent.
pub fn effective_stream_channel(
    scenario: &MimoScenario,
    rx_user: usize,
    tx_user: usize,
    stream: usize,
    rx_support: &SelectionMatrix,
) -> Result<CVector> {
    let full = effective_stream_channel_full(scenario, rx_user, tx_user, stream)?;
    rx_support.apply(&full)
}

pub(crate) fn effective_stream_channel_full(
    scenario: &MimoScenario,
    rx_user: usize,
    tx_user: usize,
    stream: usize,
) -> Result<CVector> {
    scenario.check_user(rx_user)?;
    scenario.check_user(tx_user)?;
    let t = scenario.streams(tx_user);
    if stream >= t {
        return Err(Error::InvalidArgument(format!(
            "stream {stream} out of range for a transmitter with {t} streams"
        )));
    }
    let rx_geom = scenario.rx_geometry();
    let tx_pos = scenario.tx_geometry(tx_user).position_wl(stream);
    let mut h = CVector::zeros(rx_geom.num_elements());
    for path in scenario.paths(rx_user, tx_user) {
        let coeff = path.phased_gain(scenario.carrier_hz()) * cis(element_phase(tx_pos, path.dod.cos()));
        h += full_steering_vector(rx_geom, path.doa).into_inner() * coeff;
    }
    Ok(h)
}

/// Statistics of sampled path gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathGainModel {
    /// Unit magnitude, uniform phase: every path received with equal power.
    #[default]
    UnitModulus,
    /// Circularly-symmetric complex Gaussian with unit variance.
    Rayleigh,
}

/// Direction drawn uniformly from the open interval `(0, pi)`.
pub fn sample_direction<R: Rng + ?Sized>(rng: &mut R) -> Direction {
    loop {
        let theta = rng.random::<f64>() * PI;
        if let Ok(d) = Direction::new(theta) {
            return d;
        }
    }
}

pub fn sample_path_gain<R: Rng + ?Sized>(rng: &mut R, model: PathGainModel) -> Complex64 {
    match model {
        PathGainModel::UnitModulus => cis(TAU * rng.random::<f64>()),
        PathGainModel::Rayleigh => {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        }
    }
}

/// `count` random paths with uniform DoA/DoD and delays uniform in
/// `[0, 100 / f_c]`, sorted by non-increasing gain magnitude.
pub fn sample_paths<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    model: PathGainModel,
    carrier_hz: f64,
) -> Vec<PathSpec> {
    let mut paths: Vec<PathSpec> = (0..count)
        .map(|_| PathSpec {
            gain: sample_path_gain(rng, model),
            doa: sample_direction(rng),
            dod: sample_direction(rng),
            delay: rng.random::<f64>() * 100.0 / carrier_hz,
        })
        .collect();
    paths.sort_by(|a, b| b.gain.norm().total_cmp(&a.gain.norm()));
    paths
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nulling::SparseBeamformer;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dir(deg: f64) -> Direction {
        Direction::from_degrees(deg).unwrap()
    }

    fn los(doas: &[f64]) -> LosScenario {
        let row: Vec<Direction> = doas.iter().map(|&d| dir(d)).collect();
        LosScenario::from_receiver_view(row, vec![1.0; doas.len()], 1.0).unwrap()
    }

    #[test]
    fn selection_validation_and_matrix() {
        assert!(SelectionMatrix::new(vec![], 4).is_err());
        assert!(SelectionMatrix::new(vec![1, 1], 4).is_err());
        assert!(SelectionMatrix::new(vec![0, 4], 4).is_err());
        let s = SelectionMatrix::new(vec![0, 2], 4).unwrap();
        let m = s.to_matrix();
        assert_eq!(m.shape(), (4, 2));
        assert_eq!(m[(2, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(m.iter().filter(|z| z.norm() > 0.0).count(), 2);
    }

    #[test]
    fn selection_then_identity_is_unchanged() {
        let s = SelectionMatrix::new(vec![1, 3, 6], 8).unwrap();
        let composed = s.then(&SelectionMatrix::identity(3)).unwrap();
        assert_eq!(composed, s);
        let v = CVector::from_fn(8, |i, _| Complex64::new(i as f64, -(i as f64)));
        let once = s.apply(&v).unwrap();
        let twice = SelectionMatrix::identity(3).apply(&once).unwrap();
        assert_eq!(once, twice);
        let inner = SelectionMatrix::new(vec![0, 2], 3).unwrap();
        assert_eq!(s.then(&inner).unwrap().indices(), &[1, 6]);
    }

    #[test]
    fn los_vector_examples() {
        let g = UlaGeometry::half_wavelength(8).unwrap();
        let sc = los(&[90.0, 60.0]);
        let s = SelectionMatrix::new(vec![0, 5], 8).unwrap();
        let h = los_channel_vector(&sc, 0, 0, &s, &g).unwrap();
        assert!(h.entries().iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        let s = SelectionMatrix::new(vec![0, 2], 8).unwrap();
        let h = los_channel_vector(&sc, 0, 1, &s, &g).unwrap();
        assert!((h.entries()[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        assert!(los_channel_vector(&sc, 0, 2, &s, &g).is_err());
    }

    #[test]
    fn los_vector_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = UlaGeometry::new(40, 0.5).unwrap();
        for _ in 0..50 {
            let doas: Vec<Direction> = (0..4).map(|_| sample_direction(&mut rng)).collect();
            let sc = LosScenario::from_receiver_view(doas.clone(), vec![1.0; 4], 1.0).unwrap();
            let a = rng.random_range(0..20usize);
            let b = rng.random_range(20..40usize);
            let s = SelectionMatrix::new(vec![a, b], 40).unwrap();
            let tx = rng.random_range(0..4usize);
            let h = los_channel_vector(&sc, 0, tx, &s, &g).unwrap();
            let direct = Complex64::from_polar(
                1.0,
                2.0 * PI * (b - a) as f64 * 0.5 * doas[tx].theta().cos(),
            );
            assert!((h.entries()[1] - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn los_scenario_validation() {
        let d = vec![vec![dir(30.0)]];
        assert!(LosScenario::new(d.clone(), vec![2.0], 1.0, 1.0).is_err());
        assert!(LosScenario::new(d.clone(), vec![1.0], 0.0, 1.0).is_err());
        assert!(LosScenario::new(vec![vec![dir(30.0)], vec![dir(40.0)]], vec![1.0; 2], 1.0, 1.0).is_err());
    }

    fn single_path(gain: Complex64, doa: f64, dod: f64, delay: f64) -> PathSpec {
        PathSpec {
            gain,
            doa: Direction::new(doa).unwrap(),
            dod: Direction::new(dod).unwrap(),
            delay,
        }
    }

    fn mimo_one_link(paths: Vec<PathSpec>, n_r: usize, t: usize, fc: f64) -> MimoScenario {
        MimoScenario::new(
            UlaGeometry::half_wavelength(n_r).unwrap(),
            vec![UlaGeometry::half_wavelength(t).unwrap()],
            t + 1,
            vec![vec![paths]],
            vec![1.0],
            1.0,
            fc,
        )
        .unwrap()
    }

    #[test]
    fn single_broadside_path_is_all_ones() {
        let one = Complex64::new(1.0, 0.0);
        let sc = mimo_one_link(vec![single_path(one, PI / 2.0, PI / 2.0, 0.0)], 6, 2, 1e9);
        let rx = SelectionMatrix::new(vec![0, 2, 5], 6).unwrap();
        let tx = SelectionMatrix::identity(2);
        let h = mimo_channel_matrix(&sc, 0, 0, &rx, &tx).unwrap();
        assert_eq!(h.shape(), (3, 2));
        assert!(h.iter().all(|z| (z - one).norm() < 1e-12));
    }

    #[test]
    fn zero_gain_path_changes_nothing() {
        let one = Complex64::new(1.0, 0.0);
        let p1 = single_path(one, 1.0, 2.0, 0.0);
        let p2 = single_path(Complex64::new(0.0, 0.0), 0.4, 0.3, 0.0);
        let a = mimo_one_link(vec![p1], 6, 2, 1e9);
        let b = mimo_one_link(vec![p1, p2], 6, 2, 1e9);
        let rx = SelectionMatrix::new(vec![0, 2, 5], 6).unwrap();
        let tx = SelectionMatrix::identity(2);
        let ha = mimo_channel_matrix(&a, 0, 0, &rx, &tx).unwrap();
        let hb = mimo_channel_matrix(&b, 0, 0, &rx, &tx).unwrap();
        assert!((ha - hb).norm() < 1e-12);
    }

    #[test]
    fn three_path_channel_has_rank_at_most_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let paths = sample_paths(&mut rng, 3, PathGainModel::Rayleigh, 1e9);
        let sc = MimoScenario::new(
            UlaGeometry::half_wavelength(8).unwrap(),
            vec![UlaGeometry::half_wavelength(6).unwrap()],
            6,
            vec![vec![paths]],
            vec![1.0],
            1.0,
            1e9,
        )
        .unwrap();
        let h = mimo_channel_matrix(
            &sc,
            0,
            0,
            &SelectionMatrix::identity(8),
            &SelectionMatrix::identity(6),
        )
        .unwrap();
        let sv = h.singular_values();
        let mut sorted: Vec<f64> = sv.iter().copied().collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        assert!(sorted[2] > 1e-6);
        assert!(sorted[3..].iter().all(|&s| s < 1e-10));
    }

    #[test]
    fn empty_path_list_is_an_error() {
        let sc = MimoScenario::new(
            UlaGeometry::half_wavelength(4).unwrap(),
            vec![UlaGeometry::half_wavelength(2).unwrap(); 2],
            3,
            vec![vec![vec![], vec![]], vec![vec![], vec![]]],
            vec![1.0; 2],
            1.0,
            1e9,
        )
        .unwrap();
        let r = mimo_channel_matrix(
            &sc,
            0,
            1,
            &SelectionMatrix::identity(4),
            &SelectionMatrix::identity(2),
        );
        assert!(r.is_err());
    }

    #[test]
    fn stream_channel_examples() {
        let one = Complex64::new(1.0, 0.0);
        let fc = 2.4e9;
        let theta = 1.1;
        let sc = mimo_one_link(vec![single_path(one, theta, 0.7, 0.0)], 6, 2, fc);
        let rx = SelectionMatrix::new(vec![0, 3], 6).unwrap();
        let h = effective_stream_channel(&sc, 0, 0, 0, &rx).unwrap();
        let a = steering_vector(sc.rx_geometry(), &[0, 3], Direction::new(theta).unwrap()).unwrap();
        assert!((h - a.entries()).norm() < 1e-12);

        let delayed = mimo_one_link(vec![single_path(one, theta, 0.7, 1.0 / fc)], 6, 2, fc);
        let hd = effective_stream_channel(&delayed, 0, 0, 0, &rx).unwrap();
        assert!((hd - a.entries()).norm() < 1e-9);

        assert!(effective_stream_channel(&sc, 0, 0, 2, &rx).is_err());
    }

    #[test]
    fn stream_channel_is_matrix_column_with_delay_folded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fc = 3.5e9;
        for _ in 0..20 {
            let paths = sample_paths(&mut rng, 2, PathGainModel::UnitModulus, fc);
            let folded: Vec<PathSpec> = paths
                .iter()
                .map(|p| PathSpec {
                    gain: p.phased_gain(fc),
                    delay: 0.0,
                    ..*p
                })
                .collect();
            let sc = mimo_one_link(paths, 10, 2, fc);
            let sc_folded = mimo_one_link(folded, 10, 2, fc);
            let rx = SelectionMatrix::new(vec![0, 4, 9], 10).unwrap();
            let h = mimo_channel_matrix(&sc_folded, 0, 0, &rx, &SelectionMatrix::identity(2)).unwrap();
            for m in 0..2 {
                let col = effective_stream_channel(&sc, 0, 0, m, &rx).unwrap();
                assert!((col - h.column(m)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn path_order_is_enforced() {
        let p = |g: f64| single_path(Complex64::new(g, 0.0), 1.0, 1.0, 0.0);
        let r = MultipathScenario::new(vec![vec![vec![p(0.5), p(1.0)]]], vec![1.0], 1.0);
        assert!(r.is_err());
    }

    fn random_multipath(rng: &mut ChaCha8Rng, k: usize, l: usize) -> MultipathScenario {
        let paths = (0..k)
            .map(|_| (0..k).map(|_| sample_paths(rng, l, PathGainModel::Rayleigh, 1e9)).collect())
            .collect();
        let power = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
        MultipathScenario::new(paths, power, 1.0).unwrap()
    }

    #[test]
    fn residual_without_interferers_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sc = random_multipath(&mut rng, 1, 3);
        let g = UlaGeometry::half_wavelength(10).unwrap();
        let w = SparseBeamformer::pair(4, 0.3);
        assert_eq!(residual_interference_power(&sc, 0, &w, &g).unwrap(), 0.0);
    }

    #[test]
    fn residual_vanishes_when_every_path_is_nulled() {
        // separation 1 wavelength, interferer paths at 60 and 120 degrees
        // (phase pi and -pi), desired at broadside.
        let one = Complex64::new(1.0, 0.0);
        let mk = |deg: f64| PathSpec {
            gain: one,
            doa: dir(deg),
            dod: dir(90.0),
            delay: 0.0,
        };
        let paths = vec![
            vec![vec![mk(90.0)], vec![mk(60.0), mk(120.0)]],
            vec![vec![mk(90.0)], vec![mk(90.0)]],
        ];
        let sc = MultipathScenario::new(paths, vec![1.0, 3.0], 1.0).unwrap();
        let g = UlaGeometry::half_wavelength(4).unwrap();
        let w = SparseBeamformer::pair(2, 0.0);
        assert!(residual_interference_power(&sc, 0, &w, &g).unwrap() < 1e-24);
    }

    #[test]
    fn residual_matches_brute_force_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = UlaGeometry::half_wavelength(30).unwrap();
        for _ in 0..20 {
            let sc = random_multipath(&mut rng, 4, 3);
            let n = rng.random_range(1..30usize);
            let phi = rng.random::<f64>() * TAU;
            let w = SparseBeamformer::pair(n, phi);
            let got = residual_interference_power(&sc, 1, &w, &g).unwrap();
            let d = g.position_wl(n);
            let mut expected = 0.0;
            for k in [0usize, 2, 3] {
                for p in sc.paths(1, k) {
                    // w^H a = 1 + e^{-j phi} e^{j 2 pi d cos}
                    let resp = 1.0 + Complex64::from_polar(1.0, TAU * d * p.doa.cos() - phi);
                    expected += sc.power(k) * p.gain.norm_sqr() * resp.norm_sqr();
                }
            }
            assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }

    proptest! {
        #[test]
        fn residual_bound_holds(seed in 0u64..10_000, n in 1usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sc = random_multipath(&mut rng, 3, 2);
            let g = UlaGeometry::half_wavelength(200).unwrap();
            let w = SparseBeamformer::pair(n, rng.random::<f64>() * TAU).normalized().unwrap();
            let mut max_gain: f64 = 0.0;
            let mut energy = 0.0;
            for k in 1..3 {
                for p in sc.paths(0, k) {
                    let a = steering_vector(&g, w.support(), p.doa).unwrap();
                    max_gain = max_gain.max(w.weights().dotc(a.entries()).norm_sqr());
                    energy += sc.power(k) * p.gain.norm_sqr();
                }
            }
            let delta = max_gain * (1.0 + 1e-9) + 1e-300;
            let residual = residual_interference_power(&sc, 0, &w, &g).unwrap();
            prop_assert!(residual < delta * energy || energy == 0.0);
        }

        #[test]
        fn channel_matrix_is_linear_in_gains(seed in 0u64..10_000, scale_re in -3.0f64..3.0, scale_im in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fc = 1e9;
            let paths = sample_paths(&mut rng, 3, PathGainModel::Rayleigh, fc);
            let scale = Complex64::new(scale_re, scale_im);
            let mut scaled = paths.clone();
            scaled[1].gain *= scale;
            let rx = SelectionMatrix::new(vec![0, 3, 7], 8).unwrap();
            let tx = SelectionMatrix::identity(2);
            let h = |p: Vec<PathSpec>| {
                let sc = MimoScenario::new(
                    UlaGeometry::half_wavelength(8).unwrap(),
                    vec![UlaGeometry::half_wavelength(2).unwrap()],
                    3,
                    vec![vec![p]],
                    vec![1.0],
                    1.0,
                    fc,
                );
                sc.map(|sc| mimo_channel_matrix(&sc, 0, 0, &rx, &tx).unwrap())
            };
            let mut only = paths.clone();
            for (i, p) in only.iter_mut().enumerate() {
                if i != 1 {
                    p.gain = Complex64::new(0.0, 0.0);
                }
            }
            // path order may be violated after scaling; skip such draws
            if let (Ok(base), Ok(sc_h), Ok(single)) = (h(paths.clone()), h(scaled), {
                let mut o = only.clone();
                o.sort_by(|a, b| b.gain.norm().total_cmp(&a.gain.norm()));
                h(o)
            }) {
                let expected = base + single * (scale - Complex64::new(1.0, 0.0));
                prop_assert!((sc_h - expected).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn sampled_paths_are_sorted_and_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let pa = sample_paths(&mut a, 5, PathGainModel::Rayleigh, 1e9);
        let pb = sample_paths(&mut b, 5, PathGainModel::Rayleigh, 1e9);
        assert_eq!(pa, pb);
        assert!(pa.windows(2).all(|w| w[0].gain.norm() >= w[1].gain.norm()));
        assert!(pa.iter().all(|p| p.delay >= 0.0 && p.delay <= 100.0 / 1e9));
    }
}
