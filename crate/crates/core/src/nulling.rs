//! Spacing and antenna-pair selection for interference nulling.
//!
//! Two views of the same problem live here. The number-theoretic one scans
//! integer spacings `d` until the fractional parts of `d cos(theta_k)` land in
//! a target box ([`weyl_box_search`], [`nulling_spacing_search`]). The
//! practical one scores every pair `{0, n}` of a receive array by output SINR
//! and keeps the best ([`pair_selection_search`]).

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_manifold::{full_steering_vector, pair_gain_cos, SteeringVector, UlaGeometry};
use crate::channel::{LosScenario, SelectionMatrix};
use crate::error::{Error, Result};
use crate::linalg::{cis, covariance_on, solve_hpd, CVector};

/// Beamformer supported on a sorted subset of array elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseBeamformer {
    support: Vec<usize>,
    weights: CVector,
}

impl SparseBeamformer {
    pub fn new(support: Vec<usize>, weights: CVector) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptySupport);
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedSupport);
        }
        if support.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for a support of {} antennas",
                weights.len(),
                support.len()
            )));
        }
        Ok(Self { support, weights })
    }

    /// `[1, e^{j phi}]` on antennas `{0, n}`.
    ///
    /// # Panics
    /// If `n == 0`.
    pub fn pair(n: usize, phi: f64) -> Self {
        assert!(n > 0, "pair partner must differ from the reference antenna");
        Self {
            support: vec![0, n],
            weights: CVector::from_vec(vec![Complex64::new(1.0, 0.0), cis(phi)]),
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn weights(&self) -> &CVector {
        &self.weights
    }

    pub fn norm(&self) -> f64 {
        self.weights.norm()
    }

    /// Same direction, unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument("beamformer has zero norm".into()));
        }
        Ok(Self {
            support: self.support.clone(),
            weights: self.weights.unscale(norm),
        })
    }

    /// Full-length weight vector with zeros off the support.
    pub fn to_dense(&self, num_elements: usize) -> Result<CVector> {
        let last = *self.support.last().expect("support is never empty");
        if last >= num_elements {
            return Err(Error::IndexOutOfRange {
                index: last,
                len: num_elements,
            });
        }
        let mut w = CVector::zeros(num_elements);
        for (&n, &z) in self.support.iter().zip(self.weights.iter()) {
            w[n] = z;
        }
        Ok(w)
    }

    /// `w^H h[support]` for a full-array vector `h`.
    pub(crate) fn respond(&self, h: &CVector) -> Complex64 {
        self.support
            .iter()
            .zip(self.weights.iter())
            .map(|(&n, w)| w.conj() * h[n])
            .sum()
    }
}

/// Target region for the fractional parts `frac(d cos theta_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    intervals: Vec<(f64, f64)>,
    epsilon_prime: f64,
}

impl BoxSpec {
    /// Desired coordinate `[0, eps']`, every other coordinate
    /// `[(1 - eps') / 2, (1 + eps') / 2]`, with `eps' = epsilon / (2 pi)`.
    pub fn for_nulling(k: usize, desired: usize, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if desired >= k {
            return Err(Error::UserOutOfRange {
                index: desired,
                users: k,
            });
        }
        let e = epsilon / TAU;
        let intervals = (0..k)
            .map(|j| {
                if j == desired {
                    (0.0, e)
                } else {
                    ((1.0 - e) / 2.0, (1.0 + e) / 2.0)
                }
            })
            .collect();
        Ok(Self {
            intervals,
            epsilon_prime: e,
        })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn epsilon_prime(&self) -> f64 {
        self.epsilon_prime
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.intervals)
                .all(|(&x, &(lo, hi))| x >= lo && x <= hi)
    }

    /// Lebesgue measure of the box.
    pub fn volume(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).product()
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < PI) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, pi), got {epsilon}"
        )));
    }
    Ok(())
}

fn check_cosines(cosines: &[f64], desired: usize) -> Result<()> {
    if cosines.is_empty() {
        return Err(Error::InvalidArgument("no direction cosines given".into()));
    }
    if desired >= cosines.len() {
        return Err(Error::UserOutOfRange {
            index: desired,
            users: cosines.len(),
        });
    }
    if let Some(c) = cosines.iter().find(|c| !(c.abs() < 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "direction cosine {c} outside (-1, 1)"
        )));
    }
    Ok(())
}

fn frac(x: f64) -> f64 {
    let f = x.rem_euclid(1.0);
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Smallest integer `d` in `[1, d_max]` with `frac(d cos theta_desired)`
/// within `eps'` of 0 (wrapping around 1) and every other `frac(d cos
/// theta_k)` within `eps' / 2` of one half.
pub fn weyl_box_search(
    cosines: &[f64],
    desired: usize,
    epsilon: f64,
    d_max: u64,
) -> Result<Option<u64>> {
    check_cosines(cosines, desired)?;
    check_epsilon(epsilon)?;
    let e = epsilon / TAU;
    let (lo, hi) = ((1.0 - e) / 2.0, (1.0 + e) / 2.0);
    Ok((1..=d_max).find(|&d| {
        let d = d as f64;
        cosines.iter().enumerate().all(|(k, &c)| {
            let f = frac(d * c);
            if k == desired {
                f < e || f > 1.0 - e
            } else {
                f > lo && f < hi
            }
        })
    }))
}

/// How the pair phase is chosen by [`nulling_spacing_search`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhasePolicy {
    /// Weights `[1, 1]`.
    Fixed,
    /// Any phase that puts every coordinate inside its gain window.
    CoDesigned,
}

/// Integer spacing and phase meeting the gain thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacingSolution {
    pub spacing_wl: u64,
    pub phase: f64,
}

fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y >= PI {
        y - TAU
    } else {
        y
    }
}

/// Phase (if any) making the desired pair gain exceed `1 - delta` and every
/// interferer pair gain fall below `delta` at spacing `d_wl`.
pub fn feasible_phase(cosines: &[f64], desired: usize, delta: f64, d_wl: f64) -> Option<f64> {
    let a = (1.0 - 2.0 * delta).acos();
    let x0 = TAU * d_wl * cosines[desired];
    let mut lo = -a;
    let mut hi = a;
    for (k, &c) in cosines.iter().enumerate() {
        if k == desired {
            continue;
        }
        let y = wrap_pi(TAU * d_wl * c - x0 - PI);
        lo = lo.max(-a - y);
        hi = hi.min(a - y);
    }
    if lo >= hi {
        return None;
    }
    let phi = wrap_pi((lo + hi) / 2.0 - x0);
    meets_thresholds(cosines, desired, delta, d_wl, phi).then_some(phi)
}

fn meets_thresholds(cosines: &[f64], desired: usize, delta: f64, d_wl: f64, phi: f64) -> bool {
    cosines.iter().enumerate().all(|(k, &c)| {
        let g = pair_gain_cos(d_wl, c, phi);
        if k == desired {
            g > 1.0 - delta
        } else {
            g < delta
        }
    })
}

/// Smallest integer spacing in `[1, d_max]` at which the pair gain of the
/// desired direction exceeds `1 - delta` while every interferer stays below
/// `delta`.
pub fn nulling_spacing_search(
    cosines: &[f64],
    desired: usize,
    delta: f64,
    d_max: u64,
    policy: PhasePolicy,
) -> Result<Option<SpacingSolution>> {
    check_cosines(cosines, desired)?;
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 0.5), got {delta}"
        )));
    }
    Ok((1..=d_max).find_map(|d| {
        let d_wl = d as f64;
        let phase = match policy {
            PhasePolicy::Fixed => meets_thresholds(cosines, desired, delta, d_wl, 0.0).then_some(0.0),
            PhasePolicy::CoDesigned => feasible_phase(cosines, desired, delta, d_wl),
        }?;
        Some(SpacingSolution {
            spacing_wl: d,
            phase,
        })
    }))
}

/// Fraction of `m = 1..=m_max` whose point `frac(m cosines)` lies in `region`.
pub fn box_hit_fraction(cosines: &[f64], region: &BoxSpec, m_max: u64) -> f64 {
    if m_max == 0 || cosines.len() != region.dim() {
        return 0.0;
    }
    let mut point = vec![0.0; cosines.len()];
    let hits = (1..=m_max)
        .filter(|&m| {
            for (p, &c) in point.iter_mut().zip(cosines) {
                *p = frac(m as f64 * c);
            }
            region.contains(&point)
        })
        .count();
    hits as f64 / m_max as f64
}

const DISCREPANCY_CELL_BUDGET: usize = 1_000_000;
const DISCREPANCY_GRID: usize = 8;

/// Star-discrepancy estimate of `frac(m cosines)`, `m = 1..=m_max`.
///
/// Exact in one dimension. In higher dimension the supremum over anchored
/// boxes is taken over corners on a regular grid (at most 8 per axis), which
/// gives a lower bound on the true star discrepancy.
pub fn equidistribution_discrepancy(cosines: &[f64], m_max: u64) -> f64 {
    if cosines.is_empty() || m_max == 0 {
        return 0.0;
    }
    if cosines.len() == 1 {
        let mut xs: Vec<f64> = (1..=m_max).map(|m| frac(m as f64 * cosines[0])).collect();
        xs.sort_by(f64::total_cmp);
        let n = m_max as f64;
        return xs
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max);
    }

    let k = cosines.len();
    let mut g = DISCREPANCY_GRID;
    while g > 2 && g.checked_pow(k as u32).is_none_or(|c| c > DISCREPANCY_CELL_BUDGET) {
        g -= 1;
    }
    let cells = match g.checked_pow(k as u32) {
        Some(c) if c <= DISCREPANCY_CELL_BUDGET => c,
        _ => return f64::NAN,
    };

    let mut counts = vec![0u64; cells];
    for m in 1..=m_max {
        let idx = cosines.iter().fold(0usize, |acc, &c| {
            let cell = ((frac(m as f64 * c) * g as f64) as usize).min(g - 1);
            acc * g + cell
        });
        counts[idx] += 1;
    }
    // Inclusive prefix sums along each axis turn cell counts into counts of
    // anchored boxes [0, (i_1+1)/g) x ... x [0, (i_k+1)/g).
    let mut stride = 1;
    for _ in 0..k {
        for idx in 0..cells {
            if (idx / stride) % g != 0 {
                counts[idx] += counts[idx - stride];
            }
        }
        stride *= g;
    }
    let n = m_max as f64;
    (0..cells)
        .map(|idx| {
            let mut rest = idx;
            let mut volume = 1.0;
            for _ in 0..k {
                volume *= ((rest % g) + 1) as f64 / g as f64;
                rest /= g;
            }
            (counts[idx] as f64 / n - volume).abs()
        })
        .fold(0.0, f64::max)
}

/// Weight choice inside [`pair_selection_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairMode {
    /// `w = [1, e^{j phi}]` with `phi` on a uniform grid of the given step.
    PhaseGrid { step_deg: f64 },
    /// Two-antenna MVDR weights for each pair.
    ClosedForm,
}

/// Which partner antennas are considered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpacingSet {
    /// Every element `n >= 1`.
    #[default]
    AllMultiples,
    /// Only elements whose offset from the reference is a whole wavelength.
    IntegerWavelength,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSearchOptions {
    pub mode: PairMode,
    pub spacing: SpacingSet,
}

impl Default for PairSearchOptions {
    fn default() -> Self {
        Self {
            mode: PairMode::ClosedForm,
            spacing: SpacingSet::AllMultiples,
        }
    }
}

/// Outcome of a pair search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub spacing_wl: f64,
    /// Phase of the partner weight relative to the reference weight.
    pub phase: f64,
    pub antenna: usize,
    pub beamformer: SparseBeamformer,
    pub achieved_sinr: f64,
}

/// Partner antennas allowed by `spacing`.
pub fn candidate_partners(geometry: &UlaGeometry, spacing: SpacingSet) -> Vec<usize> {
    (1..geometry.num_elements())
        .filter(|&n| match spacing {
            SpacingSet::AllMultiples => true,
            SpacingSet::IntegerWavelength => {
                let p = geometry.position_wl(n);
                (p - p.round()).abs() < 1e-9
            }
        })
        .collect()
}

/// Best pair `{0, n}` for the desired channel `desired` (full array) against
/// `interferers`, scored by output SINR. `desired` already includes the
/// desired power through `desired_power`.
///
/// Returns `None` when `partners` is empty.
pub(crate) fn best_pair(
    desired: &CVector,
    desired_power: f64,
    interferers: &[(&CVector, f64)],
    noise_var: f64,
    partners: &[usize],
    mode: PairMode,
) -> Option<(usize, Complex64, f64)> {
    let phases: Vec<f64> = match mode {
        PairMode::PhaseGrid { step_deg } => {
            let steps = (360.0 / step_deg).round().max(1.0) as usize;
            (0..steps).map(|k| (k as f64 * step_deg).to_radians()).collect()
        }
        PairMode::ClosedForm => Vec::new(),
    };
    let scored: Vec<(usize, Complex64, f64)> = partners
        .par_iter()
        .map(|&n| {
            let v = [desired[0], desired[n]];
            let u: Vec<([Complex64; 2], f64)> = interferers
                .iter()
                .map(|(h, p)| ([h[0], h[n]], *p))
                .collect();
            let (w1, sinr) = match mode {
                PairMode::ClosedForm => pair_mvdr(v, &u, desired_power, noise_var),
                PairMode::PhaseGrid { .. } => {
                    let mut best = (Complex64::new(1.0, 0.0), f64::NEG_INFINITY);
                    for &phi in &phases {
                        let w1 = cis(phi);
                        let s = pair_sinr(w1, v, &u, desired_power, noise_var);
                        if s > best.1 {
                            best = (w1, s);
                        }
                    }
                    best
                }
            };
            (n, w1, sinr)
        })
        .collect();
    scored
        .into_iter()
        .fold(None, |best: Option<(usize, Complex64, f64)>, cand| match best {
            Some(b) if b.2 >= cand.2 => Some(b),
            _ => Some(cand),
        })
}

/// SINR of `[1, w1]` on a pair with restricted vectors `v` and `u_j`.
fn pair_sinr(
    w1: Complex64,
    v: [Complex64; 2],
    interferers: &[([Complex64; 2], f64)],
    power: f64,
    noise_var: f64,
) -> f64 {
    let resp = |a: [Complex64; 2]| (a[0] + w1.conj() * a[1]).norm_sqr();
    let interference: f64 = interferers.iter().map(|(u, p)| p * resp(*u)).sum();
    power * resp(v) / (interference + noise_var * (1.0 + w1.norm_sqr()))
}

/// 2x2 MVDR: returns the partner weight after scaling the reference weight
/// to one, and the output SINR `P v^H R^-1 v`.
fn pair_mvdr(
    v: [Complex64; 2],
    interferers: &[([Complex64; 2], f64)],
    power: f64,
    noise_var: f64,
) -> (Complex64, f64) {
    let mut r00 = noise_var;
    let mut r11 = noise_var;
    let mut r01 = Complex64::new(0.0, 0.0);
    for (u, p) in interferers {
        r00 += p * u[0].norm_sqr();
        r11 += p * u[1].norm_sqr();
        r01 += u[0] * u[1].conj() * *p;
    }
    let det = r00 * r11 - r01.norm_sqr();
    let w0 = (v[0] * r11 - r01 * v[1]) / det;
    let w1 = (v[1] * r00 - r01.conj() * v[0]) / det;
    let quad = (v[0].conj() * w0 + v[1].conj() * w1).re;
    let partner = if w0.norm() > 1e-12 * w1.norm() {
        w1 / w0
    } else {
        // Reference weight vanishes; keep the partner phase only.
        cis(w1.arg()) * 1e12
    };
    (partner, power * quad.max(0.0))
}

/// SINR-maximizing pair `{0, n}` for receiver `rx_user` of a LOS scenario.
/// Ties go to the smaller `n`, then to the smaller grid phase.
pub fn pair_selection_search(
    scenario: &LosScenario,
    rx_user: usize,
    geometry: &UlaGeometry,
    options: &PairSearchOptions,
) -> Result<SelectionResult> {
    scenario.check_user(rx_user)?;
    if geometry.num_elements() < 2 {
        return Err(Error::InvalidArgument(
            "pair selection needs at least two array elements".into(),
        ));
    }
    if let PairMode::PhaseGrid { step_deg } = options.mode {
        if !(step_deg > 0.0 && step_deg <= 360.0) {
            return Err(Error::InvalidArgument(format!(
                "phase grid step must lie in (0, 360] degrees, got {step_deg}"
            )));
        }
    }
    let partners = candidate_partners(geometry, options.spacing);
    let steering: Vec<CVector> = scenario
        .doas_at(rx_user)
        .iter()
        .map(|&d| full_steering_vector(geometry, d).into_inner())
        .collect();
    let interferers: Vec<(&CVector, f64)> = (0..scenario.num_users())
        .filter(|&k| k != rx_user)
        .map(|k| (&steering[k], scenario.power(k)))
        .collect();
    let (n, w1, sinr) = best_pair(
        &steering[rx_user],
        scenario.power(rx_user),
        &interferers,
        scenario.noise_var(),
        &partners,
        options.mode,
    )
    .ok_or_else(|| Error::InvalidArgument("no candidate partner antennas".into()))?;
    let beamformer = SparseBeamformer::new(
        vec![0, n],
        CVector::from_vec(vec![Complex64::new(1.0, 0.0), w1]),
    )?;
    Ok(SelectionResult {
        spacing_wl: geometry.position_wl(n),
        phase: w1.arg(),
        antenna: n,
        beamformer,
        achieved_sinr: sinr,
    })
}

/// `w = R^-1 S^H a`, with `R = sum_j P_j S^H u_j u_j^H S + noise_var I`,
/// scaled so that the first weight is one. All steering vectors span the
/// whole array.
pub fn support_constrained_mvdr(
    desired: &SteeringVector,
    interferers: &[SteeringVector],
    powers: &[f64],
    noise_var: f64,
    support: &SelectionMatrix,
) -> Result<SparseBeamformer> {
    if interferers.len() != powers.len() {
        return Err(Error::InvalidArgument(format!(
            "{} interferers but {} powers",
            interferers.len(),
            powers.len()
        )));
    }
    let terms: Vec<(&CVector, f64)> = interferers
        .iter()
        .map(|s| s.entries())
        .zip(powers.iter().copied())
        .collect();
    mvdr_weights(desired.entries(), &terms, noise_var, support)
}

pub(crate) fn mvdr_weights(
    desired: &CVector,
    interferers: &[(&CVector, f64)],
    noise_var: f64,
    support: &SelectionMatrix,
) -> Result<SparseBeamformer> {
    let n = support.num_elements();
    if desired.len() != n || interferers.iter().any(|(u, _)| u.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "steering vectors must span all {n} array elements"
        )));
    }
    if !(noise_var > 0.0) {
        return Err(Error::Singular("interference-plus-noise covariance"));
    }
    let r = covariance_on(support.indices(), interferers, noise_var);
    let v = support.apply(desired)?;
    let mut w = solve_hpd(&r, &v, "interference-plus-noise covariance")?;
    let w0 = w[0];
    if w0.norm() > 1e-12 * w.norm() {
        w /= w0;
    }
    SparseBeamformer::new(support.indices().to_vec(), w)
}

/// `P |w^H h|^2 / (sum_j P_j |w^H u_j|^2 + noise_var ||w||^2)` for
/// full-array channel vectors.
pub fn output_sinr(
    w: &SparseBeamformer,
    desired: &CVector,
    desired_power: f64,
    interferers: &[(&CVector, f64)],
    noise_var: f64,
) -> Result<f64> {
    let norm_sqr = w.weights().norm_squared();
    if norm_sqr == 0.0 {
        return Err(Error::InvalidArgument("beamformer has zero norm".into()));
    }
    let last = *w.support().last().expect("support is never empty");
    if last >= desired.len() || interferers.iter().any(|(u, _)| last >= u.len()) {
        return Err(Error::IndexOutOfRange {
            index: last,
            len: desired.len(),
        });
    }
    let signal = desired_power * w.respond(desired).norm_sqr();
    let interference: f64 = interferers
        .iter()
        .map(|(u, p)| p * w.respond(u).norm_sqr())
        .sum();
    Ok(signal / (interference + noise_var * norm_sqr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_manifold::{steering_vector, Direction};
    use crate::channel::sample_direction;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cosines(deg: &[f64]) -> Vec<f64> {
        deg.iter().map(|d| d.to_radians().cos()).collect()
    }

    #[test]
    fn weyl_trivial_cases() {
        assert_eq!(weyl_box_search(&[0.0], 0, 0.5, 10).unwrap(), Some(1));
        let eps = 0.01 * TAU;
        assert_eq!(weyl_box_search(&[1.0 / 3.0], 0, eps, 10).unwrap(), Some(3));
        assert!(weyl_box_search(&[], 0, 0.5, 10).is_err());
        assert!(weyl_box_search(&[0.1], 1, 0.5, 10).is_err());
        assert!(weyl_box_search(&[0.1], 0, 4.0, 10).is_err());
    }

    fn scan_oracle(c: &[f64], desired: usize, eps: f64, d_max: u64) -> Option<u64> {
        let e = eps / (2.0 * PI);
        for d in 1..=d_max {
            let ok = c.iter().enumerate().all(|(k, &ck)| {
                let x = d as f64 * ck;
                let f = x - x.floor();
                if k == desired {
                    f.min(1.0 - f) < e
                } else {
                    (f - 0.5).abs() < e / 2.0
                }
            });
            if ok {
                return Some(d);
            }
        }
        None
    }

    #[test]
    fn weyl_matches_scan_on_reference_directions() {
        let c = cosines(&[175.0, 59.0, 151.0, 133.0]);
        let mut eps = 3.0;
        while eps > 0.05 {
            assert_eq!(
                weyl_box_search(&c, 0, eps, 100_000).unwrap(),
                scan_oracle(&c, 0, eps, 100_000),
                "eps = {eps}"
            );
            eps *= 0.7;
        }
    }

    #[test]
    fn box_spec_layout() {
        let b = BoxSpec::for_nulling(3, 1, 0.2 * TAU).unwrap();
        assert!((b.epsilon_prime() - 0.2).abs() < 1e-15);
        assert_eq!(b.intervals()[1], (0.0, 0.2));
        assert!((b.intervals()[0].0 - 0.4).abs() < 1e-15);
        assert!((b.volume() - 0.2f64.powi(3)).abs() < 1e-15);
        assert!(b.contains(&[0.5, 0.1, 0.45]));
        assert!(!b.contains(&[0.5, 0.3, 0.45]));
    }

    #[test]
    fn weyl_hit_fraction_matches_volume() {
        let c = [2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0];
        let b = BoxSpec::for_nulling(2, 0, 0.3 * TAU).unwrap();
        let m = 100_000;
        let frac = box_hit_fraction(&c, &b, m);
        let v = b.volume();
        let sd = (v * (1.0 - v) / m as f64).sqrt();
        assert!((frac - v).abs() < 3.0 * sd, "{frac} vs {v}");
    }

    #[test]
    fn discrepancy_examples() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!(equidistribution_discrepancy(&[golden], 10_000) < 0.01);
        assert!(equidistribution_discrepancy(&[0.5], 1000) > 0.4);
        assert!(equidistribution_discrepancy(&[0.37], 1) <= 1.0);
        let d2 = equidistribution_discrepancy(&[golden, 2f64.sqrt() - 1.0], 20_000);
        assert!(d2 < 0.02, "{d2}");
        assert!(equidistribution_discrepancy(&[0.5, 0.25], 400) > 0.2);
    }

    #[test]
    fn nulling_search_meets_thresholds() {
        let c = cosines(&[175.0, 59.0, 151.0, 133.0]);
        for policy in [PhasePolicy::Fixed, PhasePolicy::CoDesigned] {
            let s = nulling_spacing_search(&c, 0, 0.1, 100_000, policy).unwrap().unwrap();
            let d = s.spacing_wl as f64;
            assert!(pair_gain_cos(d, c[0], s.phase) > 0.9);
            assert!(c[1..].iter().all(|&ck| pair_gain_cos(d, ck, s.phase) < 0.1));
        }
    }

    #[test]
    fn co_designed_phase_never_needs_a_larger_spacing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let c: Vec<f64> = (0..3).map(|_| sample_direction(&mut rng).cos()).collect();
            let fixed = nulling_spacing_search(&c, 0, 0.1, 5000, PhasePolicy::Fixed).unwrap();
            let co = nulling_spacing_search(&c, 0, 0.1, 5000, PhasePolicy::CoDesigned).unwrap();
            if let Some(f) = fixed {
                assert!(co.unwrap().spacing_wl <= f.spacing_wl);
            }
        }
    }

    #[test]
    fn feasible_phase_agrees_with_phase_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..300 {
            let c: Vec<f64> = (0..3).map(|_| sample_direction(&mut rng).cos()).collect();
            let d = rng.random_range(1..200) as f64;
            let delta = 0.2;
            let scan = (0..20_000).any(|k| {
                let phi = k as f64 * TAU / 20_000.0;
                meets_thresholds(&c, 0, delta, d, phi)
            });
            let found = feasible_phase(&c, 0, delta, d);
            if scan {
                assert!(found.is_some());
            }
            if let Some(phi) = found {
                assert!(meets_thresholds(&c, 0, delta, d, phi));
            }
        }
    }

    fn los(doas_deg: &[f64], noise_var: f64) -> LosScenario {
        let row = doas_deg.iter().map(|&d| Direction::from_degrees(d).unwrap()).collect();
        LosScenario::from_receiver_view(row, vec![1.0; doas_deg.len()], noise_var).unwrap()
    }

    #[test]
    fn single_user_gets_matched_pair() {
        let sc = los(&[90.0], 0.5);
        let g = UlaGeometry::half_wavelength(10).unwrap();
        for mode in [PairMode::ClosedForm, PairMode::PhaseGrid { step_deg: 1.0 }] {
            let r = pair_selection_search(
                &sc,
                0,
                &g,
                &PairSearchOptions {
                    mode,
                    spacing: SpacingSet::AllMultiples,
                },
            )
            .unwrap();
            assert!((r.achieved_sinr - 4.0).abs() < 1e-9);
            assert_eq!(r.antenna, 1);
            assert_eq!(r.beamformer.weights()[0], Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn too_small_array_is_rejected() {
        let sc = los(&[90.0, 30.0], 1.0);
        let g = UlaGeometry::half_wavelength(1).unwrap();
        assert!(pair_selection_search(&sc, 0, &g, &PairSearchOptions::default()).is_err());
    }

    #[test]
    fn reference_scenario_selects_five_wavelengths() {
        let sc = los(&[175.0, 59.0, 151.0, 133.0], 1.0);
        let g = UlaGeometry::with_aperture(25.0, 0.5).unwrap();
        for mode in [PairMode::ClosedForm, PairMode::PhaseGrid { step_deg: 1.0 }] {
            let r = pair_selection_search(
                &sc,
                0,
                &g,
                &PairSearchOptions {
                    mode,
                    spacing: SpacingSet::IntegerWavelength,
                },
            )
            .unwrap();
            assert!((r.spacing_wl - 5.0).abs() < 1e-12, "{mode:?}: {}", r.spacing_wl);
        }
    }

    #[test]
    fn integer_wavelength_candidates() {
        let g = UlaGeometry::with_aperture(3.0, 0.5).unwrap();
        assert_eq!(candidate_partners(&g, SpacingSet::IntegerWavelength), vec![2, 4, 6]);
        assert_eq!(candidate_partners(&g, SpacingSet::AllMultiples).len(), 6);
    }

    #[test]
    fn mvdr_without_interferers_is_matched_filter() {
        let g = UlaGeometry::half_wavelength(12).unwrap();
        let a = full_steering_vector(&g, Direction::new(1.2).unwrap());
        let s = SelectionMatrix::new(vec![0, 5, 9], 12).unwrap();
        let w = support_constrained_mvdr(&a, &[], &[], 2.0, &s).unwrap();
        let v = s.apply(a.entries()).unwrap();
        let expected = &v / v[0];
        assert!((w.weights() - expected).norm() < 1e-12);
    }

    #[test]
    fn mvdr_with_orthogonal_interferer_is_matched_filter() {
        // pair at 1 wavelength, desired at broadside, interferer at 60 degrees
        // gives restricted vectors [1, 1] and [1, -1].
        let g = UlaGeometry::half_wavelength(4).unwrap();
        let a = full_steering_vector(&g, Direction::from_degrees(90.0).unwrap());
        let u = full_steering_vector(&g, Direction::from_degrees(60.0).unwrap());
        let s = SelectionMatrix::new(vec![0, 2], 4).unwrap();
        let w = support_constrained_mvdr(&a, &[u], &[5.0], 1.0, &s).unwrap();
        assert!((w.weights()[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn mvdr_rejects_zero_noise() {
        let g = UlaGeometry::half_wavelength(4).unwrap();
        let a = full_steering_vector(&g, Direction::new(1.0).unwrap());
        let s = SelectionMatrix::new(vec![0, 2], 4).unwrap();
        assert!(matches!(
            support_constrained_mvdr(&a, &[], &[], 0.0, &s),
            Err(Error::Singular(_))
        ));
    }

    fn random_instance(
        rng: &mut ChaCha8Rng,
        n: usize,
        k: usize,
    ) -> (SteeringVector, Vec<SteeringVector>, Vec<f64>) {
        let g = UlaGeometry::half_wavelength(n).unwrap();
        let a = full_steering_vector(&g, sample_direction(rng));
        let us = (0..k).map(|_| full_steering_vector(&g, sample_direction(rng))).collect();
        let ps = (0..k).map(|_| rng.random_range(0.1..5.0)).collect();
        (a, us, ps)
    }

    #[test]
    fn mvdr_beats_random_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let (a, us, ps) = random_instance(&mut rng, 16, 3);
            let s = SelectionMatrix::new(vec![0, 4, 11], 16).unwrap();
            let w = support_constrained_mvdr(&a, &us, &ps, 0.3, &s).unwrap();
            let terms: Vec<(&CVector, f64)> =
                us.iter().map(|u| u.entries()).zip(ps.iter().copied()).collect();
            let best = output_sinr(&w, a.entries(), 1.0, &terms, 0.3).unwrap();
            for _ in 0..20_000 {
                let wr = CVector::from_fn(3, |_, _| {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                });
                let wr = SparseBeamformer::new(vec![0, 4, 11], wr).unwrap();
                let s = output_sinr(&wr, a.entries(), 1.0, &terms, 0.3).unwrap();
                assert!(s <= best * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn closed_form_pair_matches_general_mvdr() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..30 {
            let (a, us, ps) = random_instance(&mut rng, 20, 3);
            let n = rng.random_range(1..20usize);
            let u2: Vec<([Complex64; 2], f64)> = us
                .iter()
                .zip(&ps)
                .map(|(u, &p)| ([u.entries()[0], u.entries()[n]], p))
                .collect();
            let (w1, sinr) = pair_mvdr([a.entries()[0], a.entries()[n]], &u2, 1.5, 0.7);
            let s = SelectionMatrix::new(vec![0, n], 20).unwrap();
            let w = support_constrained_mvdr(&a, &us, &ps, 0.7, &s).unwrap();
            assert!((w.weights()[1] - w1).norm() < 1e-9 * w1.norm().max(1.0));
            let terms: Vec<(&CVector, f64)> =
                us.iter().map(|u| u.entries()).zip(ps.iter().copied()).collect();
            let direct = output_sinr(&w, a.entries(), 1.5, &terms, 0.7).unwrap();
            assert!((direct - sinr).abs() < 1e-9 * sinr.max(1.0));
        }
    }

    #[test]
    fn output_sinr_checks_inputs() {
        let w = SparseBeamformer::new(vec![0, 1], CVector::zeros(2)).unwrap();
        let h = CVector::from_element(2, Complex64::new(1.0, 0.0));
        assert!(output_sinr(&w, &h, 1.0, &[], 1.0).is_err());
        let w = SparseBeamformer::pair(3, 0.0);
        assert!(output_sinr(&w, &h, 1.0, &[], 1.0).is_err());
    }

    #[test]
    fn beamformer_validation() {
        let one = CVector::from_element(2, Complex64::new(1.0, 0.0));
        assert!(SparseBeamformer::new(vec![], CVector::zeros(0)).is_err());
        assert!(SparseBeamformer::new(vec![2, 1], one.clone()).is_err());
        assert!(SparseBeamformer::new(vec![1, 2, 3], one.clone()).is_err());
        let w = SparseBeamformer::new(vec![1, 3], one).unwrap();
        let d = w.to_dense(5).unwrap();
        assert_eq!(d[3], Complex64::new(1.0, 0.0));
        assert_eq!(d[2], Complex64::new(0.0, 0.0));
        assert!(w.to_dense(3).is_err());
        assert!((w.normalized().unwrap().norm() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn weyl_success_is_monotone_in_d_max(seed in 0u64..100_000, d_small in 1u64..2000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c: Vec<f64> = (0..3).map(|_| sample_direction(&mut rng).cos()).collect();
            let eps = 1.0;
            if let Some(d) = weyl_box_search(&c, 0, eps, d_small).unwrap() {
                prop_assert_eq!(weyl_box_search(&c, 0, eps, d_small * 10).unwrap(), Some(d));
            }
        }

        #[test]
        fn closed_form_dominates_phase_grid(seed in 0u64..100_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = UlaGeometry::half_wavelength(12).unwrap();
            let doas: Vec<Direction> = (0..3).map(|_| sample_direction(&mut rng)).collect();
            let sc = LosScenario::from_receiver_view(doas.clone(), vec![1.0; 3], 0.2).unwrap();
            let steer: Vec<CVector> = doas.iter().map(|&d| full_steering_vector(&g, d).into_inner()).collect();
            let terms = [(&steer[1], 1.0), (&steer[2], 1.0)];
            for n in 1..12 {
                let grid = best_pair(&steer[0], 1.0, &terms, 0.2, &[n], PairMode::PhaseGrid { step_deg: 1.0 }).unwrap();
                let closed = best_pair(&steer[0], 1.0, &terms, 0.2, &[n], PairMode::ClosedForm).unwrap();
                prop_assert!(closed.2 >= grid.2 * (1.0 - 1e-12));
            }
            let _ = sc;
        }

        #[test]
        fn mvdr_sinr_is_scale_invariant(seed in 0u64..100_000, scale in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, us, ps) = random_instance(&mut rng, 10, 2);
            let s = SelectionMatrix::new(vec![0, 3, 7], 10).unwrap();
            let sinr = |k: f64| {
                let ps: Vec<f64> = ps.iter().map(|p| p * k).collect();
                let w = support_constrained_mvdr(&a, &us, &ps, 0.5 * k, &s).unwrap();
                let terms: Vec<(&CVector, f64)> = us.iter().map(|u| u.entries()).zip(ps.iter().copied()).collect();
                output_sinr(&w, a.entries(), k, &terms, 0.5 * k).unwrap()
            };
            let base = sinr(1.0);
            prop_assert!((sinr(scale) - base).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn pair_beamformer_respects_reference_weight(seed in 0u64..100_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = UlaGeometry::half_wavelength(30).unwrap();
            let doas: Vec<Direction> = (0..4).map(|_| sample_direction(&mut rng)).collect();
            let sc = LosScenario::from_receiver_view(doas, vec![1.0; 4], 0.1).unwrap();
            let r = pair_selection_search(&sc, 2, &g, &PairSearchOptions::default()).unwrap();
            prop_assert_eq!(r.beamformer.weights()[0], Complex64::new(1.0, 0.0));
            prop_assert!(r.achieved_sinr >= 0.0);
            prop_assert_eq!(r.beamformer.support(), &[0, r.antenna][..]);
            let a = steering_vector(&g, &[0, r.antenna], sc.doa(2, 2)).unwrap();
            prop_assert!(a.len() == 2);
        }
    }
}
