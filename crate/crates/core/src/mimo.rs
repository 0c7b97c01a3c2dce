//! Receive antenna selection for ray-based MIMO links.
//!
//! The simplified scheme pairs every stream with its own partner antenna
//! next to the shared reference antenna 0 ([`per_stream_pair_search`]), so
//! `t` streams need `t + 1` receive chains. [`full_subset_search`] is the
//! exhaustive benchmark over all `r`-subsets of the array.

use num_complex::Complex64;
use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_manifold::{full_steering_vector, steering_vector};
use crate::channel::{effective_stream_channel_full, MimoScenario, SelectionMatrix};
use crate::error::{Error, Result};
use crate::linalg::{log2_det_hpd, log2_det_hpd_in_place, CMatrix, CVector};
use crate::nulling::{best_pair, mvdr_weights, output_sinr, PairMode, SparseBeamformer};
use crate::rates::mimo_rate_interference_as_noise;

/// What each stream's pair beamformer is aimed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamTargetMode {
    /// Stream `l` receives desired path `l` and treats every other path,
    /// including the desired user's own, as interference.
    #[default]
    PathNulling,
    /// Stream `m` receives the effective channel of transmit antenna `m`;
    /// the desired user's other streams count as interference.
    StreamChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamSearchOptions {
    pub mode: PairMode,
    pub target: StreamTargetMode,
    /// Replace every pair beamformer by MVDR weights over the whole selected
    /// support once the antennas are fixed.
    pub refine: bool,
}

impl Default for StreamSearchOptions {
    fn default() -> Self {
        Self {
            mode: PairMode::ClosedForm,
            target: StreamTargetMode::PathNulling,
            refine: false,
        }
    }
}

/// Per-stream partner antennas and beamformers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamAssignment {
    pub rx_user: usize,
    pub target: StreamTargetMode,
    /// Partner antenna of each stream; all distinct and nonzero.
    pub antennas: Vec<usize>,
    pub beamformers: Vec<SparseBeamformer>,
    /// Output SINR of each stream's beamformer.
    pub stream_sinr: Vec<f64>,
    num_elements: usize,
}

impl StreamAssignment {
    pub fn num_streams(&self) -> usize {
        self.antennas.len()
    }

    /// Reference antenna plus every partner.
    pub fn support(&self) -> SelectionMatrix {
        let mut s = self.antennas.clone();
        s.push(0);
        s.sort_unstable();
        SelectionMatrix::new(s, self.num_elements).expect("partners are distinct and in range")
    }
}

/// Desired and interfering full-array vectors for stream `m`.
struct StreamProblem {
    desired: CVector,
    desired_power: f64,
    interferers: Vec<(CVector, f64)>,
}

fn stream_problems(
    scenario: &MimoScenario,
    rx_user: usize,
    target: StreamTargetMode,
) -> Result<Vec<StreamProblem>> {
    let geom = scenario.rx_geometry();
    let t = scenario.streams(rx_user);
    let k = scenario.num_users();
    match target {
        StreamTargetMode::PathNulling => {
            let own = scenario.paths(rx_user, rx_user);
            if own.len() < t {
                return Err(Error::InvalidArgument(format!(
                    "{t} streams need at least {t} desired paths, got {}",
                    own.len()
                )));
            }
            let path_vec = |p: &crate::channel::PathSpec| {
                full_steering_vector(geom, p.doa).into_inner() * p.gain
            };
            let mut external = Vec::new();
            for j in (0..k).filter(|&j| j != rx_user) {
                for p in scenario.paths(rx_user, j) {
                    external.push((path_vec(p), scenario.power(j)));
                }
            }
            Ok((0..t)
                .map(|l| {
                    let mut interferers: Vec<(CVector, f64)> = own
                        .iter()
                        .enumerate()
                        .filter(|&(q, _)| q != l)
                        .map(|(_, p)| (path_vec(p), scenario.power(rx_user)))
                        .collect();
                    interferers.extend(external.iter().cloned());
                    StreamProblem {
                        desired: path_vec(&own[l]),
                        desired_power: scenario.power(rx_user),
                        interferers,
                    }
                })
                .collect())
        }
        StreamTargetMode::StreamChannel => {
            let mut channels: Vec<Vec<(CVector, f64)>> = Vec::with_capacity(k);
            for j in 0..k {
                let tj = scenario.streams(j);
                let p = scenario.power(j) / tj as f64;
                let hs = (0..tj)
                    .map(|m| Ok((effective_stream_channel_full(scenario, rx_user, j, m)?, p)))
                    .collect::<Result<Vec<_>>>()?;
                channels.push(hs);
            }
            Ok((0..t)
                .map(|m| {
                    let interferers = channels
                        .iter()
                        .enumerate()
                        .flat_map(|(j, hs)| {
                            hs.iter()
                                .enumerate()
                                .filter(move |&(s, _)| !(j == rx_user && s == m))
                                .map(|(_, h)| h.clone())
                        })
                        .collect();
                    let (desired, desired_power) = channels[rx_user][m].clone();
                    StreamProblem {
                        desired,
                        desired_power,
                        interferers,
                    }
                })
                .collect())
        }
    }
}

/// Chooses one partner antenna per stream, maximizing that stream's pair
/// SINR. Streams are processed in order; a later stream never reuses an
/// earlier stream's partner. Ties go to the smaller antenna index.
pub fn per_stream_pair_search(
    scenario: &MimoScenario,
    rx_user: usize,
    options: &StreamSearchOptions,
) -> Result<StreamAssignment> {
    scenario.check_user(rx_user)?;
    let n_r = scenario.rx_geometry().num_elements();
    let t = scenario.streams(rx_user);
    if n_r < t + 1 {
        return Err(Error::InvalidArgument(format!(
            "{t} streams need at least {} receive antennas, got {n_r}",
            t + 1
        )));
    }
    let problems = stream_problems(scenario, rx_user, options.target)?;
    let mut antennas: Vec<usize> = Vec::with_capacity(t);
    let mut beamformers = Vec::with_capacity(t);
    let mut stream_sinr = Vec::with_capacity(t);
    for prob in &problems {
        let partners: Vec<usize> = (1..n_r).filter(|n| !antennas.contains(n)).collect();
        let terms: Vec<(&CVector, f64)> = prob.interferers.iter().map(|(u, p)| (u, *p)).collect();
        let (n, w1, sinr) = best_pair(
            &prob.desired,
            prob.desired_power,
            &terms,
            scenario.noise_var(),
            &partners,
            options.mode,
        )
        .expect("at least one free partner remains");
        antennas.push(n);
        beamformers.push(SparseBeamformer::new(
            vec![0, n],
            CVector::from_vec(vec![Complex64::new(1.0, 0.0), w1]),
        )?);
        stream_sinr.push(sinr);
    }
    let mut assignment = StreamAssignment {
        rx_user,
        target: options.target,
        antennas,
        beamformers,
        stream_sinr,
        num_elements: n_r,
    };
    if options.refine {
        let support = assignment.support();
        for (m, prob) in problems.iter().enumerate() {
            let terms: Vec<(&CVector, f64)> =
                prob.interferers.iter().map(|(u, p)| (u, *p)).collect();
            let w = mvdr_weights(&prob.desired, &terms, scenario.noise_var(), &support)?;
            assignment.stream_sinr[m] = output_sinr(
                &w,
                &prob.desired,
                prob.desired_power,
                &terms,
                scenario.noise_var(),
            )?;
            assignment.beamformers[m] = w;
        }
    }
    Ok(assignment)
}

/// `W^H A_R G A_T` and the deviation `D = W^H A_R - I` after scaling every
/// beamformer to unit response towards its own path.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentChannel {
    pub h_tilde: CMatrix,
    pub deviation: CMatrix,
    /// Largest entry magnitude of `deviation`.
    pub max_deviation: f64,
    pub gains: Vec<Complex64>,
    /// Row `l` is the transmit steering vector of desired path `l`.
    pub a_t: CMatrix,
}

pub fn assemble_equivalent_channel(
    assignment: &StreamAssignment,
    scenario: &MimoScenario,
    rx_user: usize,
) -> Result<EquivalentChannel> {
    scenario.check_user(rx_user)?;
    let t = assignment.num_streams();
    let paths = scenario.paths(rx_user, rx_user);
    if paths.len() < t {
        return Err(Error::InvalidArgument(format!(
            "{t} streams need at least {t} desired paths, got {}",
            paths.len()
        )));
    }
    let rx_geom = scenario.rx_geometry();
    let tx_geom = scenario.tx_geometry(rx_user);
    let tx_all: Vec<usize> = (0..tx_geom.num_elements()).collect();
    let a_r: Vec<CVector> = paths[..t]
        .iter()
        .map(|p| full_steering_vector(rx_geom, p.doa).into_inner())
        .collect();
    let mut a_t = CMatrix::zeros(t, tx_geom.num_elements());
    for (l, p) in paths[..t].iter().enumerate() {
        let v = steering_vector(tx_geom, &tx_all, p.dod)?;
        a_t.row_mut(l).copy_from(&v.entries().transpose());
    }
    let mut wa = CMatrix::zeros(t, t);
    for (l, w) in assignment.beamformers.iter().enumerate() {
        let own = w.respond(&a_r[l]);
        let scale = if own.norm() > 1e-300 {
            Complex64::new(1.0, 0.0) / own
        } else {
            Complex64::new(1.0, 0.0)
        };
        for (q, a) in a_r.iter().enumerate() {
            wa[(l, q)] = w.respond(a) * scale;
        }
    }
    let gains: Vec<Complex64> = paths[..t].iter().map(|p| p.gain).collect();
    let g = CMatrix::from_diagonal(&CVector::from_vec(gains.clone()));
    let h_tilde = &wa * &g * &a_t;
    let deviation = wa - CMatrix::identity(t, t);
    let max_deviation = deviation.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(EquivalentChannel {
        h_tilde,
        deviation,
        max_deviation,
        gains,
        a_t,
    })
}

/// `log2 det(I + P / (noise_var t) G A_T A_T^H G^H)`.
pub fn theorem2_rate(gains: &[Complex64], a_t: &CMatrix, power: f64, noise_var: f64) -> Result<f64> {
    let t = gains.len();
    if t == 0 || a_t.nrows() != t {
        return Err(Error::InvalidArgument(format!(
            "{t} path gains but A_T has {} rows",
            a_t.nrows()
        )));
    }
    let g = CMatrix::from_diagonal(&CVector::from_vec(gains.to_vec()));
    let ga = g * a_t;
    let m = CMatrix::identity(t, t)
        + &ga * ga.adjoint() * Complex64::new(power / (noise_var * t as f64), 0.0);
    log2_det_hpd(&m, "rate matrix")
}

/// Capacity-achieving transmit covariance under a trace constraint, by
/// waterfilling over the eigenmodes of `H^H H / noise_var`.
pub fn csit_rate_waterfilling(h: &CMatrix, power: f64, noise_var: f64) -> Result<(f64, CMatrix)> {
    if !(power > 0.0) || !(noise_var > 0.0) {
        return Err(Error::InvalidArgument(
            "power and noise variance must be positive".into(),
        ));
    }
    let t = h.ncols();
    let gram = h.adjoint() * h / Complex64::new(noise_var, 0.0);
    let gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();

    let scale = lambda.first().copied().unwrap_or(0.0);
    if scale <= 0.0 {
        let q = CMatrix::identity(t, t) * Complex64::new(power / t as f64, 0.0);
        return Ok((0.0, q));
    }
    let positive = lambda.iter().take_while(|&&l| l > 1e-12 * scale).count();
    let mut active = positive;
    let mut level = 0.0;
    while active > 0 {
        let inv_sum: f64 = lambda[..active].iter().map(|l| 1.0 / l).sum();
        level = (power + inv_sum) / active as f64;
        if level > 1.0 / lambda[active - 1] {
            break;
        }
        active -= 1;
    }
    let alloc: Vec<f64> = (0..t)
        .map(|k| {
            if k < active {
                level - 1.0 / lambda[k]
            } else {
                0.0
            }
        })
        .collect();
    let rate = lambda
        .iter()
        .zip(&alloc)
        .map(|(l, p)| (1.0 + l * p).log2())
        .sum();
    let mut q = CMatrix::zeros(t, t);
    for (k, &p) in alloc.iter().enumerate() {
        if p > 0.0 {
            let v = eig.eigenvectors.column(order[k]);
            q += v * v.adjoint() * Complex64::new(p, 0.0);
        }
    }
    Ok((rate, q))
}

/// Rate of a fixed receive subset, with and without the interferers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportRates {
    pub with_interference: f64,
    pub interference_free: f64,
}

/// Both rates on `support`, with interference treated as noise and optimal
/// processing of the selected antennas.
pub fn support_rates(
    scenario: &MimoScenario,
    rx_user: usize,
    support: &SelectionMatrix,
) -> Result<SupportRates> {
    scenario.check_user(rx_user)?;
    let stream_matrix = |j: usize| -> Result<CMatrix> {
        let cols = (0..scenario.streams(j))
            .map(|m| support.apply(&effective_stream_channel_full(scenario, rx_user, j, m)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(CMatrix::from_columns(&cols))
    };
    let t = scenario.streams(rx_user);
    let p = scenario.power(rx_user) / t as f64;
    let desired = stream_matrix(rx_user)?;
    // Per-stream powers may differ between users; fold them into the
    // interferer channels so a single power applies.
    let interferers = (0..scenario.num_users())
        .filter(|&j| j != rx_user)
        .map(|j| {
            let pj = scenario.power(j) / scenario.streams(j) as f64;
            Ok(stream_matrix(j)? * Complex64::new((pj / p).sqrt(), 0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SupportRates {
        with_interference: mimo_rate_interference_as_noise(
            &desired,
            &interferers,
            p,
            scenario.noise_var(),
        )?,
        interference_free: mimo_rate_interference_as_noise(&desired, &[], p, scenario.noise_var())?,
    })
}

/// Outcome of the exhaustive subset search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSearchResult {
    pub support: Vec<usize>,
    pub rate: f64,
    /// Interference-free rate on `support`.
    pub interference_free_rate: f64,
    /// Largest interference-free rate over all subsets.
    pub max_interference_free_rate: f64,
}

/// `sum_k p_k v_k v_k^H` over the whole array, row-major.
fn full_covariance(n: usize, terms: &[(CVector, f64)]) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for (v, p) in terms {
        for a in 0..n {
            let va = v[a] * *p;
            for b in 0..=a {
                m[a * n + b] += va * v[b].conj();
            }
        }
    }
    m
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let r = c.len();
    for i in (0..r).rev() {
        if c[i] < n - r + i {
            c[i] += 1;
            for j in i + 1..r {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

struct SubsetBest {
    rate: f64,
    support: Vec<usize>,
    free: f64,
    max_free: f64,
}

/// Best `r`-subset of the receive array for `rx_user`, by rate with
/// interference treated as noise. Subsets are visited in lexicographic
/// order and the first maximizer wins.
pub fn full_subset_search(
    scenario: &MimoScenario,
    rx_user: usize,
    r: usize,
) -> Result<SubsetSearchResult> {
    scenario.check_user(rx_user)?;
    let n = scenario.rx_geometry().num_elements();
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!(
            "cannot select {r} of {n} antennas"
        )));
    }
    let mut desired = Vec::new();
    let mut interference = Vec::new();
    for j in 0..scenario.num_users() {
        let p = scenario.power(j) / scenario.streams(j) as f64;
        for m in 0..scenario.streams(j) {
            let h = effective_stream_channel_full(scenario, rx_user, j, m)?;
            if j == rx_user {
                desired.push((h, p));
            } else {
                interference.push((h, p));
            }
        }
    }
    let md = full_covariance(n, &desired);
    let mi = full_covariance(n, &interference);
    let noise = scenario.noise_var();
    let noise_logdet = r as f64 * noise.log2();

    let evaluate = |sub: &[usize], bufs: &mut [Vec<Complex64>; 3]| -> Option<(f64, f64)> {
        for (a, &sa) in sub.iter().enumerate() {
            for (b, &sb) in sub[..=a].iter().enumerate() {
                let idx = sa * n + sb;
                let noise_term = if a == b { noise } else { 0.0 };
                let q = mi[idx] + noise_term;
                bufs[0][a * r + b] = q;
                bufs[1][a * r + b] = q + md[idx];
                bufs[2][a * r + b] = md[idx] + noise_term;
            }
        }
        let [q, s, f] = bufs;
        let lq = log2_det_hpd_in_place(q, r)?;
        let ls = log2_det_hpd_in_place(s, r)?;
        let lf = log2_det_hpd_in_place(f, r)?;
        Some(((ls - lq).max(0.0), (lf - noise_logdet).max(0.0)))
    };

    let per_first: Vec<Option<SubsetBest>> = (0..=n - r)
        .into_par_iter()
        .map(|first| {
            let mut bufs = [
                vec![Complex64::new(0.0, 0.0); r * r],
                vec![Complex64::new(0.0, 0.0); r * r],
                vec![Complex64::new(0.0, 0.0); r * r],
            ];
            let mut sub: Vec<usize> = (first..first + r).collect();
            let mut best: Option<SubsetBest> = None;
            loop {
                if let Some((rate, free)) = evaluate(&sub, &mut bufs) {
                    match &mut best {
                        Some(b) => {
                            if rate > b.rate {
                                b.rate = rate;
                                b.support.copy_from_slice(&sub);
                                b.free = free;
                            }
                            b.max_free = b.max_free.max(free);
                        }
                        None => {
                            best = Some(SubsetBest {
                                rate,
                                support: sub.clone(),
                                free,
                                max_free: free,
                            })
                        }
                    }
                }
                if r == 1 || !next_combination(&mut sub[1..], n) || sub[1] <= first {
                    break;
                }
            }
            best
        })
        .collect();

    let mut overall: Option<SubsetBest> = None;
    for b in per_first.into_iter().flatten() {
        overall = Some(match overall {
            None => b,
            Some(mut o) => {
                o.max_free = o.max_free.max(b.max_free);
                if b.rate > o.rate {
                    o.rate = b.rate;
                    o.support = b.support;
                    o.free = b.free;
                }
                o
            }
        });
    }
    let best = overall.ok_or(Error::Singular("every subset covariance"))?;
    Ok(SubsetSearchResult {
        support: best.support,
        rate: best.rate,
        interference_free_rate: best.free,
        max_interference_free_rate: best.max_free,
    })
}
