//! Achievable rates in bits per channel use.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array_manifold::{full_steering_vector, steering_vector, UlaGeometry};
use crate::channel::{LosScenario, SelectionMatrix};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, log2_det_hpd, CMatrix, CVector};
use crate::nulling::{mvdr_weights, output_sinr, SparseBeamformer};

/// Scalar link: output SINR and the corresponding Gaussian-input rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRate {
    pub bits_per_use: f64,
    pub sinr_linear: f64,
}

impl LinkRate {
    pub fn from_sinr(sinr_linear: f64) -> Self {
        let sinr_linear = sinr_linear.max(0.0);
        Self {
            bits_per_use: sinr_linear.ln_1p() / std::f64::consts::LN_2,
            sinr_linear,
        }
    }
}

fn log2_1p(x: f64) -> f64 {
    x.max(0.0).ln_1p() / std::f64::consts::LN_2
}

/// Hermitian positive-definite covariance of noise plus residual
/// interference at a beamformer output.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance(CMatrix);

impl NoiseCovariance {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidArgument("noise covariance must be square".into()));
        }
        if hermitian_defect(&m) > 1e-12 {
            return Err(Error::InvalidArgument("noise covariance is not Hermitian".into()));
        }
        crate::linalg::cholesky(&m, "noise covariance")?;
        Ok(Self(m))
    }

    /// `sum_j p H_j H_j^H + noise_var I`.
    pub fn from_interferers(
        dim: usize,
        interferers: &[CMatrix],
        per_stream_power: f64,
        noise_var: f64,
    ) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(Error::Singular("noise covariance"));
        }
        let mut q = CMatrix::identity(dim, dim) * Complex64::new(noise_var, 0.0);
        for h in interferers {
            if h.nrows() != dim {
                return Err(Error::InvalidArgument(format!(
                    "interferer channel has {} rows, expected {dim}",
                    h.nrows()
                )));
            }
            q += h * h.adjoint() * Complex64::new(per_stream_power, 0.0);
        }
        Ok(Self(q))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// `P_i |w^H a_i|^2 / (sum_{j != i} P_j |w^H a_j|^2 + noise_var ||w||^2)`.
pub fn sinr(
    scenario: &LosScenario,
    rx_user: usize,
    w: &SparseBeamformer,
    geometry: &UlaGeometry,
) -> Result<f64> {
    scenario.check_user(rx_user)?;
    let norm_sqr = w.weights().norm_squared();
    if norm_sqr == 0.0 {
        return Err(Error::InvalidArgument("beamformer has zero norm".into()));
    }
    let gain = |k: usize| -> Result<f64> {
        let a = steering_vector(geometry, w.support(), scenario.doa(rx_user, k))?;
        Ok(w.weights().dotc(a.entries()).norm_sqr())
    };
    let signal = scenario.power(rx_user) * gain(rx_user)?;
    let mut interference = 0.0;
    for k in (0..scenario.num_users()).filter(|&k| k != rx_user) {
        interference += scenario.power(k) * gain(k)?;
    }
    Ok(signal / (interference + scenario.noise_var() * norm_sqr))
}

/// `log2 det(I + p H_d H_d^H Q^-1)` with `Q` the given noise covariance.
pub fn mimo_rate_with_noise_covariance(
    desired: &CMatrix,
    per_stream_power: f64,
    noise: &NoiseCovariance,
) -> Result<f64> {
    if desired.nrows() != noise.dim() {
        return Err(Error::InvalidArgument(format!(
            "desired channel has {} rows, noise covariance is {}x{}",
            desired.nrows(),
            noise.dim(),
            noise.dim()
        )));
    }
    let q = noise.matrix();
    let total = q + desired * desired.adjoint() * Complex64::new(per_stream_power, 0.0);
    let rate = log2_det_hpd(&total, "signal-plus-noise covariance")?
        - log2_det_hpd(q, "noise covariance")?;
    Ok(rate.max(0.0))
}

/// Rate of the desired MIMO link with every interferer treated as Gaussian
/// noise; each stream (column) carries `per_stream_power`.
pub fn mimo_rate_interference_as_noise(
    desired: &CMatrix,
    interferers: &[CMatrix],
    per_stream_power: f64,
    noise_var: f64,
) -> Result<f64> {
    let q = NoiseCovariance::from_interferers(
        desired.nrows(),
        interferers,
        per_stream_power,
        noise_var,
    )?;
    mimo_rate_with_noise_covariance(desired, per_stream_power, &q)
}

/// Matched filtering on `support`: `log2(1 + r P / noise_var)`.
pub fn interference_free_rate(
    scenario: &LosScenario,
    rx_user: usize,
    support: &SelectionMatrix,
    geometry: &UlaGeometry,
) -> Result<f64> {
    scenario.check_user(rx_user)?;
    geometry.check_support(support.indices())?;
    Ok(log2_1p(
        support.len() as f64 * scenario.power(rx_user) / scenario.noise_var(),
    ))
}

/// `sum_l log2(1 + |g_l|^2 P / noise_var)`: every path on its own
/// orthogonal channel.
pub fn orthogonal_benchmark_rate(gains: &[Complex64], power: f64, noise_var: f64) -> f64 {
    gains
        .iter()
        .map(|g| log2_1p(g.norm_sqr() * power / noise_var))
        .sum()
}

/// Index of the user sharing a slot with `user` when users are paired in
/// index order.
pub fn tdma_partner(user: usize, num_users: usize) -> Option<usize> {
    let p = user ^ 1;
    (p < num_users).then_some(p)
}

/// Time sharing with two users per slot and an MMSE receiver on
/// `pair_support` that suppresses the co-slot user. The rate is divided by
/// the number of slots, `ceil(K / 2)`.
pub fn tdma_mmse_benchmark(
    scenario: &LosScenario,
    rx_user: usize,
    geometry: &UlaGeometry,
    pair_support: &SelectionMatrix,
) -> Result<f64> {
    scenario.check_user(rx_user)?;
    let k = scenario.num_users();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "TDMA benchmark needs at least two users".into(),
        ));
    }
    if pair_support.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "TDMA receiver uses two antennas, got {}",
            pair_support.len()
        )));
    }
    geometry.check_support(pair_support.indices())?;
    let desired = full_steering_vector(geometry, scenario.doa(rx_user, rx_user)).into_inner();
    let partner: Option<(CVector, f64)> = tdma_partner(rx_user, k).map(|j| {
        (
            full_steering_vector(geometry, scenario.doa(rx_user, j)).into_inner(),
            scenario.power(j),
        )
    });
    let terms: Vec<(&CVector, f64)> = partner.iter().map(|(u, p)| (u, *p)).collect();
    let w = mvdr_weights(&desired, &terms, scenario.noise_var(), pair_support)?;
    let s = output_sinr(&w, &desired, scenario.power(rx_user), &terms, scenario.noise_var())?;
    let slots = k.div_ceil(2) as f64;
    Ok(log2_1p(s) / slots)
}
