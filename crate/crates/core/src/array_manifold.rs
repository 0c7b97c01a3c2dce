//! Steering vectors and beam patterns of uniform linear arrays.
//!
//! Angles are measured from the array axis, so broadside is `pi / 2`, and
//! every direction lies in the open interval `(0, pi)` (planar far field).
//! Element `n` sits at `n * spacing_wl` wavelengths from element 0.
//!
//! Two gain scales coexist. [`pair_gain`] is the normalized two-element
//! gain in `[0, 1]`. [`beam_pattern`] reports the physical power gain of a
//! unit-norm beamformer against unit-modulus steering entries, so a matched
//! `r`-element beamformer reaches `r`. For `w = [1, e^{j phi}] / sqrt(2)` on a
//! pair at separation `d` the two are related by
//! `beam_pattern = 2 * pair_gain(d, theta, -phi)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, CVector};
use crate::nulling::SparseBeamformer;

/// Uniform linear array with `num_elements` elements spaced `spacing_wl`
/// carrier wavelengths apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlaGeometry {
    num_elements: usize,
    spacing_wl: f64,
}

impl UlaGeometry {
    pub fn new(num_elements: usize, spacing_wl: f64) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::InvalidArgument(
                "array needs at least one element".into(),
            ));
        }
        if !(spacing_wl > 0.0 && spacing_wl.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "element spacing must be positive, got {spacing_wl}"
            )));
        }
        Ok(Self {
            num_elements,
            spacing_wl,
        })
    }

    /// Half-wavelength spaced array.
    pub fn half_wavelength(num_elements: usize) -> Result<Self> {
        Self::new(num_elements, 0.5)
    }

    /// Smallest array with the given pitch whose aperture reaches `d_max_wl`.
    pub fn with_aperture(d_max_wl: f64, spacing_wl: f64) -> Result<Self> {
        if !(d_max_wl >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "aperture must be non-negative, got {d_max_wl}"
            )));
        }
        let steps = (d_max_wl / spacing_wl + 1e-9).floor() as usize;
        Self::new(steps + 1, spacing_wl)
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing_wl(&self) -> f64 {
        self.spacing_wl
    }

    /// Position of element `n` in wavelengths.
    pub fn position_wl(&self, n: usize) -> f64 {
        n as f64 * self.spacing_wl
    }

    pub fn aperture_wl(&self) -> f64 {
        self.position_wl(self.num_elements - 1)
    }

    pub(crate) fn check_support(&self, support: &[usize]) -> Result<()> {
        let Some(&last) = support.last() else {
            return Err(Error::EmptySupport);
        };
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedSupport);
        }
        if last >= self.num_elements {
            return Err(Error::IndexOutOfRange {
                index: last,
                len: self.num_elements,
            });
        }
        Ok(())
    }
}

/// A far-field direction in `(0, pi)` with its cosine cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Direction {
    theta: f64,
    cos: f64,
}

impl Direction {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < PI) {
            return Err(Error::InvalidArgument(format!(
                "direction {theta} rad is outside (0, pi)"
            )));
        }
        Ok(Self {
            theta,
            cos: theta.cos(),
        })
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::new(deg.to_radians())
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn cos(&self) -> f64 {
        self.cos
    }

    pub fn degrees(&self) -> f64 {
        self.theta.to_degrees()
    }
}

impl TryFrom<f64> for Direction {
    type Error = Error;

    fn try_from(theta: f64) -> Result<Self> {
        Self::new(theta)
    }
}

impl From<Direction> for f64 {
    fn from(d: Direction) -> f64 {
        d.theta
    }
}

/// Array response on a set of selected antennas. Entries are unit modulus
/// and the first selected antenna is the phase reference.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(CVector);

impl SteeringVector {
    pub fn entries(&self) -> &CVector {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> CVector {
        self.0
    }
}

/// Phase of a plane wave from a direction with cosine `cos` at `position_wl`.
pub(crate) fn element_phase(position_wl: f64, cos: f64) -> f64 {
    TAU * position_wl * cos
}

/// Steering vector `exp(j 2 pi (p_k - p_0) cos theta)` over `support`.
pub fn steering_vector(
    geometry: &UlaGeometry,
    support: &[usize],
    theta: Direction,
) -> Result<SteeringVector> {
    geometry.check_support(support)?;
    let origin = geometry.position_wl(support[0]);
    Ok(SteeringVector(CVector::from_iterator(
        support.len(),
        support
            .iter()
            .map(|&n| cis(element_phase(geometry.position_wl(n) - origin, theta.cos()))),
    )))
}

/// Steering vector of the whole array.
pub fn full_steering_vector(geometry: &UlaGeometry, theta: Direction) -> SteeringVector {
    SteeringVector(CVector::from_fn(geometry.num_elements(), |n, _| {
        cis(element_phase(geometry.position_wl(n), theta.cos()))
    }))
}

/// Normalized gain `(1 + cos(2 pi d cos theta + phi)) / 2` of a two-element
/// pair at separation `d_wl`.
///
/// Since `cos(pi - theta) = -cos(theta)`, mirroring the direction about
/// broadside is the same as negating the phase:
/// `pair_gain(d, pi - theta, phi) == pair_gain(d, theta, -phi)`.
pub fn pair_gain(d_wl: f64, theta: Direction, phi: f64) -> f64 {
    pair_gain_cos(d_wl, theta.cos(), phi)
}

/// [`pair_gain`] taking the direction cosine directly.
pub fn pair_gain_cos(d_wl: f64, cos: f64, phi: f64) -> f64 {
    0.5 * (1.0 + (element_phase(d_wl, cos) + phi).cos())
}

/// Power gain `|w^H a(theta)|^2` of `w` (normalized to unit norm first) over
/// a grid of directions.
pub fn beam_pattern(
    w: &SparseBeamformer,
    geometry: &UlaGeometry,
    theta_grid: &[Direction],
) -> Result<Vec<f64>> {
    if theta_grid.is_empty() {
        return Err(Error::InvalidArgument("empty direction grid".into()));
    }
    geometry.check_support(w.support())?;
    let w = w.normalized()?;
    theta_grid
        .iter()
        .map(|&theta| {
            let a = steering_vector(geometry, w.support(), theta)?;
            Ok(w.weights().dotc(a.entries()).norm_sqr())
        })
        .collect()
}

/// Uniform grid over `(0, 180)` degrees at the cell midpoints, `count` points.
pub fn uniform_direction_grid(count: usize) -> Vec<Direction> {
    let step = PI / count as f64;
    (0..count)
        .map(|k| Direction::new((k as f64 + 0.5) * step).expect("midpoint lies inside (0, pi)"))
        .collect()
}
