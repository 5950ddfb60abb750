//! Coefficient representation in the Dirichlet sine basis on (0, π).
//!
//! A state `u = Σ_k c_k sin(k x)` is stored by its coefficients `c_1..c_K`.
//! The basis is orthogonal with `‖sin(k·)‖² = π/2`, so
//! `‖u‖_X² = (π/2) Σ c_k²` and the fractional norms use the frozen base
//! eigenvalues `μ_k = k²` of `−Δ`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Sub};
use std::sync::Arc;

use rustdct::{DctPlanner, Dst1};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dirichlet eigenvalue `μ_k = k²` of `−Δ` on (0, π), `k` starting at 1.
#[inline]
pub fn eigenvalue(k: usize) -> f64 {
    (k * k) as f64
}

/// Coefficients of a function in the sine basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralState {
    coeffs: Vec<f64>,
}

impl SpectralState {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let s = SpectralState { coeffs };
        s.validate()?;
        Ok(s)
    }

    /// Builds a state without the finiteness check. Used on hot paths whose
    /// inputs are already validated.
    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        SpectralState { coeffs }
    }

    pub fn zeros(modes: usize) -> Self {
        SpectralState {
            coeffs: vec![0.0; modes],
        }
    }

    /// The basis function `e_k = sin(k x)`, `k ≥ 1`.
    pub fn basis(modes: usize, k: usize) -> Result<Self> {
        if k == 0 || k > modes {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: format!("mode index {k} outside 1..={modes}"),
            });
        }
        let mut s = Self::zeros(modes);
        s.coeffs[k - 1] = 1.0;
        Ok(s)
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((i, c)) = self.coeffs.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(Error::InvalidState(format!(
                "coefficient {} is {c}",
                i + 1
            )));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// `‖u‖_X`.
    pub fn norm(&self) -> f64 {
        norm_x(&self.coeffs)
    }

    /// `‖u‖_{X_η} = ‖(−Δ)^η u‖_X`.
    pub fn norm_eta(&self, eta: f64) -> f64 {
        norm_eta(&self.coeffs, eta)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SpectralState {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.modes(), other.modes());
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (FRAC_PI_2 * s).sqrt()
    }

    pub fn check_modes(&self, modes: usize) -> Result<()> {
        if self.modes() != modes {
            return Err(Error::DimensionMismatch {
                expected: modes,
                got: self.modes(),
            });
        }
        Ok(())
    }
}

impl Add for &SpectralState {
    type Output = SpectralState;
    fn add(self, rhs: Self) -> SpectralState {
        SpectralState {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &SpectralState {
    type Output = SpectralState;
    fn sub(self, rhs: Self) -> SpectralState {
        SpectralState {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

pub fn norm_x(coeffs: &[f64]) -> f64 {
    (FRAC_PI_2 * coeffs.iter().map(|c| c * c).sum::<f64>()).sqrt()
}

pub fn norm_eta(coeffs: &[f64], eta: f64) -> f64 {
    let s: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| eigenvalue(i + 1).powf(2.0 * eta) * c * c)
        .sum();
    (FRAC_PI_2 * s).sqrt()
}

/// Type-I discrete sine transform between coefficients and the values at
/// the interior collocation points `x_j = jπ/(K+1)`.
///
/// The transform is orthogonal up to the factor `(K+1)/2`, so pointwise maps
/// with Lipschitz constant `L` are `L`-Lipschitz in the coefficient norm.
#[derive(Clone)]
pub struct SineTransform {
    modes: usize,
    plan: Arc<dyn Dst1<f64>>,
    scratch: Vec<f64>,
}

impl std::fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SineTransform").field("modes", &self.modes).finish()
    }
}

impl SineTransform {
    pub fn new(modes: usize) -> Self {
        let plan = DctPlanner::new().plan_dst1(modes);
        let scratch = vec![0.0; plan.get_scratch_len()];
        SineTransform { modes, plan, scratch }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = PI / (self.modes + 1) as f64;
        (1..=self.modes).map(|j| j as f64 * h).collect()
    }

    /// Coefficients to nodal values.
    pub fn to_values(&mut self, coeffs: &[f64], values: &mut [f64]) {
        values.copy_from_slice(coeffs);
        self.dst(values);
    }

    fn dst(&mut self, buf: &mut [f64]) {
        // the FFT-backed plan reads two scratch cells it never writes
        self.scratch.fill(0.0);
        self.plan.process_dst1_with_scratch(buf, &mut self.scratch);
    }

    /// Nodal values to coefficients.
    pub fn to_coeffs(&mut self, values: &[f64], coeffs: &mut [f64]) {
        let scale = 2.0 / (self.modes + 1) as f64;
        coeffs.copy_from_slice(values);
        self.dst(coeffs);
        coeffs.iter_mut().for_each(|c| *c *= scale);
    }
}
