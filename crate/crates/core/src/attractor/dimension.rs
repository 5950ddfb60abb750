use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::covering::{covering_number, CoveringBound};
use crate::error::{param, Result};
use crate::quadrature::linear_fit;
use crate::spectral::SpectralState;

/// Minimum cloud size accepted by [`box_counting`].
pub const MIN_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionBound {
    pub nu: f64,
    pub eta: f64,
    pub kappa: f64,
    pub covering: CoveringBound,
    /// `log_{1/(2ν)} N_{ν/κ}`.
    pub bound: f64,
}

/// Fractal-dimension bound `log_{1/(2ν)} N_{ν/κ}(B^{X_η}(0,1))`.
pub fn dimension_bound(nu: f64, eta: f64, kappa: f64, modes: usize) -> Result<DimensionBound> {
    if !(nu > 0.0 && nu < 0.5) {
        return Err(param("nu", format!("must lie in (0, 1/2), got {nu}")));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(param("kappa", format!("must be positive, got {kappa}")));
    }
    let covering = covering_number(eta, nu / kappa, modes)?;
    Ok(DimensionBound {
        nu,
        eta,
        kappa,
        covering,
        bound: covering.log_upper / (1.0 / (2.0 * nu)).ln(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuSweep {
    pub rows: Vec<DimensionBound>,
    pub argmin: f64,
    pub min_bound: f64,
}

/// Evaluates the bound over a grid of `ν` and reports the smallest value.
pub fn nu_sweep(nus: &[f64], eta: f64, kappa: f64, modes: usize) -> Result<NuSweep> {
    if nus.is_empty() {
        return Err(param("nu_grid", "must not be empty"));
    }
    let rows: Vec<DimensionBound> = nus
        .iter()
        .map(|&nu| dimension_bound(nu, eta, kappa, modes))
        .collect::<Result<_>>()?;
    let best = rows
        .iter()
        .min_by(|a, b| a.bound.total_cmp(&b.bound))
        .expect("non-empty");
    Ok(NuSweep {
        argmin: best.nu,
        min_bound: best.bound,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCounting {
    pub dim: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub eps: Vec<f64>,
    pub counts: Vec<usize>,
    pub modes_used: Vec<usize>,
    /// All points coincide; `dim` is 0.
    pub degenerate: bool,
}

/// Box-counting slope of `log N_ε` against `log(1/ε)` with a 95% interval.
///
/// Boxes live in the scaled coordinates where the X-norm is Euclidean. For
/// each `ε` only the leading `m` modes are boxed, `m` the smallest count
/// for which every point's remaining energy is below `ε²/4`.
pub fn box_counting(points: &[SpectralState], eps_range: &[f64]) -> Result<BoxCounting> {
    if points.len() < MIN_POINTS {
        return Err(param("points", format!("need at least {MIN_POINTS}, got {}", points.len())));
    }
    if eps_range.len() < 3 || eps_range.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(param("eps_range", "need at least three positive radii"));
    }
    let lo = eps_range.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eps_range.iter().copied().fold(0.0, f64::max);
    if hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(param("eps_range", "must span at least one decade"));
    }
    let k = points[0].modes();
    for p in points {
        p.check_modes(k)?;
    }
    let degenerate = points.iter().all(|p| p == &points[0]);
    if degenerate {
        return Ok(BoxCounting {
            dim: 0.0,
            ci_low: 0.0,
            ci_high: 0.0,
            eps: eps_range.to_vec(),
            counts: vec![1; eps_range.len()],
            modes_used: vec![0; eps_range.len()],
            degenerate: true,
        });
    }
    let scale = std::f64::consts::FRAC_PI_2.sqrt();
    let scaled: Vec<Vec<f64>> = points.iter().map(|p| p.coeffs().iter().map(|c| c * scale).collect()).collect();
    // tails[m] = max over points of Σ_{k ≥ m} y_k²
    let mut tails = vec![0.0_f64; k + 1];
    for y in &scaled {
        let mut acc = 0.0;
        for m in (0..k).rev() {
            acc += y[m] * y[m];
            tails[m] = tails[m].max(acc);
        }
    }
    let mut counts = Vec::with_capacity(eps_range.len());
    let mut modes_used = Vec::with_capacity(eps_range.len());
    for &eps in eps_range {
        let m = (1..=k).find(|&m| tails[m] < eps * eps / 4.0).unwrap_or(k);
        let boxes: HashSet<Vec<i64>> = scaled
            .iter()
            .map(|y| y[..m].iter().map(|v| (v / eps).floor() as i64).collect())
            .collect();
        counts.push(boxes.len());
        modes_used.push(m);
    }
    let x: Vec<f64> = eps_range.iter().map(|e| (1.0 / e).ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (_, slope, se) = linear_fit(&x, &y);
    let t = StudentsT::new(0.0, 1.0, (x.len() - 2) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    Ok(BoxCounting {
        dim: slope,
        ci_low: slope - t * se,
        ci_high: slope + t * se,
        eps: eps_range.to_vec(),
        counts,
        modes_used,
        degenerate: false,
    })
}

/// Theoretical bound next to the empirical dimension of a cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub nu: f64,
    pub eta: f64,
    pub kappa: f64,
    pub log_covering_count: f64,
    pub bound: f64,
    pub empirical_dim: Option<f64>,
    pub empirical_ci: Option<(f64, f64)>,
    pub eps_range: Vec<f64>,
    pub sweep: NuSweep,
}

impl DimensionReport {
    pub fn new(sweep: NuSweep, empirical: Option<&BoxCounting>) -> Self {
        let best = *sweep
            .rows
            .iter()
            .find(|r| r.nu == sweep.argmin)
            .expect("argmin is a row");
        DimensionReport {
            nu: best.nu,
            eta: best.eta,
            kappa: best.kappa,
            log_covering_count: best.covering.log_upper,
            bound: best.bound,
            empirical_dim: empirical.map(|b| b.dim),
            empirical_ci: empirical.map(|b| (b.ci_low, b.ci_high)),
            eps_range: empirical.map(|b| b.eps.clone()).unwrap_or_default(),
            sweep,
        }
    }

    /// Empirical dimension within the bound (true when none was measured).
    pub fn consistent(&self) -> bool {
        self.empirical_dim.is_none_or(|d| d <= self.bound)
    }
}
