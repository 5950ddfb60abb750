use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{param, Error, Result};
use crate::operator::GeneratorFamily;
use crate::quadrature::linear_fit;
use crate::solver::{pathwise_mild_solve, Nonlinearity, SolverParams};
use crate::spectral::SpectralState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Fitted `α̂` in `d(s) ≈ C e^{−α s}`.
    pub alpha: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub s_grid: Vec<f64>,
    pub distances: Vec<f64>,
    /// Lower end of the 95% interval is above zero.
    pub positive: bool,
}

/// `sup_{a ∈ A} inf_{b ∈ B} ‖a − b‖_X`.
pub fn hausdorff_semidistance(a: &[SpectralState], b: &[SpectralState]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| x.distance(y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Exponential rate at which `φ(s, θ_{−s} ω, D)` approaches the proxy set on
/// the fiber `ω`, fitted by least squares on `log d(s)`.
#[allow(clippy::too_many_arguments)]
pub fn attraction_rate(
    initial: &[SpectralState],
    proxy: &[SpectralState],
    s_grid: &[f64],
    gen: &GeneratorFamily,
    f: &Nonlinearity,
    sigma: f64,
    params: &SolverParams,
) -> Result<RateFit> {
    if proxy.is_empty() {
        return Err(param("proxy", "attractor proxy is empty"));
    }
    if initial.is_empty() {
        return Err(param("initial", "need at least one initial state"));
    }
    if s_grid.len() < 3 || s_grid.windows(2).any(|w| w[1] <= w[0]) || s_grid[0] < 0.0 {
        return Err(param("s_grid", "need at least three increasing non-negative times"));
    }
    let mut p = *params;
    p.record_every = usize::MAX;
    let distances: Vec<f64> = s_grid
        .par_iter()
        .map(|&s| {
            let start = gen.shifted(-s)?;
            let ends: Vec<SpectralState> = initial
                .iter()
                .map(|u0| Ok(pathwise_mild_solve(u0, s, &start, f, sigma, &p)?.last().clone()))
                .collect::<Result<_>>()?;
            Ok(hausdorff_semidistance(&ends, proxy))
        })
        .collect::<Result<_>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = s_grid
        .iter()
        .zip(&distances)
        .filter(|(_, d)| **d > 0.0)
        .map(|(s, d)| (*s, d.ln()))
        .unzip();
    if x.len() < 3 {
        return Err(Error::Degenerate("fewer than three positive distances".into()));
    }
    let (_, slope, se) = linear_fit(&x, &y);
    let t = StudentsT::new(0.0, 1.0, (x.len() - 2) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let alpha = -slope;
    Ok(RateFit {
        alpha,
        std_error: se,
        ci_low: alpha - t * se,
        ci_high: alpha + t * se,
        s_grid: s_grid.to_vec(),
        distances,
        positive: alpha - t * se > 0.0,
    })
}
