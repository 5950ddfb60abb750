use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pathwise_mild_solve, Nonlinearity, SolverParams};
use crate::error::{param, Result};
use crate::operator::GeneratorFamily;
use crate::spectral::SpectralState;

fn terminal(
    u0: &SpectralState,
    horizon: f64,
    gen: &GeneratorFamily,
    f: &Nonlinearity,
    sigma: f64,
    params: &SolverParams,
) -> Result<SpectralState> {
    let mut p = *params;
    p.record_every = usize::MAX;
    Ok(pathwise_mild_solve(u0, horizon, gen, f, sigma, &p)?.last().clone())
}

/// `‖φ(t+s, ω, u₀) − φ(t, θ_s ω, φ(s, ω, u₀))‖_X`.
#[allow(clippy::too_many_arguments)]
pub fn cocycle_defect(
    u0: &SpectralState,
    t: f64,
    s: f64,
    gen: &GeneratorFamily,
    f: &Nonlinearity,
    sigma: f64,
    params: &SolverParams,
) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(param("t/s", "must be non-negative"));
    }
    let whole = terminal(u0, t + s, gen, f, sigma, params)?;
    let first = terminal(u0, s, gen, f, sigma, params)?;
    let second = terminal(&first, t, &gen.shifted(s)?, f, sigma, params)?;
    Ok(whole.distance(&second))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzFit {
    pub l_hat: f64,
    /// `c e^{c C_F / λ}` with `c = 1`.
    pub bound: f64,
    pub ratios: Vec<f64>,
    pub violations: usize,
}

/// Largest observed `‖φ(t,ω,u₀) − φ(t,ω,v₀)‖ / ‖u₀ − v₀‖` over the pairs,
/// compared against `e^{C_F/λ}` with a 5% allowance.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_probe(
    gen: &GeneratorFamily,
    f: &Nonlinearity,
    sigma: f64,
    params: &SolverParams,
    pairs: &[(SpectralState, SpectralState)],
    t: f64,
) -> Result<LipschitzFit> {
    if pairs.is_empty() {
        return Err(param("pairs", "need at least one pair"));
    }
    if let Some(i) = pairs.iter().position(|(u, v)| u.distance(v) == 0.0) {
        return Err(param("pairs", format!("pair {i} has identical members")));
    }
    let ratios: Vec<f64> = pairs
        .par_iter()
        .map(|(u, v)| {
            let a = terminal(u, t, gen, f, sigma, params)?;
            let b = terminal(v, t, gen, f, sigma, params)?;
            Ok(a.distance(&b) / u.distance(v))
        })
        .collect::<Result<_>>()?;
    let bound = (f.lipschitz() / gen.lambda()).exp();
    let l_hat = ratios.iter().copied().fold(0.0, f64::max);
    let violations = ratios.iter().filter(|&&r| r > bound * 1.05).count();
    Ok(LipschitzFit {
        l_hat,
        bound,
        ratios,
        violations,
    })
}
