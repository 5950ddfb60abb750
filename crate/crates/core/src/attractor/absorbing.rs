use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{param, Error, Result};
use crate::noise::{NoisePath, Space};
use crate::operator::{decay_constant, EstimateConstants, GeneratorFamily};
use crate::quadrature::GaussLegendre;
use crate::solver::{pathwise_mild_solve, Fiber, Nonlinearity, SolverParams};
use crate::spectral::SpectralState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbsorbingOptions {
    /// `δ = delta_fraction · ρ`.
    pub delta_fraction: f64,
    /// `δ` used when `ρ = 0`.
    pub delta_floor: f64,
    /// Largest admissible tail bound relative to `ρ`.
    pub tail_limit: f64,
    /// Graded Gauss–Legendre cells on the step next to `s = 0`.
    pub refinement: usize,
    /// Length of history used; `None` takes everything the path has.
    pub history: Option<f64>,
}

impl Default for AbsorbingOptions {
    fn default() -> Self {
        AbsorbingOptions {
            delta_fraction: 0.05,
            delta_floor: 1e-6,
            tail_limit: 1e-6,
            refinement: 8,
            history: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingComponents {
    /// `c C̄_F / (λ − c C_F)`.
    pub drift: f64,
    /// `c C_F σ ĉ ∫ e^{c C_F s} ‖ω(s)‖_{X_β} ds`.
    pub ou_convolution: f64,
    /// `σ C̃_{1−β} λ / (λ − c C_F) ∫ e^{λ s} (−s)^{β−1} ‖ω(s)‖_{X_β} ds`.
    pub singular_convolution: f64,
}

impl AbsorbingComponents {
    pub fn sum(&self) -> f64 {
        self.drift + self.ou_convolution + self.singular_convolution
    }
}

/// The absorbing ball `B(0, ρ(ω) + δ)` with an audit trail for `ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingSpec {
    pub rho: f64,
    pub delta: f64,
    pub components: AbsorbingComponents,
    /// Bounds on the two improper integrals beyond the truncation point,
    /// already multiplied by their prefactors.
    pub tail_ou: f64,
    pub tail_singular: f64,
    /// Estimated error of the singular quadrature on the first step.
    pub quadrature_error: f64,
    pub history: f64,
    /// `G` in the envelope `‖ω(s)‖_{X_β} ≤ G √|s|` used for the tails.
    pub growth: f64,
    /// `C̃_{1−β}` as used, including the factor for negative potentials.
    pub c_tilde: f64,
    pub fiber: Fiber,
}

impl AbsorbingSpec {
    pub fn radius(&self) -> f64 {
        self.rho + self.delta
    }

    pub fn relative_tail(&self) -> f64 {
        if self.rho > 0.0 {
            (self.tail_ou + self.tail_singular) / self.rho
        } else {
            0.0
        }
    }
}

/// `C̃_{1−β}` for the noise convolution on `(0, window]`.
///
/// Mode-wise the convolution multiplies `ω_k` by `|μ_k − a|`, which exceeds
/// `μ_k` by at most `max(0, −a_min)`; that factor is folded in here.
pub fn noise_c_tilde(constants: &EstimateConstants, window: f64) -> f64 {
    let p = 1.0 - constants.beta;
    let base = match constants.c_tilde(p) {
        Some(c) => c.value,
        None => decay_constant(p, constants.lambda, constants.a_max, constants.modes, window),
    };
    base * (1.0 + (-constants.a_min).max(0.0))
}

/// `ρ(ω)` with both improper integrals truncated at the start of the
/// available history.
///
/// `‖ω(s)‖_{X_β}` is taken at the nodes and interpolated linearly. Cells are
/// integrated by 8-point Gauss–Legendre; the cell touching `s = 0` is split
/// into cells halving towards the singularity and its error estimated
/// against 4 points. The tails beyond the history use the envelope
/// `G √|s|`, `G` the largest ratio `‖ω(s)‖/√|s|` over the older half of the
/// history, and are integrated exactly with incomplete gamma functions.
pub fn absorbing_radius(
    path: &NoisePath,
    constants: &EstimateConstants,
    options: &AbsorbingOptions,
) -> Result<AbsorbingSpec> {
    constants.validate()?;
    if !(options.delta_fraction > 0.0 && options.delta_floor > 0.0) {
        return Err(param("delta", "margin must be positive"));
    }
    if options.refinement == 0 {
        return Err(param("refinement", "must be at least 1"));
    }
    let h = path.dt();
    let available = path.grid().origin();
    let steps = match options.history {
        Some(len) => {
            if !(len > 0.0) {
                return Err(param("history", "must be positive"));
            }
            let n = (len / h).round() as usize;
            if n > available {
                return Err(Error::InsufficientHistory {
                    t: 0.0,
                    needed: -len,
                    available: path.grid().t_min,
                });
            }
            n
        }
        None => available,
    };
    if steps < 2 {
        return Err(param("history", "path has no past to integrate over"));
    }
    let history = steps as f64 * h;
    let beta = path.beta();
    let (c, lambda, gap) = (constants.c, constants.lambda, constants.gap());
    let sigma = constants.sigma;
    let r = c * constants.c_f;
    let c_tilde = noise_c_tilde(constants, history);

    let drift = c * constants.c_f_bar / gap;
    let ou_coef = r * sigma * constants.c_hat;
    let sing_coef = sigma * c_tilde * lambda / gap;

    let fiber = Fiber {
        seed: path.seed(),
        shift: path.shift_offset(),
    };
    if sigma == 0.0 {
        let components = AbsorbingComponents {
            drift,
            ou_convolution: 0.0,
            singular_convolution: 0.0,
        };
        return Ok(finish(components, 0.0, 0.0, 0.0, history, 0.0, c_tilde, fiber, options));
    }

    // norms[j] = ‖ω(−j h)‖_{X_β}
    let norms = path.history_norms(beta, steps)?;
    let gl = GaussLegendre::new(8);
    let gl4 = GaussLegendre::new(4);
    let mut ou = 0.0;
    let mut sing = 0.0;
    // cell j covers x = −s ∈ [(j−1)h, jh]
    for j in 2..=steps {
        let (x0, x1) = ((j - 1) as f64 * h, j as f64 * h);
        let (n0, n1) = (norms[j - 1], norms[j]);
        let lin = |x: f64| n0 + (n1 - n0) * (x - x0) / h;
        if ou_coef > 0.0 {
            ou += gl.integrate(x0, x1, |x| (-r * x).exp() * lin(x));
        }
        sing += gl.integrate(x0, x1, |x| (-lambda * x).exp() * x.powf(beta - 1.0) * lin(x));
    }
    let n1 = norms[1];
    let first_ou = gl.integrate(0.0, h, |x| (-r * x).exp() * n1 * x / h);
    ou += first_ou;
    let f_sing = |x: f64| (-lambda * x).exp() * x.powf(beta) * n1 / h;
    let (mut first, mut coarse) = (0.0, 0.0);
    let mut hi = h;
    for i in 0..options.refinement {
        let lo = if i + 1 == options.refinement { 0.0 } else { 0.5 * hi };
        first += gl.integrate(lo, hi, f_sing);
        coarse += gl4.integrate(lo, hi, f_sing);
        hi = lo;
    }
    sing += first;
    let quadrature_error = sing_coef * (first - coarse).abs();

    let older = &norms[steps / 2..];
    let growth = older
        .iter()
        .enumerate()
        .map(|(i, n)| n / (((steps / 2 + i) as f64) * h).sqrt())
        .fold(0.0, f64::max);
    let tail_ou = if ou_coef > 0.0 {
        ou_coef * growth * gamma(1.5) * gamma_ur(1.5, r * history) / r.powf(1.5)
    } else {
        0.0
    };
    let q = beta + 0.5;
    let tail_singular = sing_coef * growth * gamma(q) * gamma_ur(q, lambda * history) / lambda.powf(q);

    let components = AbsorbingComponents {
        drift,
        ou_convolution: ou_coef * ou,
        singular_convolution: sing_coef * sing,
    };
    let spec = finish(
        components,
        tail_ou,
        tail_singular,
        quadrature_error,
        history,
        growth,
        c_tilde,
        fiber,
        options,
    );
    let rel = spec.relative_tail();
    if rel > options.tail_limit {
        return Err(Error::ShallowHistory {
            tail: rel,
            limit: options.tail_limit,
        });
    }
    Ok(spec)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    components: AbsorbingComponents,
    tail_ou: f64,
    tail_singular: f64,
    quadrature_error: f64,
    history: f64,
    growth: f64,
    c_tilde: f64,
    fiber: Fiber,
    options: &AbsorbingOptions,
) -> AbsorbingSpec {
    let rho = components.sum();
    let delta = if rho > 0.0 {
        options.delta_fraction * rho
    } else {
        options.delta_floor
    };
    AbsorbingSpec {
        rho,
        delta,
        components,
        tail_ou,
        tail_singular,
        quadrature_error,
        history,
        growth,
        c_tilde,
        fiber,
    }
}

/// Right-hand side of the absorbing estimate at pullback time `t`:
/// `e^{−(λ − cC_F) t} (2c ‖u₀‖ + σ ĉ ‖ω(−t)‖_{X_β}) + ρ(ω)`.
pub fn absorbing_bound(constants: &EstimateConstants, rho: f64, u0_norm: f64, t: f64, noise_norm: f64) -> f64 {
    (-constants.gap() * t).exp()
        * (2.0 * constants.c * u0_norm + constants.sigma * constants.c_hat * noise_norm)
        + rho
}

/// Empirical absorbing time of a ball of radius `radius` on the fiber
/// `path`: the first node after which
/// `e^{−(λ − cC_F) t} (2c R + σ ĉ ‖ω(−t)‖_{X_β}) < δ` holds for all
/// remaining history.
pub fn absorbing_time(
    path: &NoisePath,
    constants: &EstimateConstants,
    radius: f64,
    delta: f64,
    horizon: f64,
) -> Result<f64> {
    let h = path.dt();
    let steps = (horizon / h).round() as usize;
    let norms = path.history_norms(path.beta(), steps)?;
    let last_fail = norms.iter().enumerate().rev().find(|(j, n)| {
        absorbing_bound(constants, 0.0, radius, *j as f64 * h, **n) >= delta
    });
    match last_fail {
        None => Ok(0.0),
        Some((j, _)) if j == steps => Err(Error::InsufficientHistory {
            t: 0.0,
            needed: -horizon,
            available: path.grid().t_min,
        }),
        Some((j, _)) => Ok((j + 1) as f64 * h),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingRow {
    pub u0_norm: f64,
    pub t: f64,
    pub norm: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingCheck {
    pub rows: Vec<AbsorbingRow>,
    pub violations: usize,
    /// `ρ` on each checkpoint fiber `θ_{t−T} ω`.
    pub specs: Vec<AbsorbingSpec>,
}

/// Checks the absorbing estimate along forward runs started on `θ_{−T} ω`.
///
/// The state after time `t` is the pullback `φ(t, θ_{−t} ω', u₀)` on the fiber
/// `ω' = θ_{t−T} ω`, so each checkpoint tests the estimate with that fiber's
/// `ρ` and noise value. `gen` must hold `T` plus `options.history` of past.
#[allow(clippy::too_many_arguments)]
pub fn check_absorbing(
    gen: &GeneratorFamily,
    f: &Nonlinearity,
    constants: &EstimateConstants,
    options: &AbsorbingOptions,
    params: &SolverParams,
    initial: &[SpectralState],
    pullback: f64,
    checkpoints: usize,
) -> Result<AbsorbingCheck> {
    if initial.is_empty() || checkpoints == 0 {
        return Err(param("initial/checkpoints", "need at least one of each"));
    }
    let steps = (pullback / params.dt).round() as usize;
    if !steps.is_multiple_of(checkpoints) {
        return Err(param("checkpoints", "must divide the number of solver steps"));
    }
    let mut p = *params;
    p.record_every = steps / checkpoints;
    let start = gen.shifted(-pullback)?;
    let times: Vec<f64> = (1..=checkpoints).map(|i| (i * p.record_every) as f64 * p.dt).collect();

    let fibers: Vec<(AbsorbingSpec, f64)> = times
        .par_iter()
        .map(|&t| {
            let fiber = gen.path().shift(t - pullback)?;
            let spec = absorbing_radius(&fiber, constants, options)?;
            let w = fiber.evaluate(-t, Space::XBeta)?.norm;
            Ok((spec, w))
        })
        .collect::<Result<_>>()?;

    let runs: Vec<Vec<AbsorbingRow>> = initial
        .par_iter()
        .map(|u0| {
            let traj = pathwise_mild_solve(u0, pullback, &start, f, constants.sigma, &p)?;
            let u0_norm = u0.norm();
            Ok(traj.states[1..]
                .iter()
                .zip(&times)
                .zip(&fibers)
                .map(|((s, &t), (spec, w))| AbsorbingRow {
                    u0_norm,
                    t,
                    norm: s.norm(),
                    bound: absorbing_bound(constants, spec.rho, u0_norm, t, *w),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<AbsorbingRow> = runs.into_iter().flatten().collect();
    let violations = rows.iter().filter(|r| r.norm > r.bound).count();
    Ok(AbsorbingCheck {
        rows,
        violations,
        specs: fibers.into_iter().map(|(s, _)| s).collect(),
    })
}
