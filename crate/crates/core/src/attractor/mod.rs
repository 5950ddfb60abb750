//! Absorbing radius, smoothing constant, covering numbers, dimension bounds
//! and empirical pullback attractors.

mod absorbing;
mod covering;
mod dimension;
mod rate;
mod smoothing;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::io::csv_row;
use crate::operator::GeneratorFamily;
use crate::solver::{pathwise_mild_solve, Fiber, Nonlinearity, SolverParams};
use crate::spectral::SpectralState;

pub use absorbing::{
    absorbing_bound, absorbing_radius, absorbing_time, check_absorbing, noise_c_tilde, AbsorbingCheck,
    AbsorbingComponents, AbsorbingOptions, AbsorbingRow, AbsorbingSpec,
};
pub use covering::{
    covering_number, entropy_slope, greedy_cover, greedy_packing, semi_axis, CoveringBound, CoveringMethod,
    BRUTE_FORCE_MODES,
};
pub use dimension::{
    box_counting, dimension_bound, nu_sweep, BoxCounting, DimensionBound, DimensionReport, NuSweep, MIN_POINTS,
};
pub use rate::{attraction_rate, hausdorff_semidistance, RateFit};
pub use smoothing::{smoothing_constant, SmoothingConstant};

/// Law of the initial data fed into a pullback run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    Origin,
    /// Gaussian coefficients damped by `k^{−smoothness}`, rescaled to X-norm `radius`.
    Sphere { radius: f64, smoothness: f64 },
    /// As `Sphere` with the norm drawn uniformly from `[0, radius]`.
    Ball { radius: f64, smoothness: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    pub law: InitialLaw,
    pub count: usize,
    pub seed: u64,
}

impl Ensemble {
    pub fn radius(&self) -> f64 {
        match self.law {
            InitialLaw::Origin => 0.0,
            InitialLaw::Sphere { radius, .. } | InitialLaw::Ball { radius, .. } => radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(param("ensemble.count", "must be positive"));
        }
        match self.law {
            InitialLaw::Origin => Ok(()),
            InitialLaw::Sphere { radius, smoothness } | InitialLaw::Ball { radius, smoothness } => {
                if !(radius >= 0.0 && radius.is_finite()) {
                    return Err(param("ensemble.radius", "must be finite and non-negative"));
                }
                if !smoothness.is_finite() {
                    return Err(param("ensemble.smoothness", "must be finite"));
                }
                Ok(())
            }
        }
    }

    pub fn sample(&self, modes: usize) -> Result<Vec<SpectralState>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.count);
        for _ in 0..self.count {
            let (radius, smoothness, ball) = match self.law {
                InitialLaw::Origin => {
                    out.push(SpectralState::zeros(modes));
                    continue;
                }
                InitialLaw::Sphere { radius, smoothness } => (radius, smoothness, false),
                InitialLaw::Ball { radius, smoothness } => (radius, smoothness, true),
            };
            let coeffs: Vec<f64> = (1..=modes)
                .map(|k| rng.sample::<f64, _>(StandardNormal) * (k as f64).powf(-smoothness))
                .collect();
            let dir = SpectralState::from_vec_unchecked(coeffs);
            let n = dir.norm();
            let target = if ball { radius * rng.random::<f64>() } else { radius };
            out.push(if n > 0.0 { dir.scaled(target / n) } else { dir });
        }
        Ok(out)
    }
}

/// Terminal states `φ(T, θ_{−T} ω, u₀)` over an ensemble of initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorCloud {
    pub points: Vec<SpectralState>,
    pub pullback_time: f64,
    pub fiber: Fiber,
    pub ensemble: Ensemble,
    pub max_norm: f64,
    /// `ρ + δ` the points were checked against, if any.
    pub radius: Option<f64>,
}

impl AttractorCloud {
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0_f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.max(a.distance(b));
            }
        }
        d
    }

    /// One row per point: `index,c1..cK`.
    pub fn to_csv(&self) -> String {
        let k = self.points.first().map_or(0, |p| p.modes());
        let mut out = String::from("index");
        for i in 1..=k {
            out.push_str(&format!(",c{i}"));
        }
        out.push('\n');
        for (i, p) in self.points.iter().enumerate() {
            out.push_str(&format!("{i},"));
            out.push_str(&csv_row(p.coeffs().iter().copied()));
            out.push('\n');
        }
        out
    }
}

/// Runs every ensemble member from the fiber `θ_{−T} ω` for time `T`.
///
/// With `absorbing` given, every terminal state must lie in the ball
/// `B(0, ρ + δ)`; `T` should then be at least the absorbing time of the
/// ensemble (see [`absorbing_time`]).
#[allow(clippy::too_many_arguments)]
pub fn pullback_cloud(
    ensemble: &Ensemble,
    pullback: f64,
    gen: &GeneratorFamily,
    f: &Nonlinearity,
    sigma: f64,
    params: &SolverParams,
    absorbing: Option<&AbsorbingSpec>,
) -> Result<AttractorCloud> {
    if !(pullback >= 0.0) {
        return Err(param("pullback", "must be non-negative"));
    }
    let initial = ensemble.sample(gen.modes())?;
    let start = gen.shifted(-pullback)?;
    let mut p = *params;
    p.record_every = usize::MAX;
    let points: Vec<SpectralState> = initial
        .par_iter()
        .map(|u0| Ok(pathwise_mild_solve(u0, pullback, &start, f, sigma, &p)?.last().clone()))
        .collect::<Result<_>>()?;
    let max_norm = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let radius = absorbing.map(|s| s.radius());
    if let Some(r) = radius {
        if max_norm > r {
            return Err(Error::NotAbsorbed { max_norm, radius: r });
        }
    }
    Ok(AttractorCloud {
        points,
        pullback_time: pullback,
        fiber: Fiber {
            seed: gen.path().seed(),
            shift: gen.path().shift_offset(),
        },
        ensemble: *ensemble,
        max_norm,
        radius,
    })
}
