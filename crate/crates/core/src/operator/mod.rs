//! The random generator `A(θ_t ω) = Δ + a(θ_t ω)` and its evolution system.
//!
//! `A` is diagonal in the sine basis, so `U(t, s, ω)` acts by the scalar
//! multipliers `m_k(t, s) = exp(−μ_k (t − s) + ∫_s^t a(θ_τ ω) dτ)`. The
//! potential integral is a composite trapezoid on the noise grid, stored as a
//! cumulative table over base nodes; every shifted view shares the table, so
//! `U(t + s, s, ω) = U(t, 0, θ_s ω)` holds exactly on nodes.

mod estimates;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::noise::{node_offset, NoisePath, OuParams};
use crate::quadrature::linear_fit;
use crate::spectral::{eigenvalue, SpectralState};

pub use estimates::{
    decay_constant, verify_decay_estimates, DecayEstimate, DecayReport, DecayRow, DecaySample,
    EstimateConstants,
};

/// `a = a0 + eps · tanh(z)` with `z` the OU process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub a0: f64,
    pub eps: f64,
    pub ou: OuParams,
}

impl Potential {
    pub fn new(a0: f64, eps: f64, ou: OuParams) -> Result<Self> {
        let p = Potential { a0, eps, ou };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a0.is_finite() || !self.eps.is_finite() {
            return Err(param("a0/eps", "must be finite"));
        }
        if self.a0 + self.eps.abs() >= 1.0 {
            return Err(Error::Condition {
                condition: "U",
                detail: format!(
                    "a0 + |eps| = {} must stay below the first Dirichlet eigenvalue 1 for uniform exponential stability",
                    self.a0 + self.eps.abs()
                ),
            });
        }
        self.ou.validate()
    }

    /// Uniform bound `sup a ≤ a0 + |eps|`.
    pub fn upper_bound(&self) -> f64 {
        self.a0 + self.eps.abs()
    }

    /// Uniform bound `inf a ≥ a0 − |eps|`.
    pub fn lower_bound(&self) -> f64 {
        self.a0 - self.eps.abs()
    }

    /// Decay rate `λ = 1 − a0 − |eps|`.
    pub fn lambda(&self) -> f64 {
        1.0 - self.upper_bound()
    }

    #[inline]
    pub fn of(&self, z: f64) -> f64 {
        self.a0 + self.eps * z.tanh()
    }
}

/// Potential values and their running trapezoid integral on base nodes.
#[derive(Debug)]
struct PotentialTable {
    first_base: usize,
    z: Vec<f64>,
    a: Vec<f64>,
    cum: Vec<f64>,
}

/// `A(θ_t ω)` for one noise fiber, viewed from the path's origin.
#[derive(Debug, Clone)]
pub struct GeneratorFamily {
    modes: usize,
    potential: Potential,
    path: NoisePath,
    table: Arc<PotentialTable>,
}

impl GeneratorFamily {
    pub fn new(modes: usize, potential: Potential, path: &NoisePath) -> Result<Self> {
        if modes == 0 {
            return Err(param("modes", "need at least one mode"));
        }
        potential.validate()?;
        let series = path.ou_series(&potential.ou)?;
        let z = series.values.clone();
        let a: Vec<f64> = z.iter().map(|&v| potential.of(v)).collect();
        let h = path.dt();
        let mut cum = Vec::with_capacity(a.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in a.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cum.push(acc);
        }
        Ok(GeneratorFamily {
            modes,
            potential,
            path: path.clone(),
            table: Arc::new(PotentialTable {
                first_base: series.first_base,
                z,
                a,
                cum,
            }),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn potential_params(&self) -> &Potential {
        &self.potential
    }

    pub fn path(&self) -> &NoisePath {
        &self.path
    }

    pub fn lambda(&self) -> f64 {
        self.potential.lambda()
    }

    pub fn dt(&self) -> f64 {
        self.path.dt()
    }

    /// The same generator read along `θ_s ω`.
    pub fn shifted(&self, s: f64) -> Result<Self> {
        Ok(GeneratorFamily {
            modes: self.modes,
            potential: self.potential,
            path: self.path.shift(s)?,
            table: Arc::clone(&self.table),
        })
    }

    /// Earliest view time with enough OU history.
    pub fn earliest(&self) -> f64 {
        (self.table.first_base as f64 - self.path.origin_index() as f64) * self.dt()
    }

    pub fn latest(&self) -> f64 {
        self.path.grid().t_max
    }

    /// Table index of view node `i`.
    pub(crate) fn table_index(&self, i: isize) -> Result<usize> {
        let t = i as f64 * self.dt();
        let b = self.path.base_index(i).ok_or_else(|| {
            let g = self.path.grid();
            Error::OutOfRange {
                t,
                t_min: g.t_min,
                t_max: g.t_max,
            }
        })?;
        b.checked_sub(self.table.first_base)
            .ok_or(Error::InsufficientHistory {
                t,
                needed: t - self.potential.ou.truncation_horizon,
                available: self.path.grid().t_min,
            })
    }

    /// Nearest view node to `t`.
    pub fn snap(&self, t: f64) -> Result<isize> {
        if !t.is_finite() {
            return Err(param("t", "must be finite"));
        }
        Ok(node_offset(t, self.dt()).unwrap_or_else(|| (t / self.dt()).round() as isize))
    }

    /// `a(θ_t ω)`; off-node times interpolate the OU value linearly.
    pub fn potential(&self, t: f64) -> Result<f64> {
        if let Some(i) = node_offset(t, self.dt()) {
            return Ok(self.table.a[self.table_index(i)?]);
        }
        let r = t / self.dt();
        let i = r.floor();
        let w = r - i;
        let l = self.table_index(i as isize)?;
        let r = self.table_index(i as isize + 1)?;
        let z = self.table.z[l] + w * (self.table.z[r] - self.table.z[l]);
        Ok(self.potential.of(z))
    }

    #[inline]
    pub(crate) fn potential_at_index(&self, ti: usize) -> f64 {
        self.table.a[ti]
    }

    /// `∫_{t_i}^{t_i + τ} a` for any `τ ≥ 0`, integrating the piecewise-linear
    /// interpolant exactly; agrees with the trapezoid table on nodes.
    pub(crate) fn int_a_span(&self, i: isize, tau: f64) -> Result<f64> {
        let dt = self.dt();
        let full = ((tau / dt) * (1.0 + 1e-12)).floor() as isize;
        let rest = (tau - full as f64 * dt).max(0.0);
        let ti = self.table_index(i)?;
        let tj = self.table_index(i + full)?;
        let mut v = self.int_a_index(ti, tj);
        if rest > 0.0 {
            let a0 = self.table.a[tj];
            let a1 = self.table.a[self.table_index(i + full + 1)?];
            v += a0 * rest + (a1 - a0) * rest * rest / (2.0 * dt);
        }
        Ok(v)
    }

    /// `∫ a(θ_τ ω) dτ` between view nodes `i ≤ j`.
    #[inline]
    pub(crate) fn int_a_index(&self, ti: usize, tj: usize) -> f64 {
        self.table.cum[tj] - self.table.cum[ti]
    }

    /// Mode-wise `(−μ_k + a(θ_t ω)) u_k`.
    pub fn apply_a(&self, u: &SpectralState, t: f64) -> Result<SpectralState> {
        u.check_modes(self.modes)?;
        u.validate()?;
        let a = self.potential(t)?;
        Ok(SpectralState::from_vec_unchecked(
            u.coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| (-eigenvalue(i + 1) + a) * c)
                .collect(),
        ))
    }

    /// `(−Δ)^α u`; `t` is ignored under the frozen-base convention.
    pub fn fractional_power(&self, u: &SpectralState, alpha: f64, _t: f64) -> Result<SpectralState> {
        fractional_power(u, alpha)
    }

    /// `m_k(t, s)`, `k = 1..K`, with `s, t` snapped to grid nodes.
    pub fn evolution_multipliers(&self, t: f64, s: f64) -> Result<Vec<f64>> {
        if s > t {
            return Err(param("s", format!("need s <= t, got s = {s} > t = {t}")));
        }
        let (i, j) = (self.snap(s)?, self.snap(t)?);
        self.multipliers_nodes(i, j)
    }

    pub(crate) fn multipliers_nodes(&self, i: isize, j: isize) -> Result<Vec<f64>> {
        let (ti, tj) = (self.table_index(i)?, self.table_index(j)?);
        let tau = (j - i) as f64 * self.dt();
        let ia = self.int_a_index(ti, tj);
        Ok((1..=self.modes)
            .map(|k| (-eigenvalue(k) * tau + ia).exp())
            .collect())
    }

    /// `U(t, s, ω) u`.
    pub fn evolve(&self, u: &SpectralState, t: f64, s: f64) -> Result<SpectralState> {
        u.check_modes(self.modes)?;
        let m = self.evolution_multipliers(t, s)?;
        Ok(SpectralState::from_vec_unchecked(
            u.coeffs().iter().zip(&m).map(|(c, m)| c * m).collect(),
        ))
    }

    /// Fits `|a(θ_t ω) − a(θ_s ω)| ≈ C |t − s|^ν` by log-log least squares.
    ///
    /// `‖A(t) − A(s)‖` equals `|a(t) − a(s)|` because the difference is a
    /// multiple of the identity.
    pub fn check_holder(&self, pairs: &[(f64, f64)]) -> Result<HolderFit> {
        if pairs.len() < 8 {
            return Err(param("sample_pairs", format!("need at least 8 pairs, got {}", pairs.len())));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut max_diff = 0.0_f64;
        for &(s, t) in pairs {
            let d = (self.potential(t)? - self.potential(s)?).abs();
            max_diff = max_diff.max(d);
            let lag = (t - s).abs();
            if d > 0.0 && lag > 0.0 {
                xs.push(lag.ln());
                ys.push(d.ln());
            }
        }
        if max_diff == 0.0 {
            return Ok(HolderFit {
                nu: None,
                constant: 0.0,
                exact_constancy: true,
                pairs_used: 0,
            });
        }
        if xs.len() < 2 {
            return Err(Error::Degenerate("fewer than two pairs with distinct lags and values".into()));
        }
        let (a, b, _) = linear_fit(&xs, &ys);
        Ok(HolderFit {
            nu: Some(b),
            constant: a.exp(),
            exact_constancy: false,
            pairs_used: xs.len(),
        })
    }
}

/// Mode-wise `μ_k^α u_k` for `α ∈ (−1, 1]`.
pub fn fractional_power(u: &SpectralState, alpha: f64) -> Result<SpectralState> {
    if !(alpha > -1.0 && alpha <= 1.0) {
        return Err(param("alpha", format!("must lie in (-1, 1], got {alpha}")));
    }
    u.validate()?;
    Ok(SpectralState::from_vec_unchecked(
        u.coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| eigenvalue(i + 1).powf(alpha) * c)
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    /// `None` when the potential is exactly constant on the sample.
    pub nu: Option<f64>,
    pub constant: f64,
    pub exact_constancy: bool,
    pub pairs_used: usize,
}
