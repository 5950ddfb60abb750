//! Stationary Ornstein–Uhlenbeck potential driven by the scalar path.

use serde::{Deserialize, Serialize};

use super::NoisePath;
use crate::error::{param, Error, Result};

/// `dz = −μ z dt + dω̄`, with the improper integral cut at `truncation_horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub mu: f64,
    pub truncation_horizon: f64,
}

impl OuParams {
    pub fn new(mu: f64, truncation_horizon: f64) -> Result<Self> {
        let p = OuParams {
            mu,
            truncation_horizon,
        };
        p.validate()?;
        Ok(p)
    }

    /// Default horizon `10/μ`.
    pub fn with_default_horizon(mu: f64) -> Result<Self> {
        Self::new(mu, 10.0 / mu)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(param("mu", format!("must be positive, got {}", self.mu)));
        }
        if !(self.truncation_horizon * self.mu >= 10.0 * (1.0 - 1e-12)) {
            return Err(param(
                "truncation_horizon",
                format!("must be at least 10/mu = {}", 10.0 / self.mu),
            ));
        }
        Ok(())
    }

    /// Weight of the discarded tail, `e^{−μT}`.
    pub fn tail_mass(&self) -> f64 {
        (-self.mu * self.truncation_horizon).exp()
    }

    /// Number of grid steps kept in the truncated sum.
    pub(crate) fn steps(&self, dt: f64) -> usize {
        (self.truncation_horizon / dt - 1e-9).ceil() as usize
    }

    pub(crate) fn kernel(&self, dt: f64) -> Vec<f64> {
        (0..=self.steps(dt))
            .map(|m| (-self.mu * m as f64 * dt).exp())
            .collect()
    }
}

impl NoisePath {
    /// `z(θ_t ω) ≈ Σ_{t−T ≤ s_j < t} e^{−μ(t−s_j)} (ω̄(s_{j+1}) − ω̄(s_j))`.
    ///
    /// Only increments of the stored scalar path enter, so the value depends
    /// on the absolute base nodes and `z(θ_t ω) = z(θ_0 θ_t ω)` holds exactly.
    pub fn ou_potential(&self, params: &OuParams, t: f64) -> Result<f64> {
        params.validate()?;
        let g = self.grid();
        if !t.is_finite() || !g.contains(t) {
            return Err(Error::OutOfRange {
                t,
                t_min: g.t_min,
                t_max: g.t_max,
            });
        }
        let dt = g.dt;
        let m = params.steps(dt);
        let kernel = params.kernel(dt);
        let needed = t - m as f64 * dt;
        let at_node = |i: isize| -> Result<f64> {
            let b = self
                .base_index(i)
                .ok_or(Error::OutOfRange {
                    t,
                    t_min: g.t_min,
                    t_max: g.t_max,
                })?;
            if b < m {
                return Err(Error::InsufficientHistory {
                    t,
                    needed,
                    available: g.t_min,
                });
            }
            Ok(direct_sum(&self.data.scalar, b, &kernel))
        };
        if let Some(i) = super::node_offset(t, dt) {
            return at_node(i);
        }
        let r = t / dt;
        let i = r.floor();
        let w = r - i;
        let left = at_node(i as isize)?;
        let right = at_node(i as isize + 1)?;
        Ok(left + w * (right - left))
    }

    /// OU values at every base node with enough history.
    pub fn ou_series(&self, params: &OuParams) -> Result<OuSeries> {
        params.validate()?;
        let dt = self.dt();
        let m = params.steps(dt);
        let n = self.base_len();
        if m >= n {
            return Err(Error::InsufficientHistory {
                t: 0.0,
                needed: -(m as f64) * dt,
                available: self.grid().t_min,
            });
        }
        let s = &self.data.scalar;
        let kernel = params.kernel(dt);
        let decay = kernel[1];
        let drop = kernel[m] * decay;
        let mut z = Vec::with_capacity(n - m);
        let mut cur = direct_sum(s, m, &kernel);
        z.push(cur);
        for b in m..n - 1 {
            // z_{b+1} = e^{−μdt}(z_b + Δ_b) − e^{−μ(M+1)dt} Δ_{b−M}
            cur = decay * (cur + (s[b + 1] - s[b])) - drop * (s[b - m + 1] - s[b - m]);
            z.push(cur);
            if (b + 1 - m).is_multiple_of(RESYNC) {
                cur = direct_sum(s, b + 1, &kernel);
                *z.last_mut().unwrap() = cur;
            }
        }
        Ok(OuSeries {
            first_base: m,
            values: z,
        })
    }
}

/// Interval at which the recursion is re-anchored to the direct sum.
const RESYNC: usize = 1 << 14;

fn direct_sum(scalar: &[f64], b: usize, kernel: &[f64]) -> f64 {
    let m = kernel.len() - 1;
    (1..=m)
        .map(|j| kernel[j] * (scalar[b - j + 1] - scalar[b - j]))
        .sum()
}

/// OU values on the base grid of a path, from base index `first_base` on.
#[derive(Debug, Clone)]
pub struct OuSeries {
    pub(crate) first_base: usize,
    pub(crate) values: Vec<f64>,
}

impl OuSeries {
    pub fn at_base(&self, b: usize) -> Option<f64> {
        b.checked_sub(self.first_base)
            .and_then(|i| self.values.get(i).copied())
    }

    pub fn first_base(&self) -> usize {
        self.first_base
    }
}

#[cfg(test)]
mod tests {
    use super::super::{sample_path, Decay, NoiseGrid};
    use super::*;

    fn path() -> NoisePath {
        let g = NoiseGrid::new(-15.0, 5.0, 0.01).unwrap();
        sample_path(4, g, 2, Decay::new(0.5, 1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn horizon_validation() {
        assert!(OuParams::new(1.0, 9.0).is_err());
        assert!(OuParams::new(0.0, 10.0).is_err());
        assert!(OuParams::new(2.0, 5.0).is_ok());
    }

    #[test]
    fn zero_scalar_path_gives_zero() {
        let g = NoiseGrid::new(-12.0, 1.0, 0.01).unwrap();
        let modal = vec![0.0; g.n_points];
        let scalar = vec![0.0; g.n_points];
        let p = NoisePath::from_parts(g, 1, 0, Decay::new(0.5, 1.0, 1.0).unwrap(), modal, scalar)
            .unwrap();
        let ou = OuParams::new(1.0, 10.0).unwrap();
        assert_eq!(p.ou_potential(&ou, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn insufficient_history() {
        let p = path();
        let ou = OuParams::new(1.0, 10.0).unwrap();
        assert!(matches!(
            p.ou_potential(&ou, -6.0),
            Err(Error::InsufficientHistory { .. })
        ));
        assert!(p.ou_potential(&ou, -4.0).is_ok());
    }

    #[test]
    fn shift_covariance_is_exact_on_nodes() {
        let p = path();
        let ou = OuParams::new(1.0, 10.0).unwrap();
        for t in [-4.0, -1.37, 0.0, 2.5, 5.0] {
            let direct = p.ou_potential(&ou, t).unwrap();
            let shifted = p.shift(t).unwrap().ou_potential(&ou, 0.0).unwrap();
            assert_eq!(direct, shifted);
        }
    }

    #[test]
    fn series_matches_direct_sum() {
        let p = path();
        let ou = OuParams::new(1.0, 10.0).unwrap();
        let s = p.ou_series(&ou).unwrap();
        for i in (-500..=500).step_by(37) {
            let b = p.base_index(i).unwrap();
            let t = i as f64 * 0.01;
            let d = p.ou_potential(&ou, t).unwrap();
            assert!((s.at_base(b).unwrap() - d).abs() < 1e-12);
        }
    }
}
