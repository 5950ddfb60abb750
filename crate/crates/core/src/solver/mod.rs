//! Pathwise mild solutions of `du = A(θ_t ω) u dt + F(u) dt + σ dω` and a
//! semi-implicit Euler–Maruyama reference.

mod euler;
mod mild;
mod nonlinearity;
mod probes;
mod residual;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::noise::steps;
use crate::operator::GeneratorFamily;

pub use euler::reference_emaruyama_solve;
pub use mild::pathwise_mild_solve;
pub use nonlinearity::{DriftEval, Nonlinearity};
pub use probes::{cocycle_defect, lipschitz_probe, LipschitzFit};
pub use residual::{representation_residual, Representation};
pub use trajectory::{read_trajectory_binary, write_trajectory_binary, write_trajectory_csv, Fiber, Trajectory};

/// Product rule used for `∫ U(t_{n+1}, s) F(u(s)) ds` over one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// `F` frozen at the left node: explicit.
    Left,
    /// `F` linear across the step: implicit, resolved by Picard iteration.
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    pub dt: f64,
    #[serde(default = "default_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_iter")]
    pub picard_max_iter: usize,
    #[serde(default = "default_quadrature")]
    pub quadrature: Quadrature,
    /// Sub-cells per step used by [`representation_residual`] when it
    /// integrates the correction term independently of the stepper.
    #[serde(default = "default_refinement")]
    pub singular_quadrature_refinement: usize,
    /// Keep every n-th state in the trajectory (the final state is always kept).
    #[serde(default = "default_stride")]
    pub record_every: usize,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_iter() -> usize {
    50
}
fn default_quadrature() -> Quadrature {
    Quadrature::Trapezoid
}
fn default_refinement() -> usize {
    8
}
fn default_stride() -> usize {
    1
}

impl SolverParams {
    pub fn new(dt: f64) -> Self {
        SolverParams {
            dt,
            picard_tol: default_tol(),
            picard_max_iter: default_iter(),
            quadrature: default_quadrature(),
            singular_quadrature_refinement: default_refinement(),
            record_every: default_stride(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(param("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.picard_tol > 0.0) {
            return Err(param("picard_tol", "must be positive"));
        }
        if self.picard_max_iter == 0 {
            return Err(param("picard_max_iter", "must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(param("record_every", "must be at least 1"));
        }
        if self.singular_quadrature_refinement == 0 {
            return Err(param("singular_quadrature_refinement", "must be at least 1"));
        }
        Ok(())
    }

    /// Noise cells per solver step; the step must be a whole multiple of the
    /// noise grid step so that every solver node is a noise node.
    pub fn cells_per_step(&self, noise_dt: f64) -> Result<usize> {
        self.validate()?;
        match steps(self.dt, noise_dt) {
            Some(m) if m >= 1 => Ok(m),
            _ => Err(param(
                "dt",
                format!(
                    "solver step {} must be a whole multiple of the noise step {noise_dt}",
                    self.dt
                ),
            )),
        }
    }
}

/// Validated step layout of one solve.
pub(crate) struct Layout {
    pub cells: usize,
    pub steps: usize,
    pub h: f64,
}

pub(crate) fn layout(gen: &GeneratorFamily, horizon: f64, params: &SolverParams) -> Result<Layout> {
    let cells = params.cells_per_step(gen.dt())?;
    let h = cells as f64 * gen.dt();
    let n = steps(horizon, h).ok_or_else(|| {
        param("horizon", format!("{horizon} is not a whole number of steps of {h}"))
    })?;
    // coverage of the last node, including the OU history at the first
    gen.table_index(0)?;
    gen.table_index((n * cells) as isize).map_err(|e| match e {
        Error::OutOfRange { t_min, t_max, .. } => Error::OutOfRange {
            t: horizon,
            t_min,
            t_max,
        },
        other => other,
    })?;
    Ok(Layout { cells, steps: n, h })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(SolverParams::new(0.0).validate().is_err());
        let mut p = SolverParams::new(0.01);
        assert_eq!(p.cells_per_step(0.001).unwrap(), 10);
        assert!(p.cells_per_step(0.003).is_err());
        assert!(SolverParams::new(0.0005).cells_per_step(0.001).is_err());
        p.picard_tol = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn params_serde_defaults() {
        let p: SolverParams = serde_json::from_str(r#"{"dt":0.001}"#).unwrap();
        assert_eq!(p, SolverParams::new(0.001));
        assert!(serde_json::from_str::<SolverParams>(r#"{"dt":0.001,"bogus":1}"#).is_err());
    }
}
