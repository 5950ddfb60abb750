use std::f64::consts::FRAC_2_PI;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::spectral::SineTransform;

/// Globally Lipschitz drift terms. Pointwise maps act on the values at the
/// sine-transform collocation nodes, which keeps their Lipschitz constant
/// unchanged in the coefficient norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    Zero,
    /// `F(u) = ρ u`.
    Linear { rho: f64 },
    /// `F(u) = C_F tanh(u) + g` with `‖g‖_X = C̄_F` along `e_1`.
    ScaledTanh { c_f: f64, c_f_bar: f64 },
    /// `F(u) = −a · clip(u, R)²`, Lipschitz with constant `2aR`.
    FisherKppClipped { a: f64, r: f64 },
}

impl Nonlinearity {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |name: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(param(name, format!("must be finite and non-negative, got {v}")))
            }
        };
        match *self {
            Nonlinearity::Zero => Ok(()),
            Nonlinearity::Linear { rho } => {
                if rho.is_finite() {
                    Ok(())
                } else {
                    Err(param("rho", "must be finite"))
                }
            }
            Nonlinearity::ScaledTanh { c_f, c_f_bar } => {
                finite_nonneg("c_f", c_f)?;
                finite_nonneg("c_f_bar", c_f_bar)
            }
            Nonlinearity::FisherKppClipped { a, r } => {
                finite_nonneg("a", a)?;
                finite_nonneg("r", r)
            }
        }
    }

    /// Global Lipschitz constant `C_F`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { rho } => rho.abs(),
            Nonlinearity::ScaledTanh { c_f, .. } => c_f,
            Nonlinearity::FisherKppClipped { a, r } => 2.0 * a * r,
        }
    }

    /// Growth constant `C̄_F` in `‖F(x)‖ ≤ C̄_F + C_F ‖x‖`.
    pub fn growth(&self) -> f64 {
        match *self {
            Nonlinearity::ScaledTanh { c_f_bar, .. } => c_f_bar,
            _ => 0.0,
        }
    }

    /// Splits off a linear drift `ρu`, which the solvers fold into the
    /// step multiplier exactly: `(ρ, remainder)`.
    pub fn split_linear(&self) -> (f64, Nonlinearity) {
        match *self {
            Nonlinearity::Linear { rho } => (rho, Nonlinearity::Zero),
            other => (0.0, other),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Nonlinearity::Zero => true,
            Nonlinearity::Linear { rho } => rho == 0.0,
            Nonlinearity::ScaledTanh { c_f, c_f_bar } => c_f == 0.0 && c_f_bar == 0.0,
            Nonlinearity::FisherKppClipped { a, .. } => a == 0.0,
        }
    }
}

/// Scratch space for evaluating `F` on coefficient vectors.
#[derive(Debug, Clone)]
pub struct DriftEval {
    f: Nonlinearity,
    transform: SineTransform,
    values: Vec<f64>,
}

impl DriftEval {
    pub fn new(f: Nonlinearity, modes: usize) -> Self {
        DriftEval {
            f,
            transform: SineTransform::new(modes),
            values: vec![0.0; modes],
        }
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.f
    }

    /// Writes `F(u)` into `out`.
    pub fn eval(&mut self, u: &[f64], out: &mut [f64]) {
        match self.f {
            Nonlinearity::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Nonlinearity::Linear { rho } => {
                for (o, c) in out.iter_mut().zip(u) {
                    *o = rho * c;
                }
            }
            Nonlinearity::ScaledTanh { c_f, c_f_bar } => {
                self.pointwise(u, out, |v| c_f * v.tanh());
                out[0] += c_f_bar * FRAC_2_PI.sqrt();
            }
            Nonlinearity::FisherKppClipped { a, r } => {
                self.pointwise(u, out, |v| {
                    let c = v.clamp(-r, r);
                    -a * c * c
                });
            }
        }
    }

    fn pointwise(&mut self, u: &[f64], out: &mut [f64], f: impl Fn(f64) -> f64) {
        self.transform.to_values(u, &mut self.values);
        for v in self.values.iter_mut() {
            *v = f(*v);
        }
        self.transform.to_coeffs(&self.values, out);
    }
}
