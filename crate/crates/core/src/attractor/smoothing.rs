use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::operator::EstimateConstants;
use crate::quadrature::weakly_singular_exp;

const INTEGRAL_TOL: f64 = 1e-12;

/// `κ` of the smoothing property together with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConstant {
    /// `C̃_η / t̃^η + C_F C̃_η c e^{cC_F/λ} ∫_0^{t̃} e^{−λs} s^{−η} ds`.
    pub kappa: f64,
    pub t_tilde: f64,
    pub eta: f64,
    pub c_tilde_eta: f64,
    /// `C̃_η / t̃^η`.
    pub leading: f64,
    pub integral: f64,
    pub integral_error: f64,
    /// The same expression with `C̃_η` in place of `C̃_η / t̃^η`, as the
    /// constant appears in the theorem statement. Reported, not used.
    pub statement_kappa: f64,
}

/// `κ` in the form derived in the proof of the smoothing property, with
/// `C̃_η` read from `constants` (recorded for power `η`).
pub fn smoothing_constant(constants: &EstimateConstants, t_tilde: f64, eta: f64) -> Result<SmoothingConstant> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(param("eta", format!("must lie in (0, 1), got {eta}")));
    }
    if !(t_tilde > 0.0 && t_tilde.is_finite()) {
        return Err(param("t_tilde", format!("must be positive, got {t_tilde}")));
    }
    constants.validate()?;
    let c_tilde = constants
        .c_tilde(eta)
        .ok_or_else(|| param("c_tilde", format!("no C̃ recorded for power {eta}")))?
        .value;
    let (integral, integral_error) = weakly_singular_exp(constants.lambda, eta, t_tilde, INTEGRAL_TOL);
    let second = constants.c_f * c_tilde * constants.lipschitz_bound() * integral;
    let leading = c_tilde / t_tilde.powf(eta);
    Ok(SmoothingConstant {
        kappa: leading + second,
        t_tilde,
        eta,
        c_tilde_eta: c_tilde,
        leading,
        integral,
        integral_error,
        statement_kappa: c_tilde + second,
    })
}
