//! Global evaluation of the discretised representation formula, used to
//! check a stepped trajectory against the formula it discretises.

use serde::{Deserialize, Serialize};

use super::{layout, DriftEval, Nonlinearity, Quadrature, Trajectory};
use crate::error::{param, Result};
use crate::operator::GeneratorFamily;
use crate::quadrature::{phi1, psi, GaussLegendre};
use crate::spectral::{eigenvalue, norm_x};

/// Which form of the representation formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    /// `Ũ(t)u₀ + σω(t) + ∫ŨF + σ∫Ũ(t−s, θ_s ω) A(θ_s ω) ω(s) ds`.
    NoiseOutside,
    /// `Ũ(t)u₀ + σŨ(t)ω(t) + ∫ŨF − σ∫Ũ(t−s, θ_s ω) A(θ_s ω) θ_s ω(t−s) ds`.
    ShiftedNoise,
}

/// `max_n ‖u_n − R_n(u)‖_X`, where `R_n` is the chosen form of the formula
/// summed over all steps `j < n` with the trajectory's own `F(u_j)`.
///
/// A linear drift is folded into the multipliers as in the solver.
/// Multipliers `U(t_n, t_{j+1})` are taken directly from the potential table
/// rather than as products of step factors. The correction integral on the
/// step adjacent to `t_n` is integrated by Gauss–Legendre on a mesh graded
/// towards `s = t_n` with `singular_quadrature_refinement` cells; the rest use
/// the closed form. Cost is quadratic in the number of steps.
pub fn representation_residual(
    traj: &Trajectory,
    gen: &GeneratorFamily,
    f: &Nonlinearity,
    sigma: f64,
    form: Representation,
) -> Result<f64> {
    let params = traj.params;
    let horizon = *traj.times.last().unwrap();
    let lay = layout(gen, horizon, &params)?;
    if traj.len() != lay.steps + 1 {
        return Err(param("traj", "residual needs every step recorded (record_every = 1)"));
    }
    let k = gen.modes();
    let h = lay.h;
    let mu: Vec<f64> = (1..=k).map(eigenvalue).collect();
    let n_steps = lay.steps;
    let t0 = gen.table_index(0)?;
    let ti = |n: usize| t0 + n * lay.cells;

    // path values at solver nodes and F along the trajectory
    let mut w = vec![vec![0.0; k]; n_steps + 1];
    for (n, row) in w.iter_mut().enumerate() {
        gen.path().node_values_into((n * lay.cells) as isize, row)?;
    }
    let (rho, f) = f.split_linear();
    let mut drift = DriftEval::new(f, k);
    let fs: Vec<Vec<f64>> = traj
        .states
        .iter()
        .map(|s| {
            let mut out = vec![0.0; k];
            drift.eval(s.coeffs(), &mut out);
            out
        })
        .collect();

    let gl = GaussLegendre::new(8);
    let graded = graded_breaks(params.singular_quadrature_refinement);
    let u0 = traj.states[0].coeffs();
    let mut worst = 0.0_f64;
    let mut acc = vec![0.0; k];
    for n in 1..=n_steps {
        let ia_n = gen.int_a_index(t0, ti(n)) + rho * n as f64 * h;
        for m in 0..k {
            let big = (-mu[m] * n as f64 * h + ia_n).exp();
            acc[m] = big * u0[m]
                + sigma
                    * match form {
                        Representation::NoiseOutside => w[n][m],
                        Representation::ShiftedNoise => big * w[n][m],
                    };
        }
        for j in 0..n {
            let ia_step = gen.int_a_index(ti(j), ti(j + 1)) + rho * h;
            let ia_tail = gen.int_a_index(ti(j + 1), ti(n)) + rho * (n - j - 1) as f64 * h;
            let tail_t = (n - j - 1) as f64 * h;
            for m in 0..k {
                let z = -mu[m] * h + ia_step;
                let outer = (-mu[m] * tail_t + ia_tail).exp();
                let p1 = phi1(z);
                let fterm = match params.quadrature {
                    Quadrature::Left => h * p1 * fs[j][m],
                    Quadrature::Trapezoid => {
                        let q = psi(z);
                        h * (q * fs[j][m] + (p1 - q) * fs[j + 1][m])
                    }
                };
                let dw = w[j + 1][m] - w[j][m];
                // ∫_0^1 e^{z(1−θ)} z g(θ) dθ for the linear g of each form
                let g0 = match form {
                    Representation::NoiseOutside => w[j][m],
                    Representation::ShiftedNoise => w[n][m] - w[j][m],
                };
                let g1 = match form {
                    Representation::NoiseOutside => dw,
                    Representation::ShiftedNoise => -dw,
                };
                let corr = if j + 1 == n {
                    graded_integral(&gl, &graded, z, g0, g1)
                } else {
                    g0 * z.exp_m1() + g1 * (p1 - 1.0)
                };
                let sign = match form {
                    Representation::NoiseOutside => 1.0,
                    Representation::ShiftedNoise => -1.0,
                };
                acc[m] += outer * (fterm + sign * sigma * corr);
            }
        }
        let diff: Vec<f64> = acc
            .iter()
            .zip(traj.states[n].coeffs())
            .map(|(a, b)| a - b)
            .collect();
        worst = worst.max(norm_x(&diff));
    }
    Ok(worst)
}

/// Breakpoints on [0, 1] halving towards θ = 1.
fn graded_breaks(cells: usize) -> Vec<f64> {
    let mut b = vec![0.0];
    for i in 1..cells {
        b.push(1.0 - 0.5f64.powi(i as i32));
    }
    b.push(1.0);
    b
}

fn graded_integral(gl: &GaussLegendre, breaks: &[f64], z: f64, g0: f64, g1: f64) -> f64 {
    breaks
        .windows(2)
        .map(|w| gl.integrate(w[0], w[1], |th| (z * (1.0 - th)).exp() * z * (g0 + g1 * th)))
        .sum()
}
