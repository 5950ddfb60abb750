use super::{layout, DriftEval, Fiber, Nonlinearity, Quadrature, SolverParams, Trajectory};
use crate::error::{param, Error, Result};
use crate::operator::GeneratorFamily;
use crate::quadrature::{phi1, psi};
use crate::spectral::{eigenvalue, norm_x, SpectralState};

pub(crate) fn check_inputs(
    u0: &SpectralState,
    gen: &GeneratorFamily,
    f: &Nonlinearity,
    sigma: f64,
) -> Result<()> {
    u0.check_modes(gen.modes())?;
    u0.validate()?;
    f.validate()?;
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(param("sigma", format!("must be finite and non-negative, got {sigma}")));
    }
    Ok(())
}

/// Collects states at the recording stride.
pub(crate) struct Recorder {
    stride: usize,
    last: usize,
    h: f64,
    pub times: Vec<f64>,
    pub states: Vec<SpectralState>,
}

impl Recorder {
    pub fn new(stride: usize, steps: usize, h: f64) -> Self {
        let cap = steps / stride + 2;
        Recorder {
            stride,
            last: steps,
            h,
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, n: usize, u: &[f64]) -> Result<()> {
        if n.is_multiple_of(self.stride) || n == self.last {
            let t = n as f64 * self.h;
            if let Some(c) = u.iter().find(|c| !c.is_finite()) {
                return Err(Error::InvalidState(format!("non-finite coefficient {c} at t = {t}")));
            }
            self.times.push(t);
            self.states.push(SpectralState::from_vec_unchecked(u.to_vec()));
        }
        Ok(())
    }
}

pub(crate) fn fiber_of(gen: &GeneratorFamily) -> Fiber {
    Fiber {
        seed: gen.path().seed(),
        shift: gen.path().shift_offset(),
    }
}

/// Steps the representation formula from one solver node to the next.
///
/// Per mode, with `z = −μ_k H + ∫_{t_n}^{t_{n+1}} a` (the exact log-multiplier
/// over the step), the recursion is
///
/// `u_{n+1} = e^z u_n + σ[ω_{n+1} − e^z ω_n + C_n] + ∫ U F`,
///
/// where `C_n = ∫ U(t_{n+1}, s) A(θ_s ω) ω(s) ds` is integrated in closed form
/// against the path, linear across the step, with `a` frozen at its step
/// average: `C_n = ω_n (e^z − 1) + Δω (φ₁(z) − 1)`. The bracket collapses to
/// `φ₁(z) Δω`, which is what is evaluated: it depends only on path increments
/// and therefore does not change when the fiber is re-centred.
///
/// A linear drift `ρu` is folded into `z`, which makes the linear problem
/// exact on nodes. For other `F` the convolution uses the left or product-trapezoid rule; the latter is
/// implicit in `F(u_{n+1})` and resolved by Picard iteration started from the
/// explicit predictor.
pub fn pathwise_mild_solve(
    u0: &SpectralState,
    horizon: f64,
    gen: &GeneratorFamily,
    f: &Nonlinearity,
    sigma: f64,
    params: &SolverParams,
) -> Result<Trajectory> {
    check_inputs(u0, gen, f, sigma)?;
    let lay = layout(gen, horizon, params)?;
    let k = gen.modes();
    let mut rec = Recorder::new(params.record_every, lay.steps, lay.h);
    let fiber = fiber_of(gen);

    if u0.is_zero() && sigma == 0.0 && f.is_zero() {
        for n in 0..=lay.steps {
            rec.push(n, u0.coeffs())?;
        }
        return Ok(Trajectory {
            times: rec.times,
            states: rec.states,
            fiber,
            params: *params,
        });
    }

    let mu: Vec<f64> = (1..=k).map(eigenvalue).collect();
    let (rho, f) = f.split_linear();
    let f_zero = f.is_zero();
    let implicit = !f_zero && params.quadrature == Quadrature::Trapezoid;
    let mut drift = DriftEval::new(f, k);
    let mut u = u0.coeffs().to_vec();
    let mut fu = vec![0.0; k];
    if !f_zero {
        drift.eval(&u, &mut fu);
    }
    let mut dw = vec![0.0; k];
    let mut base = vec![0.0; k];
    let mut w_right = vec![0.0; k];
    let mut iterate = vec![0.0; k];
    let mut f_iter = vec![0.0; k];
    let mut diff = vec![0.0; k];
    let h = lay.h;

    rec.push(0, &u)?;
    let mut ti = gen.table_index(0)?;
    for n in 0..lay.steps {
        let i0 = (n * lay.cells) as isize;
        let i1 = i0 + lay.cells as isize;
        let tj = ti + lay.cells;
        let ia = gen.int_a_index(ti, tj) + rho * h;
        gen.path().increment_into(i0, i1, &mut dw)?;
        for m in 0..k {
            let z = -mu[m] * h + ia;
            let e = z.exp();
            let p1 = phi1(z);
            let mut b = e * u[m] + sigma * p1 * dw[m];
            if !f_zero {
                match params.quadrature {
                    Quadrature::Left => b += h * p1 * fu[m],
                    Quadrature::Trapezoid => {
                        let q = psi(z);
                        b += h * q * fu[m];
                        w_right[m] = h * (p1 - q);
                        // explicit predictor for the Picard start
                        iterate[m] = b + w_right[m] * fu[m];
                    }
                }
            }
            base[m] = b;
        }
        if implicit {
            let mut it = 0;
            loop {
                drift.eval(&iterate, &mut f_iter);
                for m in 0..k {
                    let next = base[m] + w_right[m] * f_iter[m];
                    diff[m] = next - iterate[m];
                    iterate[m] = next;
                }
                it += 1;
                let res = norm_x(&diff);
                if res <= params.picard_tol * (1.0 + norm_x(&iterate)) {
                    break;
                }
                if it >= params.picard_max_iter || !res.is_finite() {
                    return Err(Error::PicardDivergence {
                        t: (n + 1) as f64 * h,
                        iterations: it,
                        residual: res,
                    });
                }
            }
            u.copy_from_slice(&iterate);
        } else {
            u.copy_from_slice(&base);
        }
        if !f_zero {
            drift.eval(&u, &mut fu);
        }
        rec.push(n + 1, &u)?;
        ti = tj;
    }
    Ok(Trajectory {
        times: rec.times,
        states: rec.states,
        fiber,
        params: *params,
    })
}
