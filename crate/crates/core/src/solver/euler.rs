use super::mild::{check_inputs, fiber_of, Recorder};
use super::{layout, DriftEval, Nonlinearity, SolverParams, Trajectory};
use crate::error::Result;
use crate::operator::GeneratorFamily;
use crate::spectral::{eigenvalue, SpectralState};

/// Semi-implicit Euler–Maruyama:
/// `(I − H A(θ_{t_n} ω)) u_{n+1} = u_n + H F(u_n) + σ Δω_n`, diagonal per mode.
pub fn reference_emaruyama_solve(
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
    let mu: Vec<f64> = (1..=k).map(eigenvalue).collect();
    let mut rec = Recorder::new(params.record_every, lay.steps, lay.h);
    let f_zero = f.is_zero();
    let mut drift = DriftEval::new(*f, k);
    let mut u = u0.coeffs().to_vec();
    let mut fu = vec![0.0; k];
    let mut dw = vec![0.0; k];
    let h = lay.h;
    rec.push(0, &u)?;
    let mut ti = gen.table_index(0)?;
    for n in 0..lay.steps {
        let i0 = (n * lay.cells) as isize;
        let i1 = i0 + lay.cells as isize;
        let a = gen.potential_at_index(ti);
        gen.path().increment_into(i0, i1, &mut dw)?;
        if !f_zero {
            drift.eval(&u, &mut fu);
        }
        for m in 0..k {
            u[m] = (u[m] + h * fu[m] + sigma * dw[m]) / (1.0 - h * (-mu[m] + a));
        }
        rec.push(n + 1, &u)?;
        ti += lay.cells;
    }
    Ok(Trajectory {
        times: rec.times,
        states: rec.states,
        fiber: fiber_of(gen),
        params: *params,
    })
}
