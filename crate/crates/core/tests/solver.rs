mod common;

use common::*;
use pullback_core::operator::GeneratorFamily;
use pullback_core::solver::{
    cocycle_defect, lipschitz_probe, pathwise_mild_solve, reference_emaruyama_solve,
    representation_residual, Nonlinearity, Quadrature, Representation, SolverParams, Trajectory,
};
use pullback_core::{Error, SpectralState};

const TANH: Nonlinearity = Nonlinearity::ScaledTanh {
    c_f: 0.25,
    c_f_bar: 0.5,
};

fn sup_diff(a: &Trajectory, b: &Trajectory) -> f64 {
    assert_eq!(a.times, b.times);
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| x.distance(y))
        .fold(0.0, f64::max)
}

/// Independent scalar solution of `dx = (−μ_k + a) x dt + σ dω_k` for the
/// piecewise-linear `a` and `ω_k` of the noise grid: on each cell the
/// exponent is the exact quadratic `E(r) = (a_j − μ_k) r + (a_{j+1} − a_j) r²/(2h)`
/// and `∫_0^h e^{E(h) − E(r)} dr` is done by composite Simpson.
fn oracle_mode(gen: &GeneratorFamily, k: usize, x0: f64, sigma: f64, horizon: f64) -> Vec<f64> {
    let h = gen.dt();
    let n = (horizon / h).round() as usize;
    let mu = (k * k) as f64;
    let mut x = x0;
    let mut out = vec![x0];
    let simpson = 200;
    for j in 0..n {
        let (t0, t1) = (j as f64 * h, (j + 1) as f64 * h);
        let (a0, a1) = (gen.potential(t0).unwrap(), gen.potential(t1).unwrap());
        let w0 = gen.path().values_at(t0).unwrap()[k - 1];
        let w1 = gen.path().values_at(t1).unwrap()[k - 1];
        let e = |r: f64| (a0 - mu) * r + (a1 - a0) * r * r / (2.0 * h);
        let eh = e(h);
        let g = |r: f64| (eh - e(r)).exp();
        let dr = h / simpson as f64;
        let mut integral = g(0.0) + g(h);
        for i in 1..simpson {
            integral += g(i as f64 * dr) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        integral *= dr / 3.0;
        x = eh.exp() * x + sigma * (w1 - w0) / h * integral;
        out.push(x);
    }
    out
}

fn oracle(gen: &GeneratorFamily, u0: &SpectralState, sigma: f64, horizon: f64) -> Vec<Vec<f64>> {
    (1..=gen.modes())
        .map(|m| oracle_mode(gen, m, u0.coeffs()[m - 1], sigma, horizon))
        .collect()
}

fn oracle_error(modes: &[Vec<f64>], traj: &Trajectory, noise_stride: usize) -> f64 {
    let mut worst = 0.0_f64;
    for (n, s) in traj.states.iter().enumerate() {
        let exact: Vec<f64> = modes.iter().map(|v| v[n * noise_stride]).collect();
        worst = worst.max(s.distance(&SpectralState::new(exact).unwrap()));
    }
    worst
}

#[test]
fn linear_problem_matches_multipliers() {
    let gen = default_gen(1, -11.0, 5.0);
    let u0 = parabola(K);
    let traj = pathwise_mild_solve(&u0, 5.0, &gen, &Nonlinearity::Zero, 0.0, &SolverParams::new(1e-3)).unwrap();
    let mut worst = 0.0_f64;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let exact = gen.evolve(&u0, *t, 0.0).unwrap();
        worst = worst.max(s.distance(&exact));
    }
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn linear_drift_is_absorbed_into_generator() {
    let gen = default_gen(2, -11.0, 2.0);
    let u0 = parabola(K);
    let rho = -0.3;
    let traj = pathwise_mild_solve(&u0, 2.0, &gen, &Nonlinearity::Linear { rho }, 0.0, &SolverParams::new(1e-3)).unwrap();
    let mut worst = 0.0_f64;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let exact = gen.evolve(&u0, *t, 0.0).unwrap().scaled((rho * t).exp());
        worst = worst.max(s.distance(&exact));
    }
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn additive_noise_matches_integrating_factor_oracle() {
    let gen = default_gen(3, -11.0, 1.0);
    let u0 = parabola(K);
    let traj = pathwise_mild_solve(&u0, 1.0, &gen, &Nonlinearity::Zero, 0.1, &SolverParams::new(1e-3)).unwrap();
    let err = oracle_error(&oracle(&gen, &u0, 0.1, 1.0), &traj, 1);
    assert!(err < 1e-6, "{err}");
}

#[test]
fn additive_noise_converges_at_first_order() {
    // fine noise grid; the solver sees the path only at its own nodes.
    // Strong errors on a single path are noisy, so take the RMS over seeds.
    let u0 = parabola(K);
    let dts = [3.2e-3, 1.6e-3, 8e-4, 4e-4, 2e-4];
    let seeds = 6;
    let mut sq = vec![0.0; dts.len()];
    for seed in 0..seeds {
        let gen = GeneratorFamily::new(K, potential(0.3, 0.2), &path(100 + seed, -10.5, 0.5, 1e-4, K)).unwrap();
        let exact = oracle(&gen, &u0, 1.0, 0.4);
        for (i, &dt) in dts.iter().enumerate() {
            let traj = pathwise_mild_solve(&u0, 0.4, &gen, &Nonlinearity::Zero, 1.0, &SolverParams::new(dt)).unwrap();
            let stride = (dt / 1e-4).round() as usize;
            sq[i] += oracle_error(&exact, &traj, stride).powi(2);
        }
    }
    let errs: Vec<f64> = sq.iter().map(|s| (s / seeds as f64).sqrt()).collect();
    let x: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (_, slope, _) = pullback_core::quadrature::linear_fit(&x, &y);
    assert!((0.8..=1.2).contains(&slope), "slope {slope}, errors {errs:?}");
}

#[test]
fn euler_is_first_order_on_constant_potential() {
    let gen = GeneratorFamily::new(8, potential(0.3, 0.0), &path(5, -10.0, 1.0, 1e-3, 8)).unwrap();
    let u0 = parabola(8);
    let exact = gen.evolve(&u0, 1.0, 0.0).unwrap();
    let errs: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| {
            let t = reference_emaruyama_solve(&u0, 1.0, &gen, &Nonlinearity::Zero, 0.0, &SolverParams::new(dt)).unwrap();
            t.last().distance(&exact)
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.8..2.2).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn euler_and_mild_agree_on_nonlinear_instance() {
    let gen = default_gen(6, -11.0, 1.0);
    let u0 = parabola(K);
    let mut diffs = Vec::new();
    for dt in [4e-3, 2e-3, 1e-3] {
        let p = SolverParams::new(dt);
        let a = pathwise_mild_solve(&u0, 1.0, &gen, &TANH, 0.1, &p).unwrap();
        let b = reference_emaruyama_solve(&u0, 1.0, &gen, &TANH, 0.1, &p).unwrap();
        diffs.push(sup_diff(&a, &b));
    }
    assert!(diffs[2] < 5e-3, "{diffs:?}");
    assert!(diffs[2] < diffs[1] && diffs[1] < diffs[0], "{diffs:?}");
}

#[test]
fn linear_drift_euler_consistent() {
    let gen = default_gen(7, -11.0, 1.0);
    let u0 = parabola(K);
    let rho = 0.2;
    let errs: Vec<f64> = [2e-3, 1e-3]
        .iter()
        .map(|&dt| {
            let t = reference_emaruyama_solve(&u0, 1.0, &gen, &Nonlinearity::Linear { rho }, 0.0, &SolverParams::new(dt)).unwrap();
            t.last().distance(&gen.evolve(&u0, 1.0, 0.0).unwrap().scaled(rho.exp()))
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[1] < 1e-2, "{errs:?}");
}

#[test]
fn flow_starts_at_initial_state() {
    let gen = default_gen(8, -11.0, 1.0);
    let u0 = parabola(K);
    let t = pathwise_mild_solve(&u0, 0.0, &gen, &TANH, 0.1, &SolverParams::new(1e-3)).unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t.states[0], u0);
}

#[test]
fn degenerate_input_gives_zero_trajectory() {
    let gen = default_gen(9, -11.0, 1.0);
    let t = pathwise_mild_solve(&SpectralState::zeros(K), 1.0, &gen, &Nonlinearity::Zero, 0.0, &SolverParams::new(1e-2)).unwrap();
    assert_eq!(t.len(), 101);
    assert!(t.states.iter().all(|s| s.is_zero()));
}

#[test]
fn cocycle_defects() {
    let gen = default_gen(10, -11.0, 2.0);
    let u0 = parabola(K);
    let p = SolverParams::new(1e-3);
    assert!(cocycle_defect(&u0, 0.7, 0.0, &gen, &TANH, 0.1, &p).unwrap() < 1e-9);
    assert!(cocycle_defect(&u0, 0.0, 0.3, &gen, &TANH, 0.1, &p).unwrap() < 1e-9);
    let generic = cocycle_defect(&u0, 0.7, 0.3, &gen, &TANH, 0.1, &p).unwrap();
    assert!(generic < 5.0 * p.dt, "{generic}");
    let linear = cocycle_defect(&u0, 0.7, 0.3, &gen, &Nonlinearity::Zero, 0.0, &p).unwrap();
    assert!(linear < 1e-9);
}

#[test]
fn both_representation_forms_hold_on_the_trajectory() {
    let gen = default_gen(11, -11.0, 1.0);
    let u0 = parabola(K);
    for quad in [Quadrature::Left, Quadrature::Trapezoid] {
        let mut p = SolverParams::new(2e-3);
        p.quadrature = quad;
        let traj = pathwise_mild_solve(&u0, 0.6, &gen, &TANH, 0.1, &p).unwrap();
        for form in [Representation::NoiseOutside, Representation::ShiftedNoise] {
            let r = representation_residual(&traj, &gen, &TANH, 0.1, form).unwrap();
            assert!(r < 1e-9, "{quad:?} {form:?}: {r}");
        }
    }
}

#[test]
fn difference_of_solutions_solves_noise_free_equation() {
    let gen = default_gen(12, -11.0, 1.0);
    let f = Nonlinearity::Linear { rho: -0.2 };
    let p = SolverParams::new(1e-3);
    let u0 = parabola(K);
    let v0 = SpectralState::basis(K, 2).unwrap();
    let a = pathwise_mild_solve(&u0, 1.0, &gen, &f, 0.1, &p).unwrap();
    let b = pathwise_mild_solve(&v0, 1.0, &gen, &f, 0.1, &p).unwrap();
    let d = pathwise_mild_solve(&(&u0 - &v0), 1.0, &gen, &f, 0.0, &p).unwrap();
    for n in 0..a.len() {
        let diff = &a.states[n] - &b.states[n];
        assert!(diff.distance(&d.states[n]) <= 2.0 * p.picard_tol * (n + 1) as f64);
    }
}

#[test]
fn mode_truncation_within_noise_tail() {
    let sigma = 0.1;
    let u0 = parabola(16);
    let p = SolverParams::new(1e-3);
    let small = GeneratorFamily::new(16, potential(0.3, 0.2), &path(13, -11.0, 2.0, 1e-3, 16)).unwrap();
    let big = GeneratorFamily::new(32, potential(0.3, 0.2), &path(13, -11.0, 2.0, 1e-3, 32)).unwrap();
    let mut u0_big = u0.coeffs().to_vec();
    u0_big.extend(parabola(32).coeffs()[16..].iter());
    let a = pathwise_mild_solve(&u0, 2.0, &small, &Nonlinearity::Zero, sigma, &p).unwrap();
    let b = pathwise_mild_solve(&SpectralState::new(u0_big).unwrap(), 2.0, &big, &Nonlinearity::Zero, sigma, &p).unwrap();
    // stationary variance of the modes k > 16 plus the initial tail
    let d = common::decay();
    let var: f64 = (17..=4000)
        .map(|k| {
            let mu = (k * k) as f64;
            std::f64::consts::FRAC_PI_2 * sigma * sigma * d.scale(k).powi(2) / (2.0 * (mu - 0.5))
        })
        .sum();
    let init_tail = SpectralState::new(parabola(32).coeffs()[16..].to_vec()).unwrap().norm();
    let bound = 5.0 * var.sqrt() + init_tail;
    for (x, y) in a.states.iter().zip(&b.states) {
        let head = SpectralState::new(y.coeffs()[..16].to_vec()).unwrap();
        assert!(x.distance(&head) < 1e-12);
        let tail = SpectralState::new(y.coeffs()[16..].to_vec()).unwrap();
        assert!(tail.norm() < bound, "{} vs {bound}", tail.norm());
    }
}

#[test]
fn lipschitz_bound_default_instance() {
    let gen = default_gen(14, -11.0, 1.0);
    let p = SolverParams::new(1e-3);
    let pairs: Vec<_> = (0..32)
        .map(|i| {
            let u = SpectralState::new((1..=K).map(|k| ((k * (i + 1)) as f64).sin() / k as f64).collect()).unwrap();
            let v = SpectralState::new((1..=K).map(|k| ((k + 3 * i) as f64).cos() / (k * k) as f64).collect()).unwrap();
            (u, v)
        })
        .collect();
    let fit = lipschitz_probe(&gen, &TANH, 0.1, &p, &pairs, 1.0).unwrap();
    assert!((fit.bound - 0.5f64.exp()).abs() < 1e-12);
    assert_eq!(fit.violations, 0);
    assert!(fit.l_hat <= fit.bound);
    // with F = 0 the difference is a pure linear decay
    let lin = lipschitz_probe(&gen, &Nonlinearity::Zero, 5.0, &p, &pairs, 1.0).unwrap();
    assert!(lin.l_hat <= (-0.5f64).exp() + 1e-12);
    let same = vec![(pairs[0].0.clone(), pairs[0].0.clone())];
    assert!(lipschitz_probe(&gen, &TANH, 0.1, &p, &same, 1.0).is_err());
}

#[test]
fn lipschitz_ratio_scale_invariant_for_linear_drift() {
    let gen = default_gen(15, -11.0, 1.0);
    let p = SolverParams::new(1e-3);
    let f = Nonlinearity::Linear { rho: 0.2 };
    let u = parabola(K);
    let v = SpectralState::basis(K, 3).unwrap();
    let r1 = lipschitz_probe(&gen, &f, 0.1, &p, &[(u.clone(), v.clone())], 1.0).unwrap().l_hat;
    let r10 = lipschitz_probe(&gen, &f, 0.1, &p, &[(u.scaled(10.0), v.scaled(10.0))], 1.0).unwrap().l_hat;
    assert!((r1 - r10).abs() < 1e-9 * r1);
}

#[test]
fn picard_iteration_cap_is_reported() {
    let gen = default_gen(16, -11.0, 1.0);
    let mut p = SolverParams::new(0.1);
    p.picard_max_iter = 2;
    let r = pathwise_mild_solve(&parabola(K), 1.0, &gen, &TANH, 0.1, &p);
    assert!(matches!(r, Err(Error::PicardDivergence { .. })), "{:?}", r.map(|t| t.len()));
}

#[test]
fn coverage_errors() {
    let gen = default_gen(17, -11.0, 1.0);
    let p = SolverParams::new(1e-3);
    assert!(pathwise_mild_solve(&parabola(K), 2.0, &gen, &TANH, 0.1, &p).is_err());
    assert!(pathwise_mild_solve(&parabola(8), 0.5, &gen, &TANH, 0.1, &p).is_err());
    assert!(pathwise_mild_solve(&parabola(K), 0.5, &gen.shifted(-2.0).unwrap(), &TANH, 0.1, &p).is_err());
}
