mod common;

use common::*;
use proptest::prelude::*;
use pullback_core::attractor::*;
use pullback_core::noise::Space;
use pullback_core::operator::{EstimateConstants, GeneratorFamily};
use pullback_core::solver::{Nonlinearity, SolverParams};
use pullback_core::{Error, SpectralState};
use statrs::function::gamma::{gamma, gamma_lr};

const TANH: Nonlinearity = Nonlinearity::ScaledTanh {
    c_f: 0.25,
    c_f_bar: 0.5,
};
const HISTORY: f64 = 80.0;

fn constants(c_f: f64, c_f_bar: f64, sigma: f64, eps: f64) -> EstimateConstants {
    EstimateConstants::new(&potential(0.3, eps), K, c_f, c_f_bar, sigma, 0.75, 0.5).unwrap()
}

fn opts() -> AbsorbingOptions {
    AbsorbingOptions {
        history: Some(HISTORY),
        ..Default::default()
    }
}

#[test]
fn noise_free_radius_is_the_drift_term() {
    let p = path(1, -HISTORY, 1.0, 1e-3, K);
    let spec = absorbing_radius(&p, &constants(0.25, 0.5, 0.0, 0.2), &opts()).unwrap();
    assert_eq!(spec.rho, 0.5 / 0.25);
    assert_eq!(spec.components.ou_convolution, 0.0);
    assert_eq!(spec.delta, 0.05 * spec.rho);

    let zero = absorbing_radius(&p, &constants(0.25, 0.0, 0.0, 0.2), &opts()).unwrap();
    assert_eq!(zero.rho, 0.0);
    assert!(zero.delta > 0.0);
}

#[test]
fn radius_components_are_consistent() {
    let p = path(2, -HISTORY, 1.0, 1e-3, K);
    let spec = absorbing_radius(&p, &constants(0.25, 0.5, 0.1, 0.2), &opts()).unwrap();
    let c = spec.components;
    assert!(c.drift > 0.0 && c.ou_convolution > 0.0 && c.singular_convolution > 0.0);
    assert!((c.sum() - spec.rho).abs() < 1e-15 * spec.rho);
    assert!(spec.relative_tail() < 1e-6);
    // noise terms are linear in σ
    let twice = absorbing_radius(&p, &constants(0.25, 0.5, 0.2, 0.2), &opts()).unwrap();
    assert!(((twice.rho - c.drift) - 2.0 * (spec.rho - c.drift)).abs() < 1e-12);
}

/// Composite midpoint rule with ten sub-cells per noise step, evaluating the
/// path norm by interpolation of the coefficients rather than of the norms.
fn refined_rho(p: &pullback_core::noise::NoisePath, k: &EstimateConstants, c_tilde: f64) -> f64 {
    let h = p.dt() / 10.0;
    let n = (HISTORY / h).round() as usize;
    let (r, lambda, beta) = (k.c * k.c_f, k.lambda, 0.75);
    let (mut ou, mut sing) = (0.0, 0.0);
    for i in 0..n {
        let x = (i as f64 + 0.5) * h;
        let w = p.evaluate(-x, Space::XBeta).unwrap().norm;
        ou += (-r * x).exp() * w * h;
        sing += (-lambda * x).exp() * x.powf(beta - 1.0) * w * h;
    }
    let gap = k.gap();
    k.c * k.c_f_bar / gap + r * k.sigma * k.c_hat * ou + k.sigma * c_tilde * lambda / gap * sing
}

#[test]
fn radius_agrees_with_refined_quadrature() {
    let k = constants(0.25, 0.5, 0.1, 0.2);
    for seed in [3, 4] {
        let p = path(seed, -HISTORY, 1.0, 1e-3, K);
        let spec = absorbing_radius(&p, &k, &opts()).unwrap();
        let fine = refined_rho(&p, &k, spec.c_tilde);
        assert!((spec.rho - fine).abs() < 5e-3 * fine, "{} vs {fine}", spec.rho);
    }
}

#[test]
fn shallow_history_is_rejected() {
    let p = path(5, -HISTORY, 1.0, 1e-3, K);
    let short = AbsorbingOptions {
        history: Some(20.0),
        ..Default::default()
    };
    let r = absorbing_radius(&p, &constants(0.25, 0.5, 0.1, 0.2), &short);
    assert!(matches!(r, Err(Error::ShallowHistory { .. })), "{r:?}");
    let too_long = AbsorbingOptions {
        history: Some(200.0),
        ..Default::default()
    };
    assert!(absorbing_radius(&p, &constants(0.25, 0.5, 0.1, 0.2), &too_long).is_err());
}

#[test]
fn absorbing_time_grows_with_radius() {
    let p = path(6, -HISTORY, 1.0, 1e-3, K);
    let k = constants(0.25, 0.5, 0.1, 0.2);
    let spec = absorbing_radius(&p, &k, &opts()).unwrap();
    let t: Vec<f64> = [0.5, 5.0, 50.0]
        .iter()
        .map(|&r| absorbing_time(&p, &k, r, spec.delta, HISTORY).unwrap())
        .collect();
    assert!(t[0] < t[1] && t[1] < t[2], "{t:?}");
    // noise-free closed form: 2cR e^{−(λ−cC_F)T} = δ
    let k0 = constants(0.25, 0.5, 0.0, 0.2);
    let t0 = absorbing_time(&p, &k0, 5.0, 0.1, HISTORY).unwrap();
    let exact = (2.0 * 5.0 / 0.1f64).ln() / 0.25;
    assert!((t0 - exact).abs() <= p.dt() + 1e-9, "{t0} vs {exact}");
    assert_eq!(absorbing_time(&p, &k0, 0.0, 0.1, HISTORY).unwrap(), 0.0);
    assert!(absorbing_time(&p, &k, 1e12, spec.delta, HISTORY).is_err());
}

#[test]
fn absorbing_estimate_holds_on_short_runs() {
    let pullback = 4.0;
    let gen = default_gen(7, -(HISTORY + pullback) - 0.5, 0.5);
    let k = constants(0.25, 0.5, 0.1, 0.2);
    let initial: Vec<SpectralState> = [0.0, 3.0, 300.0]
        .iter()
        .map(|&r| parabola(K).scaled(r / parabola(K).norm()))
        .collect();
    let check = check_absorbing(&gen, &TANH, &k, &opts(), &SolverParams::new(1e-3), &initial, pullback, 8).unwrap();
    assert_eq!(check.rows.len(), 24);
    assert_eq!(check.violations, 0);
    assert_eq!(check.specs.len(), 8);
}

#[test]
fn linear_cloud_is_a_pure_contraction() {
    let gen = default_gen(8, -15.5, 0.5);
    let ens = Ensemble {
        law: InitialLaw::Sphere {
            radius: 10.0,
            smoothness: 1.0,
        },
        count: 6,
        seed: 1,
    };
    let cloud = pullback_cloud(&ens, 5.0, &gen, &Nonlinearity::Zero, 0.0, &SolverParams::new(1e-3), None).unwrap();
    let bound = (-0.5f64 * 5.0).exp() * 10.0;
    assert!(cloud.points.iter().all(|p| p.norm() <= bound * (1.0 + 1e-12)));
    assert_eq!(cloud.points.len(), 6);
}

#[test]
fn origin_ensemble_lands_in_absorbing_ball() {
    let gen = default_gen(9, -(HISTORY + 10.0) - 0.5, 0.5);
    let k = constants(0.25, 0.5, 0.1, 0.2);
    let spec = absorbing_radius(gen.path(), &k, &opts()).unwrap();
    let ens = Ensemble {
        law: InitialLaw::Origin,
        count: 1,
        seed: 0,
    };
    let cloud = pullback_cloud(&ens, 10.0, &gen, &TANH, 0.1, &SolverParams::new(1e-3), Some(&spec)).unwrap();
    assert!(cloud.max_norm <= spec.radius());
    assert_eq!(cloud.radius, Some(spec.radius()));
}

#[test]
fn early_cloud_is_not_absorbed() {
    let gen = default_gen(10, -12.0, 0.5);
    let k = constants(0.25, 0.5, 0.0, 0.2);
    let spec = absorbing_radius(gen.path(), &k, &AbsorbingOptions::default()).unwrap();
    let ens = Ensemble {
        law: InitialLaw::Sphere {
            radius: 1e3,
            smoothness: 1.0,
        },
        count: 2,
        seed: 3,
    };
    let r = pullback_cloud(&ens, 1.0, &gen, &TANH, 0.0, &SolverParams::new(1e-3), Some(&spec));
    assert!(matches!(r, Err(Error::NotAbsorbed { .. })));
}

#[test]
fn doubling_pullback_time_does_not_widen_cloud() {
    let ens = Ensemble {
        law: InitialLaw::Ball {
            radius: 20.0,
            smoothness: 1.0,
        },
        count: 8,
        seed: 11,
    };
    let p = SolverParams::new(1e-3);
    let (mut short, mut long) = (0.0, 0.0);
    for seed in 0..3 {
        let gen = default_gen(20 + seed, -16.5, 0.5);
        short += pullback_cloud(&ens, 3.0, &gen, &TANH, 0.1, &p, None).unwrap().diameter();
        long += pullback_cloud(&ens, 6.0, &gen, &TANH, 0.1, &p, None).unwrap().diameter();
    }
    assert!(long <= 1.05 * short, "{long} vs {short}");
}

#[test]
fn ensemble_sampling() {
    let e = Ensemble {
        law: InitialLaw::Sphere {
            radius: 7.0,
            smoothness: 1.5,
        },
        count: 5,
        seed: 9,
    };
    let a = e.sample(16).unwrap();
    assert_eq!(a, e.sample(16).unwrap());
    assert!(a.iter().all(|u| (u.norm() - 7.0).abs() < 1e-12));
    let b = Ensemble {
        law: InitialLaw::Ball {
            radius: 7.0,
            smoothness: 1.5,
        },
        ..e
    };
    assert!(b.sample(16).unwrap().iter().all(|u| u.norm() <= 7.0));
    assert!(Ensemble { count: 0, ..e }.sample(4).is_err());
}

fn smoothing_constants(c_f: f64) -> EstimateConstants {
    constants(c_f, 0.5, 0.1, 0.2).with_c_tilde(0.5, 1.0)
}

#[test]
fn smoothing_constant_without_drift() {
    let k = smoothing_constants(0.0);
    let s = smoothing_constant(&k, 1.0, 0.5).unwrap();
    let c = k.c_tilde(0.5).unwrap().value;
    assert_eq!(s.kappa, c);
    let mut last = f64::INFINITY;
    for t in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let kappa = smoothing_constant(&k, t, 0.5).unwrap().kappa;
        assert!(kappa < last);
        last = kappa;
    }
}

#[test]
fn smoothing_integral_matches_incomplete_gamma() {
    let k = smoothing_constants(0.25);
    for (t, eta) in [(1.0, 0.5), (0.3, 0.25), (2.5, 0.75)] {
        let k = k.clone().with_c_tilde(eta, t);
        let s = smoothing_constant(&k, t, eta).unwrap();
        let exact = gamma(1.0 - eta) * gamma_lr(1.0 - eta, 0.5 * t) / 0.5f64.powf(1.0 - eta);
        assert!((s.integral - exact).abs() < 1e-10, "{} vs {exact}", s.integral);
        assert!(s.integral_error < 1e-8);
    }
}

#[test]
fn smoothing_constant_default_against_refined_sum() {
    let k = smoothing_constants(0.25);
    let s = smoothing_constant(&k, 1.0, 0.5).unwrap();
    // midpoint sum in v = √s on a mesh of 10^5 cells
    let n = 100_000;
    let h = 1.0 / n as f64;
    let integral: f64 = (0..n)
        .map(|i| {
            let v = (i as f64 + 0.5) * h;
            2.0 * (-0.5 * v * v).exp() * h
        })
        .sum();
    let c = k.c_tilde(0.5).unwrap().value;
    let refined = c + 0.25 * c * (0.5f64).exp() * integral;
    assert!((s.kappa - refined).abs() < 1e-6, "{} vs {refined}", s.kappa);
    assert_eq!(s.statement_kappa, s.kappa);
    assert!(smoothing_constant(&k, 1.0, 1.0).is_err());
    assert!(smoothing_constant(&k, 1.0, 0.3).is_err());
}

#[test]
fn covering_single_ball_for_large_radius() {
    for eta in [0.25, 0.5, 1.0] {
        for eps in [1.0, 1.5] {
            let c = covering_number(eta, eps, 16).unwrap();
            assert_eq!(c.log_upper, 0.0);
            assert_eq!(c.upper(), 1.0);
        }
    }
    assert!(covering_number(0.5, 0.0, 4).is_err());
    assert!(covering_number(0.5, -1.0, 4).is_err());
}

#[test]
fn covering_upper_close_to_greedy_cover() {
    let c = covering_number(0.5, 0.3, 4).unwrap();
    let greedy = greedy_cover(0.5, 0.3, 4) as f64;
    let ratio = c.upper() / greedy;
    assert!((0.25..=4.0).contains(&ratio), "upper {} greedy {greedy}", c.upper());
}

#[test]
fn covering_upper_dominates_packing_lower() {
    for modes in 1..=4 {
        for eta in [0.25, 0.5, 0.75] {
            for eps in [0.1, 0.2, 0.3, 0.5, 0.8] {
                let c = covering_number(eta, eps, modes).unwrap();
                let lower = c.log_lower.unwrap();
                assert!(c.log_upper >= lower, "K={modes} η={eta} ε={eps}: {} < {lower}", c.log_upper);
            }
        }
    }
    assert!(covering_number(0.5, 0.3, 5).unwrap().log_lower.is_none());
}

#[test]
fn entropy_grows_at_the_embedding_rate() {
    for (eta, lo, modes) in [(0.5, 0.01, 2048), (0.75, 0.003, 1024)] {
        let slope = entropy_slope(eta, lo, modes).unwrap();
        let expected = 1.0 / (2.0 * eta);
        assert!((slope / expected - 1.0).abs() <= 0.2, "η={eta}: slope {slope} vs {expected}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn covering_monotone_in_radius(eta in 0.2f64..1.0, e1 in 0.02f64..1.2, e2 in 0.02f64..1.2) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let a = covering_number(eta, lo, 64).unwrap().log_upper;
        let b = covering_number(eta, hi, 64).unwrap().log_upper;
        prop_assert!(b <= a + 1e-12);
    }
}

#[test]
fn dimension_bound_edge_cases() {
    let d = dimension_bound(0.2, 0.5, 0.1, 16).unwrap();
    assert_eq!(d.bound, 0.0);
    assert!(dimension_bound(0.5, 0.5, 1.0, 16).is_err());
    assert!(dimension_bound(0.0, 0.5, 1.0, 16).is_err());
    assert!(dimension_bound(0.2, 0.5, 0.0, 16).is_err());
    let nus: Vec<f64> = (1..10).map(|i| 0.05 * i as f64).collect();
    let sweep = nu_sweep(&nus, 0.5, 1.7, K).unwrap();
    assert!(sweep.rows.iter().all(|r| r.bound >= 0.0 && r.bound.is_finite()));
    assert!(sweep.rows.iter().all(|r| r.bound >= sweep.min_bound));
    assert!(nus.contains(&sweep.argmin));
}

fn plane_points(n: usize, dims: usize) -> Vec<SpectralState> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let s = std::f64::consts::FRAC_2_PI.sqrt();
    (0..n)
        .map(|_| {
            let mut c = vec![0.0; 8];
            for v in c.iter_mut().take(dims) {
                *v = rng.random::<f64>() * s;
            }
            SpectralState::new(c).unwrap()
        })
        .collect()
}

#[test]
fn box_counting_synthetic_clouds() {
    let line = box_counting(&plane_points(2000, 1), &[0.1, 0.05, 0.04, 0.02, 0.01]).unwrap();
    assert!((line.dim - 1.0).abs() <= 0.15, "{line:?}");
    let plane = box_counting(&plane_points(20000, 2), &[0.2, 0.1, 0.05, 0.04, 0.02]).unwrap();
    assert!((plane.dim - 2.0).abs() <= 0.2, "{:?}", plane.dim);
    assert!(plane.ci_low <= plane.dim && plane.dim <= plane.ci_high);

    let same = vec![parabola(8); 150];
    let d = box_counting(&same, &[0.1, 0.03, 0.01]).unwrap();
    assert!(d.degenerate && d.dim == 0.0);
    assert!(box_counting(&same[..50], &[0.1, 0.03, 0.01]).is_err());
    assert!(box_counting(&plane_points(200, 1), &[0.1, 0.05, 0.02]).is_err());
}

#[test]
fn linear_attraction_rate_matches_lambda() {
    let gen = GeneratorFamily::new(K, potential(0.3, 0.0), &path(30, -18.5, 0.5, 1e-3, K)).unwrap();
    let ens = Ensemble {
        law: InitialLaw::Sphere {
            radius: 5.0,
            smoothness: 1.0,
        },
        count: 4,
        seed: 2,
    };
    let initial = ens.sample(K).unwrap();
    let grid: Vec<f64> = (1..=8).map(|i| i as f64).collect();
    let fit = attraction_rate(
        &initial,
        &[SpectralState::zeros(K)],
        &grid,
        &gen,
        &Nonlinearity::Zero,
        0.0,
        &SolverParams::new(1e-3),
    )
    .unwrap();
    assert!((fit.alpha / gen.lambda() - 1.0).abs() < 0.1, "{fit:?}");
    assert!(fit.positive);
    assert!(attraction_rate(&initial, &[], &grid, &gen, &Nonlinearity::Zero, 0.0, &SolverParams::new(1e-3)).is_err());
}

#[test]
fn attraction_rate_nonlinear_instance() {
    let gen = default_gen(31, -30.5, 0.5);
    let p = SolverParams::new(1e-3);
    let proxy = pullback_cloud(
        &Ensemble {
            law: InitialLaw::Ball {
                radius: 5.0,
                smoothness: 1.0,
            },
            count: 4,
            seed: 5,
        },
        20.0,
        &gen,
        &TANH,
        0.1,
        &p,
        None,
    )
    .unwrap();
    let grid: Vec<f64> = (1..=6).map(|i| i as f64).collect();
    let mk = |count| {
        Ensemble {
            law: InitialLaw::Sphere {
                radius: 50.0,
                smoothness: 1.0,
            },
            count,
            seed: 8,
        }
        .sample(K)
        .unwrap()
    };
    let small = attraction_rate(&mk(4), &proxy.points, &grid, &gen, &TANH, 0.1, &p).unwrap();
    let large = attraction_rate(&mk(8), &proxy.points, &grid, &gen, &TANH, 0.1, &p).unwrap();
    assert!(small.positive && large.positive);
    assert!((small.alpha / large.alpha - 1.0).abs() < 0.05, "{} vs {}", small.alpha, large.alpha);

    // the proxy's own ensemble started at T reproduces the proxy
    let own = proxy.ensemble.sample(K).unwrap();
    let late = [16.0, 18.0, 20.0];
    let fit = attraction_rate(&own, &proxy.points, &late, &gen, &TANH, 0.1, &p);
    match fit {
        Err(Error::Degenerate(_)) => {}
        Ok(f) => panic!("expected a zero distance at T, got {:?}", f.distances),
        Err(e) => panic!("{e}"),
    }
}
