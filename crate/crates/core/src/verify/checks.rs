use serde::{Deserialize, Serialize};

use super::CheckResult;
use crate::attractor::{
    absorbing_radius, absorbing_time, box_counting, check_absorbing, covering_number, entropy_slope, nu_sweep,
    pullback_cloud, smoothing_constant, Ensemble, InitialLaw, BRUTE_FORCE_MODES,
};
use crate::config::{DriftKind, RunConfig};
use crate::error::Result;
use crate::operator::{verify_decay_estimates, DecayEstimate, DecaySample, EstimateConstants, GeneratorFamily};
use crate::solver::{cocycle_defect, lipschitz_probe, pathwise_mild_solve, Nonlinearity, SolverParams};
use crate::spectral::SpectralState;

/// Pullback time of the absorbing-inequality runs.
const ABSORBING_PULLBACK: f64 = 10.0;
const ABSORBING_CHECKPOINTS: usize = 10;
/// Horizon over which empirical absorbing times are searched.
const ABSORBING_HORIZON: f64 = 60.0;
/// Shifts `t` of the fiber `θ_{−t} ω` in the monotonicity check.
const MONOTONICITY_SHIFTS: [f64; 4] = [1.0, 2.0, 5.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// The three decay estimates of the evolution system.
    Estimates,
    Cocycle,
    /// The absorbing inequality along pullback runs.
    Absorbing,
    /// Absorbing time on `θ_{−t} ω` at most that on `ω`.
    Monotonicity,
    Smoothing,
    Lipschitz,
    /// Uniform `X_η` bound at the absorbing time.
    Compactness,
    /// Box-counting dimension against the covering bound.
    Dimension,
}

fn with(base: &RunConfig, f: impl FnOnce(&mut RunConfig)) -> RunConfig {
    let mut c = base.clone();
    f(&mut c);
    c
}

/// Smaller `C_F`; the history integrals then converge more slowly.
fn weak_drift(c: &mut RunConfig) {
    c.drift.c_f = 0.15;
    c.attractor.history = c.attractor.history.max(110.0);
}

fn fisher(c: &mut RunConfig) {
    c.drift.kind = DriftKind::FisherKppClipped;
    c.drift.a = 0.1;
    c.drift.r = 1.0;
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Estimates => "estimates",
            Family::Cocycle => "cocycle",
            Family::Absorbing => "absorbing",
            Family::Monotonicity => "monotonicity",
            Family::Smoothing => "smoothing",
            Family::Lipschitz => "lipschitz",
            Family::Compactness => "compactness",
            Family::Dimension => "dimension",
        }
    }

    /// Labelled parameter variations of `base` this family runs on.
    pub fn configurations(self, base: &RunConfig) -> Vec<(String, RunConfig)> {
        let v = |label: &str, c: RunConfig| (label.to_string(), c);
        let b = base.clone();
        match self {
            Family::Estimates => vec![
                v("default", b),
                v("wide_potential", with(base, |c| {
                    c.instance.a0 = 0.0;
                    c.instance.eps = 0.5;
                })),
                v("constant_potential", with(base, |c| {
                    c.instance.a0 = 0.5;
                    c.instance.eps = 0.0;
                })),
            ],
            Family::Cocycle => vec![
                v("linear_exact", with(base, |c| {
                    c.drift.kind = DriftKind::Zero;
                    c.drift.sigma = 0.0;
                })),
                v("default", b),
                v("linear_drift", with(base, |c| {
                    c.drift.kind = DriftKind::Linear;
                    c.drift.rho = 0.2;
                })),
                v("fisher_kpp", with(base, fisher)),
            ],
            Family::Absorbing | Family::Monotonicity => vec![
                v("default", b),
                v("strong_noise", with(base, |c| c.drift.sigma = 0.2)),
                v("large_growth", with(base, |c| {
                    c.drift.c_f_bar = 1.0;
                })),
            ],
            Family::Smoothing => vec![
                v("default", b),
                v("low_eta", with(base, |c| c.attractor.eta = 0.25)),
                v("long_time", with(base, |c| c.attractor.t_tilde = 2.0)),
            ],
            Family::Lipschitz => vec![
                v("default", b),
                v("weak_drift", with(base, weak_drift)),
                v("strong_drift", with(base, |c| c.drift.c_f = 0.45)),
                v("fisher_kpp", with(base, fisher)),
            ],
            Family::Compactness => [0.25, 0.5, 0.7]
                .iter()
                .map(|&eta| v(&format!("eta_{eta}"), with(base, |c| c.attractor.eta = eta)))
                .collect(),
            Family::Dimension => vec![
                v("default", b),
                v("strong_noise", with(base, |c| c.drift.sigma = 0.2)),
                v("weak_drift", with(base, weak_drift)),
                v("covering", base.clone()),
            ],
        }
    }

    pub fn run(self, label: &str, c: &RunConfig) -> Result<Vec<CheckResult>> {
        match self {
            Family::Estimates => estimates(label, c),
            Family::Cocycle => cocycle(label, c),
            Family::Absorbing => absorbing(label, c),
            Family::Monotonicity => monotonicity(label, c),
            Family::Smoothing => smoothing(label, c),
            Family::Lipschitz => lipschitz(label, c),
            Family::Compactness => compactness(label, c),
            Family::Dimension if label == "covering" => covering(label, c),
            Family::Dimension => dimension(label, c),
        }
    }
}

fn id(f: Family, label: &str, what: &str) -> String {
    if what.is_empty() {
        format!("{}.{label}", f.name())
    } else {
        format!("{}.{label}.{what}", f.name())
    }
}

fn fiber(c: &RunConfig, seed: u64, back: f64, fwd: f64) -> Result<GeneratorFamily> {
    c.generator(&c.path(seed, back, fwd)?)
}

fn constants(c: &RunConfig) -> Result<EstimateConstants> {
    c.constants(&c.potential()?)
}

fn terminal(
    u0: &SpectralState,
    t: f64,
    gen: &GeneratorFamily,
    f: &Nonlinearity,
    sigma: f64,
    params: &SolverParams,
) -> Result<SpectralState> {
    let mut p = *params;
    p.record_every = usize::MAX;
    Ok(pathwise_mild_solve(u0, t, gen, f, sigma, &p)?.last().clone())
}

/// `n` pairs drawn from the ball of radius `radius`.
fn ball_pairs(c: &RunConfig, radius: f64, n: usize, seed: u64) -> Result<Vec<(SpectralState, SpectralState)>> {
    let pts = Ensemble {
        law: InitialLaw::Ball {
            radius,
            smoothness: c.attractor.smoothness,
        },
        count: 2 * n,
        seed,
    }
    .sample(c.instance.modes)?;
    Ok(pts.chunks(2).map(|p| (p[0].clone(), p[1].clone())).collect())
}

/// `C̃_η` fitted as the largest ratio of the first decay estimate over
/// `t − s ∈ (0, window]` and every basis vector, on one fiber.
pub fn fit_c_tilde(gen: &GeneratorFamily, constants: &EstimateConstants, eta: f64, window: f64) -> Result<f64> {
    let dt = gen.dt();
    let n = ((window / dt).round() as usize).max(1);
    let samples: Vec<DecaySample> = (1..=16)
        .map(|i| (((n * i) / 16).max(1)) as f64 * dt)
        .flat_map(|tau| {
            (1..=gen.modes()).map(move |k| DecaySample {
                estimate: DecayEstimate::Left,
                t: tau,
                s: 0.0,
                x: SpectralState::basis(gen.modes(), k).expect("k within range"),
                alpha: eta,
            })
        })
        .collect();
    let report = verify_decay_estimates(gen, constants, &samples)?;
    Ok(report.rows.iter().map(|r| r.max_ratio).fold(0.0, f64::max))
}

fn estimates(label: &str, c: &RunConfig) -> Result<Vec<CheckResult>> {
    let k = constants(c)?;
    let eta = c.attractor.eta;
    let window = c.attractor.t_tilde;
    let modes = c.instance.modes;
    let picks: Vec<usize> = [1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128]
        .into_iter()
        .filter(|&m| m <= modes)
        .collect();
    let plan = [
        (DecayEstimate::Left, 0.0),
        (DecayEstimate::Left, eta),
        (DecayEstimate::Right, eta),
        (DecayEstimate::Mixed, 0.5 * eta),
    ];
    // (key) -> (worst normalised ratio, all bounded, samples)
    let mut agg: std::collections::BTreeMap<String, (f64, bool, usize)> = Default::default();
    for &seed in &c.noise.seeds {
        let gen = fiber(c, seed, 0.0, 1.0 + window + 0.5)?;
        let mut samples = Vec::new();
        for s in [0.0, 0.5, 1.0] {
            for i in 1..=8 {
                let tau = window * i as f64 / 8.0;
                for &m in &picks {
                    for &(estimate, alpha) in &plan {
                        samples.push(DecaySample {
                            estimate,
                            t: s + tau,
                            s,
                            x: SpectralState::basis(modes, m)?,
                            alpha,
                        });
                    }
                }
            }
        }
        for r in verify_decay_estimates(&gen, &k, &samples)?.rows {
            let e = agg
                .entry(format!("{}(alpha={})", r.id, r.alpha))
                .or_insert((0.0, true, 0));
            e.0 = e.0.max(r.max_ratio / r.theoretical);
            e.1 &= r.bounded;
            e.2 += r.sample_count;
        }
    }
    Ok(agg
        .into_iter()
        .map(|(key, (ratio, bounded, n))| {
            let measured = if bounded { ratio } else { f64::INFINITY };
            CheckResult::judged(
                id(Family::Estimates, label, &key),
                Family::Estimates,
                measured,
                1.0,
                1e-9,
                c,
                format!("largest ratio over the exact worst-case constant, {n} samples, bounded under refinement: {bounded}"),
            )
        })
        .collect())
}

fn cocycle(label: &str, c: &RunConfig) -> Result<Vec<CheckResult>> {
    let f = c.nonlinearity();
    let sigma = c.drift.sigma;
    let params = c.solver_params();
    let u0 = c.initial_state();
    let mut worst = 0.0_f64;
    for &seed in &c.noise.seeds {
        let gen = fiber(c, seed, 0.0, 1.5)?;
        worst = worst.max(cocycle_defect(&u0, 0.7, 0.3, &gen, &f, sigma, &params)?);
    }
    let exact = sigma == 0.0 && f.split_linear().1.is_zero();
    let bound = if exact { 1e-9 } else { 5.0 * params.dt };
    Ok(vec![CheckResult::judged(
        id(Family::Cocycle, label, ""),
        Family::Cocycle,
        worst,
        bound,
        0.0,
        c,
        format!("(t, s) = (0.7, 0.3), {} fibers", c.noise.seeds.len()),
    )])
}

/// Initial data with norms 0 and geometric up to `max_initial_norm`.
fn absorbing_initial(c: &RunConfig) -> Result<Vec<SpectralState>> {
    let n = c.verify.initial_conditions.max(2);
    let dirs = Ensemble {
        law: InitialLaw::Sphere {
            radius: 1.0,
            smoothness: c.attractor.smoothness,
        },
        count: n,
        seed: c.attractor.ensemble_seed,
    }
    .sample(c.instance.modes)?;
    let top = c.verify.max_initial_norm;
    Ok(dirs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let r = if i == 0 {
                0.0
            } else {
                top.powf((i - 1) as f64 / (n - 2).max(1) as f64)
            };
            d.scaled(r)
        })
        .collect())
}

fn absorbing(label: &str, c: &RunConfig) -> Result<Vec<CheckResult>> {
    let f = c.nonlinearity();
    let k = constants(c)?;
    let opts = c.absorbing_options();
    let params = c.solver_params();
    let initial = absorbing_initial(c)?;
    let (mut violations, mut rows, mut worst) = (0usize, 0usize, 0.0_f64);
    for &seed in &c.noise.seeds {
        let gen = fiber(c, seed, ABSORBING_PULLBACK + c.attractor.history, 0.5)?;
        let check = check_absorbing(
            &gen,
            &f,
            &k,
            &opts,
            &params,
            &initial,
            ABSORBING_PULLBACK,
            ABSORBING_CHECKPOINTS,
        )?;
        violations += check.violations;
        rows += check.rows.len();
        worst = check.rows.iter().map(|r| r.norm / r.bound).fold(worst, f64::max);
    }
    Ok(vec![CheckResult::judged(
        id(Family::Absorbing, label, ""),
        Family::Absorbing,
        violations as f64,
        0.0,
        0.0,
        c,
        format!("{rows} (fiber, u0, t) points, largest norm/bound {worst:.4}"),
    )])
}

fn monotonicity(label: &str, c: &RunConfig) -> Result<Vec<CheckResult>> {
    let k = constants(c)?;
    let opts = c.absorbing_options();
    let shift_max = MONOTONICITY_SHIFTS.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for (name, radius) in [("small_set", c.attractor.radius), ("large_set", c.verify.max_initial_norm)] {
        let mut worst = f64::NEG_INFINITY;
        let mut base_times = Vec::new();
        for &seed in &c.noise.seeds {
            let gen = fiber(c, seed, c.attractor.history + shift_max, 0.5)?;
            let path = gen.path();
            let delta = absorbing_radius(path, &k, &opts)?.delta;
            let t0 = absorbing_time(path, &k, radius, delta, ABSORBING_HORIZON)?;
            base_times.push(t0);
            for s in MONOTONICITY_SHIFTS {
                let ts = absorbing_time(&path.shift(-s)?, &k, radius, delta, ABSORBING_HORIZON)?;
                worst = worst.max(ts - t0);
            }
        }
        out.push(CheckResult::judged(
            id(Family::Monotonicity, label, name),
            Family::Monotonicity,
            worst,
            0.0,
            c.noise.dt,
            c,
            format!("radius {radius}: largest T(θ_-t ω) - T(ω) over t in {MONOTONICITY_SHIFTS:?}; T(ω) = {base_times:?}"),
        ));
    }
    Ok(out)
}

fn smoothing(label: &str, c: &RunConfig) -> Result<Vec<CheckResult>> {
    let f = c.nonlinearity();
    let sigma = c.drift.sigma;
    let params = c.solver_params();
    let eta = c.attractor.eta;
    let tt = c.attractor.t_tilde;
    let mut k = constants(c)?;
    let mut worst = 0.0_f64;
    let mut kappa = f64::INFINITY;
    let mut detail = String::new();
    for &seed in &c.noise.seeds {
        let gen = fiber(c, seed, c.attractor.history, tt + 0.5)?;
        let spec = absorbing_radius(gen.path(), &k, &c.absorbing_options())?;
        let fitted = fit_c_tilde(&gen, &k, eta, tt)?;
        k.set_c_tilde(eta, tt, fitted * (1.0 + c.verify.c_tilde_headroom));
        let sm = smoothing_constant(&k, tt, eta)?;
        kappa = kappa.min(sm.kappa);
        detail = format!(
            "kappa {:.6} (statement form {:.6}), fitted C_eta {fitted:.6}",
            sm.kappa, sm.statement_kappa
        );
        for (u, v) in ball_pairs(c, spec.radius(), c.verify.pairs, seed)? {
            let a = terminal(&u, tt, &gen, &f, sigma, &params)?;
            let b = terminal(&v, tt, &gen, &f, sigma, &params)?;
            worst = worst.max((&a - &b).norm_eta(eta) / u.distance(&v));
        }
    }
    Ok(vec![CheckResult::judged(
        id(Family::Smoothing, label, ""),
        Family::Smoothing,
        worst,
        kappa,
        0.0,
        c,
        format!("{} pairs per fiber in B(0, rho + delta); {detail}", c.verify.pairs),
    )])
}

fn lipschitz(label: &str, c: &RunConfig) -> Result<Vec<CheckResult>> {
    let f = c.nonlinearity();
    let k = constants(c)?;
    let params = c.solver_params();
    let tt = c.attractor.t_tilde;
    let mut worst = 0.0_f64;
    for &seed in &c.noise.seeds {
        let gen = fiber(c, seed, c.attractor.history, tt + 0.5)?;
        let spec = absorbing_radius(gen.path(), &k, &c.absorbing_options())?;
        let pairs = ball_pairs(c, spec.radius(), c.verify.pairs, seed)?;
        for t in [0.25 * tt, 0.5 * tt, tt] {
            let fit = lipschitz_probe(&gen, &f, c.drift.sigma, &params, &pairs, t)?;
            worst = worst.max(fit.l_hat);
        }
    }
    Ok(vec![CheckResult::judged(
        id(Family::Lipschitz, label, ""),
        Family::Lipschitz,
        worst,
        k.lipschitz_bound(),
        0.0,
        c,
        format!("{} pairs per fiber at t = t~/4, t~/2, t~", c.verify.pairs),
    )])
}

fn compactness(label: &str, c: &RunConfig) -> Result<Vec<CheckResult>> {
    let f = c.nonlinearity();
    let k = constants(c)?;
    let params = c.solver_params();
    let eta = c.attractor.eta;
    let n = c.verify.compactness_count;
    let radius = c.attractor.radius;
    let (mut sup_n, mut sup_2n) = (0.0_f64, 0.0_f64);
    let mut times = Vec::new();
    for &seed in &c.noise.seeds {
        let gen = fiber(c, seed, c.attractor.history, 0.5)?;
        let spec = absorbing_radius(gen.path(), &k, &c.absorbing_options())?;
        let tb = absorbing_time(gen.path(), &k, radius, spec.delta, ABSORBING_HORIZON)?;
        let t = ((tb / params.dt).ceil() * params.dt).max(params.dt);
        times.push(t);
        let ens = Ensemble {
            law: InitialLaw::Ball {
                radius,
                smoothness: c.attractor.smoothness,
            },
            count: 2 * n,
            seed: c.attractor.ensemble_seed ^ seed,
        };
        let cloud = pullback_cloud(&ens, t, &gen, &f, c.drift.sigma, &params, Some(&spec))?;
        let norms: Vec<f64> = cloud.points.iter().map(|p| p.norm_eta(eta)).collect();
        sup_n = norms[..n].iter().copied().fold(sup_n, f64::max);
        sup_2n = norms.iter().copied().fold(sup_2n, f64::max);
    }
    let drift = if sup_n > 0.0 { (sup_2n - sup_n) / sup_n } else { 0.0 };
    Ok(vec![
        CheckResult::judged(
            id(Family::Compactness, label, "doubling_drift"),
            Family::Compactness,
            drift,
            0.1,
            0.0,
            c,
            format!("sup X_eta norm {sup_n:.6} with {n} members, {sup_2n:.6} with {}", 2 * n),
        ),
        CheckResult::info(
            id(Family::Compactness, label, "sup_norm"),
            Family::Compactness,
            sup_2n,
            c,
            format!("X_eta norm at the absorbing times {times:?}, eta = {eta}"),
        ),
    ])
}

fn dimension(label: &str, c: &RunConfig) -> Result<Vec<CheckResult>> {
    let f = c.nonlinearity();
    let params = c.solver_params();
    let eta = c.attractor.eta;
    let tt = c.attractor.t_tilde;
    let k = constants(c)?.with_c_tilde(eta, tt);
    let sm = smoothing_constant(&k, tt, eta)?;
    let sweep = nu_sweep(&c.attractor.nu_grid, eta, sm.kappa, c.instance.modes)?;
    let t = c.verify.dimension_pullback;
    let ens = Ensemble {
        count: c.verify.dimension_count,
        ..c.ensemble()
    };
    let mut worst = f64::NEG_INFINITY;
    let mut detail = Vec::new();
    for &seed in &c.noise.seeds {
        let gen = fiber(c, seed, t, 0.5)?;
        let cloud = pullback_cloud(&ens, t, &gen, &f, c.drift.sigma, &params, None)?;
        let d = cloud.diameter();
        let eps: Vec<f64> = c.attractor.eps_range.iter().map(|r| r * d).collect();
        let bc = box_counting(&cloud.points, &eps)?;
        worst = worst.max(bc.dim);
        detail.push(format!("{:.3} [{:.3}, {:.3}]", bc.dim, bc.ci_low, bc.ci_high));
    }
    Ok(vec![CheckResult::judged(
        id(Family::Dimension, label, ""),
        Family::Dimension,
        worst,
        sweep.min_bound,
        0.0,
        c,
        format!(
            "box dimension per fiber {}; bound at nu = {} with kappa {:.6}",
            detail.join(", "),
            sweep.argmin,
            sm.kappa
        ),
    )])
}

fn covering(label: &str, c: &RunConfig) -> Result<Vec<CheckResult>> {
    let mut bad = 0usize;
    let mut cases = 0usize;
    for modes in 1..=BRUTE_FORCE_MODES {
        for eta in [0.25, 0.5, 0.75] {
            for eps in [0.1, 0.2, 0.3, 0.5, 0.8] {
                let b = covering_number(eta, eps, modes)?;
                cases += 1;
                if b.log_lower.is_some_and(|l| l > b.log_upper) {
                    bad += 1;
                }
            }
        }
    }
    let mut out = vec![CheckResult::judged(
        id(Family::Dimension, label, "packing_below_cover"),
        Family::Dimension,
        bad as f64,
        0.0,
        0.0,
        c,
        format!("{cases} instances with at most {BRUTE_FORCE_MODES} modes"),
    )];
    for (eta, lo, modes) in [(0.5, 0.01, 2048), (0.75, 0.003, 1024)] {
        let slope = entropy_slope(eta, lo, modes)?;
        let expected = 1.0 / (2.0 * eta);
        out.push(CheckResult::judged(
            id(Family::Dimension, label, &format!("entropy_rate(eta={eta})")),
            Family::Dimension,
            (slope / expected - 1.0).abs(),
            0.2,
            0.0,
            c,
            format!("fitted slope {slope:.4} vs {expected} over eps in [{lo}, {}]", lo * 10.0),
        ));
    }
    Ok(out)
}
