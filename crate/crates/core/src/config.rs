//! Run configuration: one TOML document with flat dotted keys such as
//! `drift.c_f = 0.25`, layered as preset defaults < file < environment <
//! `--set` overrides.
//!
//! Environment overrides use `PULLBACK__SECTION__KEY=value`, e.g.
//! `PULLBACK__SOLVER__DT=0.002` sets `solver.dt`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::attractor::{AbsorbingOptions, Ensemble, InitialLaw};
use crate::error::{Error, Result};
use crate::noise::{sample_path, Decay, NoiseGrid, NoisePath, OuParams};
use crate::operator::{EstimateConstants, GeneratorFamily, Potential};
use crate::solver::{Nonlinearity, Quadrature, SolverParams};
use crate::spectral::SpectralState;

/// Prefix of environment overrides.
pub const ENV_PREFIX: &str = "PULLBACK__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Default,
    /// Clipped Fisher–KPP drift started from a plateau.
    FisherKpp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    pub instance: InstanceConfig,
    pub noise: NoiseConfig,
    pub drift: DriftConfig,
    pub solver: SolverConfig,
    pub simulate: SimulateConfig,
    pub attractor: AttractorConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceConfig {
    pub modes: usize,
    /// Informational: the instance is fixed to `(0, π)`.
    pub domain_length: f64,
    pub a0: f64,
    pub eps: f64,
    /// OU mean-reversion rate.
    pub mu: f64,
    /// OU truncation horizon; defaults to `10/μ`.
    pub ou_horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub dt: f64,
    pub beta: f64,
    pub gamma: f64,
    pub amplitude: f64,
    /// Fibers: one noise path per seed.
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    Zero,
    Linear,
    ScaledTanh,
    FisherKppClipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    pub kind: DriftKind,
    pub c_f: f64,
    pub c_f_bar: f64,
    pub rho: f64,
    pub a: f64,
    pub r: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub quadrature: Quadrature,
    pub singular_quadrature_refinement: usize,
    /// Trajectory output keeps every n-th state.
    pub record_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialProfile {
    Zero,
    /// `x(π − x)`.
    Parabola,
    /// `sin x`.
    FirstMode,
    /// Indicator of `(π/4, 3π/4)`.
    Plateau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub horizon: f64,
    pub u0: InitialProfile,
    pub u0_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    Origin,
    Sphere,
    Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttractorConfig {
    /// Pullback times; the largest gives the attractor proxy.
    pub pullback: Vec<f64>,
    pub law: LawKind,
    pub radius: f64,
    pub smoothness: f64,
    pub count: usize,
    pub ensemble_seed: u64,
    pub delta_fraction: f64,
    /// History used for the absorbing radius integrals.
    pub history: f64,
    pub eta: f64,
    pub t_tilde: f64,
    pub nu_grid: Vec<f64>,
    /// Box sizes relative to the cloud diameter.
    pub eps_range: Vec<f64>,
    pub rate_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Pairs per Lipschitz and smoothing configuration.
    pub pairs: usize,
    /// Initial conditions per fiber in the absorbing check.
    pub initial_conditions: usize,
    /// Largest initial norm in the absorbing check.
    pub max_initial_norm: f64,
    /// Headroom on the fitted `C̃_η` in the smoothing check.
    pub c_tilde_headroom: f64,
    /// Ensemble size of the compactness check (doubled once).
    pub compactness_count: usize,
    /// Cloud size and pullback time of the dimension check.
    pub dimension_count: usize,
    pub dimension_pullback: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    /// Any of `csv`, `bin`.
    pub formats: Vec<String>,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            modes: 64,
            domain_length: std::f64::consts::PI,
            a0: 0.3,
            eps: 0.2,
            mu: 1.0,
            ou_horizon: None,
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            dt: 1e-3,
            beta: 0.75,
            gamma: 1.5,
            amplitude: 1.0,
            seeds: vec![1],
        }
    }
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            kind: DriftKind::ScaledTanh,
            c_f: 0.25,
            c_f_bar: 0.5,
            rho: 0.0,
            a: 0.1,
            r: 1.0,
            sigma: 0.1,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SolverParams::new(1e-3);
        SolverConfig {
            dt: p.dt,
            picard_tol: p.picard_tol,
            picard_max_iter: p.picard_max_iter,
            quadrature: p.quadrature,
            singular_quadrature_refinement: p.singular_quadrature_refinement,
            record_every: 10,
        }
    }
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            horizon: 10.0,
            u0: InitialProfile::Parabola,
            u0_scale: 1.0,
        }
    }
}

impl Default for AttractorConfig {
    fn default() -> Self {
        AttractorConfig {
            pullback: vec![10.0, 20.0],
            law: LawKind::Sphere,
            radius: 2.0,
            smoothness: 1.0,
            count: 128,
            ensemble_seed: 7,
            delta_fraction: 0.05,
            history: 80.0,
            eta: 0.5,
            t_tilde: 1.0,
            nu_grid: (1..=9).map(|i| i as f64 / 20.0).collect(),
            eps_range: vec![0.5, 0.35, 0.25, 0.18, 0.125, 0.09, 0.0625, 0.045],
            rate_grid: (1..=8).map(|i| i as f64).collect(),
        }
    }
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            pairs: 32,
            initial_conditions: 8,
            max_initial_norm: 1e3,
            c_tilde_headroom: 0.1,
            compactness_count: 16,
            dimension_count: 128,
            dimension_pullback: 10.0,
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            formats: vec!["csv".into()],
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: Preset::Default,
            instance: Default::default(),
            noise: Default::default(),
            drift: Default::default(),
            solver: Default::default(),
            simulate: Default::default(),
            attractor: Default::default(),
            verify: Default::default(),
            output: Default::default(),
        }
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let mut c = RunConfig {
            preset,
            ..Default::default()
        };
        if preset == Preset::FisherKpp {
            c.drift.kind = DriftKind::FisherKppClipped;
            c.drift.a = 0.1;
            c.drift.r = 1.0;
            c.simulate.u0 = InitialProfile::Plateau;
        }
        c
    }

    /// Parses `text` (may be empty), applies `overrides` in order and validates.
    pub fn load(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut user: Table = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        for (k, v) in overrides {
            set_dotted(&mut user, k, parse_value(v))?;
        }
        let preset = match user.get("preset") {
            None => Preset::Default,
            Some(v) => Preset::deserialize(v.clone())
                .map_err(|e| Error::Config(format!("preset: {}", e.message())))?,
        };
        let mut merged = Table::try_from(RunConfig::preset(preset)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: RunConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The resolved configuration as TOML; loading it back gives the same config.
    pub fn snapshot(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of [`snapshot`](Self::snapshot), hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(self.snapshot().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        let potential = self.potential()?;
        self.decay()?;
        let f = self.nonlinearity();
        f.validate()?;
        if self.drift.sigma < 0.0 || !self.drift.sigma.is_finite() {
            return Err(field("drift.sigma", "must be finite and non-negative"));
        }
        if self.instance.modes == 0 {
            return Err(field("instance.modes", "must be positive"));
        }
        if let Nonlinearity::Linear { rho } = f {
            // folded into the generator: its decay rate must stay positive
            if potential.lambda() - rho <= 0.0 {
                return Err(Error::Condition {
                    condition: "Drift",
                    detail: format!("lambda - rho = {} - {rho} must be positive", potential.lambda()),
                });
            }
        } else {
            self.constants(&potential)?;
        }
        let p = self.solver_params();
        p.cells_per_step(self.noise.dt)
            .map_err(|e| Error::Config(format!("solver.dt: {e}")))?;
        if self.noise.seeds.is_empty() {
            return Err(field("noise.seeds", "must not be empty"));
        }
        if !(self.simulate.horizon > 0.0) {
            return Err(field("simulate.horizon", "must be positive"));
        }
        let a = &self.attractor;
        if a.pullback.is_empty() || a.pullback.iter().any(|t| !(*t > 0.0)) {
            return Err(field("attractor.pullback", "need at least one positive time"));
        }
        if a.nu_grid.is_empty() || a.nu_grid.iter().any(|n| !(*n > 0.0 && *n < 0.5)) {
            return Err(field("attractor.nu_grid", "need values in (0, 1/2)"));
        }
        if a.eps_range.len() < 3 {
            return Err(field("attractor.eps_range", "need at least three sizes"));
        }
        if a.rate_grid.len() < 3 {
            return Err(field("attractor.rate_grid", "need at least three times"));
        }
        if !(a.eta > 0.0 && a.eta < self.noise.beta) {
            return Err(field("attractor.eta", "must lie in (0, noise.beta)"));
        }
        if !(a.t_tilde > 0.0) {
            return Err(field("attractor.t_tilde", "must be positive"));
        }
        self.ensemble().validate()?;
        for f in &self.output.formats {
            if f != "csv" && f != "bin" {
                return Err(field("output.formats", format!("unknown format `{f}`")));
            }
        }
        Ok(())
    }

    pub fn ou(&self) -> Result<OuParams> {
        let i = &self.instance;
        match i.ou_horizon {
            Some(h) => OuParams::new(i.mu, h),
            None => OuParams::with_default_horizon(i.mu),
        }
    }

    pub fn potential(&self) -> Result<Potential> {
        Potential::new(self.instance.a0, self.instance.eps, self.ou()?)
    }

    pub fn decay(&self) -> Result<Decay> {
        Decay::new(self.noise.beta, self.noise.gamma, self.noise.amplitude)
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        let d = &self.drift;
        match d.kind {
            DriftKind::Zero => Nonlinearity::Zero,
            DriftKind::Linear => Nonlinearity::Linear { rho: d.rho },
            DriftKind::ScaledTanh => Nonlinearity::ScaledTanh {
                c_f: d.c_f,
                c_f_bar: d.c_f_bar,
            },
            DriftKind::FisherKppClipped => Nonlinearity::FisherKppClipped { a: d.a, r: d.r },
        }
    }

    pub fn solver_params(&self) -> SolverParams {
        let s = &self.solver;
        SolverParams {
            dt: s.dt,
            picard_tol: s.picard_tol,
            picard_max_iter: s.picard_max_iter,
            quadrature: s.quadrature,
            singular_quadrature_refinement: s.singular_quadrature_refinement,
            record_every: s.record_every,
        }
    }

    /// Constants of the configured drift; fails with (Drift) when `λ ≤ c C_F`.
    pub fn constants(&self, potential: &Potential) -> Result<EstimateConstants> {
        let f = self.nonlinearity();
        EstimateConstants::new(
            potential,
            self.instance.modes,
            f.lipschitz(),
            f.growth(),
            self.drift.sigma,
            self.noise.beta,
            self.attractor.eta,
        )
    }

    pub fn absorbing_options(&self) -> AbsorbingOptions {
        AbsorbingOptions {
            delta_fraction: self.attractor.delta_fraction,
            history: Some(self.attractor.history),
            ..Default::default()
        }
    }

    pub fn ensemble(&self) -> Ensemble {
        let a = &self.attractor;
        let law = match a.law {
            LawKind::Origin => InitialLaw::Origin,
            LawKind::Sphere => InitialLaw::Sphere {
                radius: a.radius,
                smoothness: a.smoothness,
            },
            LawKind::Ball => InitialLaw::Ball {
                radius: a.radius,
                smoothness: a.smoothness,
            },
        };
        Ensemble {
            law,
            count: a.count,
            seed: a.ensemble_seed,
        }
    }

    pub fn initial_state(&self) -> SpectralState {
        initial_profile(self.simulate.u0, self.instance.modes).scaled(self.simulate.u0_scale)
    }

    /// Noise path for `seed` covering `[−back, fwd]`, extended backwards by
    /// the OU horizon, with both ends rounded out to grid nodes.
    pub fn path(&self, seed: u64, back: f64, fwd: f64) -> Result<NoisePath> {
        let dt = self.noise.dt;
        let nb = ((back + self.ou()?.truncation_horizon) / dt - 1e-9).ceil().max(1.0);
        let nf = (fwd / dt - 1e-9).ceil().max(1.0);
        let grid = NoiseGrid::new(-nb * dt, nf * dt, dt)?;
        sample_path(seed, grid, self.instance.modes, self.decay()?)
    }

    pub fn generator(&self, path: &NoisePath) -> Result<GeneratorFamily> {
        GeneratorFamily::new(self.instance.modes, self.potential()?, path)
    }
}

/// Sine coefficients of the named profile on `(0, π)`.
pub fn initial_profile(profile: InitialProfile, modes: usize) -> SpectralState {
    use std::f64::consts::{FRAC_PI_4, PI};
    let coeffs = (1..=modes)
        .map(|k| {
            let kf = k as f64;
            match profile {
                InitialProfile::Zero => 0.0,
                InitialProfile::Parabola => {
                    if k % 2 == 1 {
                        8.0 / (PI * kf.powi(3))
                    } else {
                        0.0
                    }
                }
                InitialProfile::FirstMode => (k == 1) as u8 as f64,
                InitialProfile::Plateau => {
                    2.0 / (PI * kf) * ((kf * FRAC_PI_4).cos() - (3.0 * kf * FRAC_PI_4).cos())
                }
            }
        })
        .collect();
    SpectralState::new(coeffs).expect("finite coefficients")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `PULLBACK__A__B=v` pairs from `vars` as `("a.b", "v")`, sorted by key.
pub fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            Some((rest.split("__").collect::<Vec<_>>().join(".").to_lowercase(), v))
        })
        .collect();
    out.sort();
    out
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected key=value, got `{s}`")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::Config(format!("empty key in `{s}`")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

fn field(name: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("{name}: {reason}"))
}

/// A TOML literal if `v` parses as one, otherwise the bare string.
fn parse_value(v: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(v.to_string()))
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, head) = parts.split_last().expect("split yields one part");
    let mut t = table;
    for p in head {
        let entry = t.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
