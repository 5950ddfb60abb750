use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use pullback_core::attractor::{
    absorbing_radius, absorbing_time, attraction_rate, box_counting, covering_number, nu_sweep, pullback_cloud,
    smoothing_constant, DimensionReport, MIN_POINTS,
};
use pullback_core::config::{env_overrides, parse_assignment, sha256_hex, RunConfig};
use pullback_core::io::csv_row;
use pullback_core::solver::{pathwise_mild_solve, write_trajectory_binary, write_trajectory_csv};
use pullback_core::verify::{any_failed, regression_baseline, run_suite, summary_table, ResultsFile, Suite};
use pullback_core::Error;

/// Horizon over which empirical absorbing times are searched.
const ABSORBING_HORIZON: f64 = 60.0;

#[derive(Parser)]
#[command(name = "pullback", version, about = "Pathwise mild solutions and random attractor diagnostics")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single noise seed (replaces `noise.seeds`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override a config key, e.g. `--set drift.sigma=0.2`. Repeatable.
    #[arg(long = "set", value_name = "K=V", global = true)]
    set: Vec<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (defaults to `output.dir`).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory per seed over `simulate.horizon`.
    Simulate,
    /// Run the property checks.
    Verify {
        /// estimates, cocycle, absorbing, smoothing, lipschitz, compactness, dimension or all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Results file of an earlier run to compare against.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Relative change of a measured value that counts as drift.
        #[arg(long, default_value_t = 0.05)]
        drift_tolerance: f64,
    },
    /// Absorbing radii, pullback clouds, dimension and attraction rate per fiber.
    Attractor,
    /// Smoothing constant, dimension bound over the ν grid and covering numbers.
    Dimension,
}

/// Errors that end the run, with their exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::UnknownSuite(_)
            | Error::Condition { .. }
            | Error::InvalidParameter { .. }
            | Error::Schema(_)
            | Error::Io(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type Outcome = std::result::Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let config = load_config(&cli.common)?;
    let dir = cli
        .common
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.dir));
    fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("output directory {}: {e}", dir.display())))?;
    let mut out = Output::new(dir);
    out.write("config.toml", config.snapshot().as_bytes())?;
    let (name, ok) = match cli.command {
        Command::Simulate => ("simulate", simulate(&config, &mut out)?),
        Command::Verify {
            suite,
            baseline,
            drift_tolerance,
        } => {
            let suite: Suite = suite.parse()?;
            ("verify", verify(&config, suite, baseline.as_deref(), drift_tolerance, &mut out)?)
        }
        Command::Attractor => ("attractor", attractor(&config, &mut out)?),
        Command::Dimension => ("dimension", dimension(&config, &mut out)?),
    };
    out.manifest(name, &config)?;
    Ok(ok)
}

/// Defaults, then the config file, then `PULLBACK__*` variables, then `--seed` and `--set`.
fn load_config(c: &Common) -> Result<RunConfig, Failure> {
    let text = match &c.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Config(format!("config {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut overrides = env_overrides(std::env::vars());
    if let Some(seed) = c.seed {
        overrides.push(("noise.seeds".into(), format!("[{seed}]")));
    }
    for s in &c.set {
        overrides.push(parse_assignment(s)?);
    }
    Ok(RunConfig::load(&text, &overrides)?)
}

/// Files written so far, for the manifest.
struct Output {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Output {
    fn new(dir: PathBuf) -> Self {
        Output {
            dir,
            files: BTreeMap::new(),
        }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(v).expect("json serialises");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn manifest(&mut self, command: &str, config: &RunConfig) -> Result<(), Failure> {
        let m = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seeds": config.noise.seeds,
            "config_hash": config.hash(),
            "config_file": "config.toml",
            "files": self.files,
        });
        let text = serde_json::to_string_pretty(&m).expect("json serialises") + "\n";
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

fn to_json(v: &impl serde::Serialize) -> Value {
    serde_json::to_value(v).expect("json serialises")
}

fn simulate(c: &RunConfig, out: &mut Output) -> Outcome {
    let f = c.nonlinearity();
    let params = c.solver_params();
    let u0 = c.initial_state();
    let horizon = c.simulate.horizon;
    let runs = c
        .noise
        .seeds
        .par_iter()
        .map(|&seed| {
            let gen = c.generator(&c.path(seed, 0.0, horizon)?)?;
            let traj = pathwise_mild_solve(&u0, horizon, &gen, &f, c.drift.sigma, &params)?;
            Ok((seed, traj))
        })
        .collect::<pullback_core::Result<Vec<_>>>()?;
    let snapshot = c.snapshot();
    for (seed, traj) in &runs {
        if c.output.formats.iter().any(|f| f == "csv") {
            let mut buf = Vec::new();
            write_trajectory_csv(traj, &mut buf)?;
            out.write(&format!("trajectory_seed{seed}.csv"), &buf)?;
        }
        if c.output.formats.iter().any(|f| f == "bin") {
            let mut buf = Vec::new();
            write_trajectory_binary(traj, &snapshot, &mut buf)?;
            out.write(&format!("trajectory_seed{seed}.bin"), &buf)?;
        }
        println!(
            "seed {seed}: {} steps to t = {horizon}, terminal norm {:.6e}",
            traj.len() - 1,
            traj.last().norm()
        );
    }
    Ok(true)
}

fn verify(c: &RunConfig, suite: Suite, baseline: Option<&Path>, tol: f64, out: &mut Output) -> Outcome {
    let results = run_suite(suite, c)?;
    let file = ResultsFile::new(results);
    out.write("results.json", (file.to_json() + "\n").as_bytes())?;
    let table = summary_table(&file.results);
    out.write("summary.txt", table.as_bytes())?;
    print!("{table}");
    if let Some(path) = baseline {
        let cmp = regression_baseline(path, &file.results, tol)?;
        out.json("drift.json", &to_json(&cmp))?;
        for d in cmp.drifted() {
            println!("drift {:?}: {} ({:?} -> {:?})", d.kind, d.id, d.baseline, d.current);
        }
        println!("{} of {} checks drifted, {} regressions", cmp.drifted().count(), cmp.rows.len(), cmp.regressions());
    }
    Ok(!any_failed(&file.results))
}

fn attractor(c: &RunConfig, out: &mut Output) -> Outcome {
    let f = c.nonlinearity();
    let params = c.solver_params();
    let sigma = c.drift.sigma;
    let eta = c.attractor.eta;
    let potential = c.potential()?;
    let k = c.constants(&potential)?;
    let smoothing = smoothing_constant(&k.clone().with_c_tilde(eta, c.attractor.t_tilde), c.attractor.t_tilde, eta)?;
    let sweep = nu_sweep(&c.attractor.nu_grid, eta, smoothing.kappa, c.instance.modes)?;
    write_sweep(out, &sweep)?;
    let ens = c.ensemble();
    let t_max = c.attractor.pullback.iter().copied().fold(0.0, f64::max);
    let s_max = c.attractor.rate_grid.iter().copied().fold(0.0, f64::max);
    let back = t_max.max(s_max) + c.attractor.history.max(ABSORBING_HORIZON);

    let mut fibers = Vec::new();
    let mut consistent = true;
    for &seed in &c.noise.seeds {
        let gen = c.generator(&c.path(seed, back, 0.5)?)?;
        let spec = absorbing_radius(gen.path(), &k, &c.absorbing_options())?;
        // not absorbed within the horizon: clouds are written unchecked
        let (t_abs, t_abs_error) = match absorbing_time(gen.path(), &k, ens.radius(), spec.delta, ABSORBING_HORIZON) {
            Ok(t) => (Some(t), None),
            Err(Error::InsufficientHistory { .. }) => {
                (None, Some(format!("ball not absorbed within {ABSORBING_HORIZON} time units")))
            }
            Err(e) => return Err(e.into()),
        };
        let mut clouds = Vec::new();
        let mut proxy = None;
        for &t in &c.attractor.pullback {
            let check = t_abs.is_some_and(|a| t >= a).then_some(&spec);
            let cloud = pullback_cloud(&ens, t, &gen, &f, sigma, &params, check)?;
            let name = format!("cloud_seed{seed}_T{t}.csv");
            out.write(&name, cloud.to_csv().as_bytes())?;
            clouds.push(json!({
                "pullback_time": t,
                "file": name,
                "max_norm": cloud.max_norm,
                "diameter": cloud.diameter(),
                "checked_radius": cloud.radius,
            }));
            if t == t_max {
                proxy = Some(cloud);
            }
        }
        let proxy = proxy.expect("pullback list is non-empty");
        let boxes = if proxy.points.len() >= MIN_POINTS {
            let d = proxy.diameter();
            let eps: Vec<f64> = c.attractor.eps_range.iter().map(|r| r * d).collect();
            Some(box_counting(&proxy.points, &eps))
        } else {
            None
        };
        let (boxes, box_error) = match boxes {
            Some(Ok(b)) => (Some(b), None),
            Some(Err(e)) => (None, Some(e.to_string())),
            None => (None, Some(format!("cloud has fewer than {MIN_POINTS} points"))),
        };
        let report = DimensionReport::new(sweep.clone(), boxes.as_ref());
        consistent &= report.consistent();
        let initial = ens.sample(c.instance.modes)?;
        let rate = match attraction_rate(&initial, &proxy.points, &c.attractor.rate_grid, &gen, &f, sigma, &params) {
            Ok(r) => to_json(&r),
            Err(e) => json!({ "error": e.to_string() }),
        };
        println!(
            "seed {seed}: rho {:.6e}, delta {:.3e}, absorbing time {}, dimension {} <= {:.4}",
            spec.rho,
            spec.delta,
            t_abs.map_or("n/a".to_string(), |t| t.to_string()),
            report.empirical_dim.map_or("n/a".to_string(), |d| format!("{d:.4}")),
            report.bound,
        );
        out.json(&format!("absorbing_seed{seed}.json"), &to_json(&spec))?;
        fibers.push(json!({
            "seed": seed,
            "absorbing": to_json(&spec),
            "absorbing_time": t_abs,
            "absorbing_time_error": t_abs_error,
            "clouds": clouds,
            "box_counting": boxes.as_ref().map(to_json),
            "box_counting_error": box_error,
            "dimension": to_json(&report),
            "bound_at_least_empirical": report.consistent(),
            "attraction_rate": rate,
        }));
    }
    out.json(
        "report.json",
        &json!({
            "config_hash": c.hash(),
            "smoothing": to_json(&smoothing),
            "bound": sweep.min_bound,
            "nu_argmin": sweep.argmin,
            "fibers": fibers,
            "consistent": consistent,
        }),
    )?;
    Ok(consistent)
}

fn write_sweep(out: &mut Output, sweep: &pullback_core::attractor::NuSweep) -> Result<(), Failure> {
    let mut s = String::from("nu,eps,log_covering,head_modes,bound\n");
    for r in &sweep.rows {
        s.push_str(&csv_row([
            r.nu,
            r.covering.eps,
            r.covering.log_upper,
            r.covering.head_modes as f64,
            r.bound,
        ]));
        s.push('\n');
    }
    out.write("nu_sweep.csv", s.as_bytes())
}

fn dimension(c: &RunConfig, out: &mut Output) -> Outcome {
    let eta = c.attractor.eta;
    let t_tilde = c.attractor.t_tilde;
    let k = c.constants(&c.potential()?)?.with_c_tilde(eta, t_tilde);
    let smoothing = smoothing_constant(&k, t_tilde, eta)?;
    let sweep = nu_sweep(&c.attractor.nu_grid, eta, smoothing.kappa, c.instance.modes)?;
    write_sweep(out, &sweep)?;
    let mut table = String::from("eps,log_upper,log2_upper,head_modes,method,log_lower\n");
    for i in 0..=24 {
        let eps = 10f64.powf(-3.0 + i as f64 / 8.0);
        let b = covering_number(eta, eps, c.instance.modes)?;
        let method = serde_json::to_value(b.method).expect("json serialises");
        table.push_str(&format!(
            "{},{},{}\n",
            csv_row([eps, b.log_upper, b.log2_upper(), b.head_modes as f64]),
            method.as_str().unwrap_or_default(),
            b.log_lower.map_or(String::new(), |l| csv_row([l])),
        ));
    }
    out.write("covering.csv", table.as_bytes())?;
    out.json(
        "dimension.json",
        &json!({
            "config_hash": c.hash(),
            "smoothing": to_json(&smoothing),
            "sweep": to_json(&sweep),
        }),
    )?;
    println!(
        "kappa {:.6} (statement form {:.6}); bound {:.4} at nu = {}",
        smoothing.kappa, smoothing.statement_kappa, sweep.min_bound, sweep.argmin
    );
    Ok(true)
}
