//! Property harness: re-runs the quantitative checks over several parameter
//! configurations and the configured seeds, and compares results against a
//! stored baseline.

mod checks;

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub use checks::{fit_c_tilde, Family};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Estimates,
    Cocycle,
    Absorbing,
    Smoothing,
    Lipschitz,
    Compactness,
    Dimension,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "estimates" => Suite::Estimates,
            "cocycle" => Suite::Cocycle,
            "absorbing" => Suite::Absorbing,
            "smoothing" => Suite::Smoothing,
            "lipschitz" => Suite::Lipschitz,
            "compactness" => Suite::Compactness,
            "dimension" => Suite::Dimension,
            "all" => Suite::All,
            other => return Err(Error::UnknownSuite(other.to_string())),
        })
    }
}

impl Suite {
    pub fn families(self) -> Vec<Family> {
        use Family::*;
        match self {
            Suite::Estimates => vec![Estimates],
            Suite::Cocycle => vec![Cocycle],
            Suite::Absorbing => vec![Absorbing, Monotonicity],
            Suite::Smoothing => vec![Smoothing],
            Suite::Lipschitz => vec![Lipschitz],
            Suite::Compactness => vec![Compactness],
            Suite::Dimension => vec![Dimension],
            Suite::All => vec![
                Estimates,
                Cocycle,
                Absorbing,
                Monotonicity,
                Smoothing,
                Lipschitz,
                Compactness,
                Dimension,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckResult {
    pub id: String,
    pub family: Family,
    pub status: Status,
    #[serde(with = "lenient_f64")]
    pub measured: f64,
    /// NaN for informational rows.
    #[serde(with = "lenient_f64")]
    pub bound: f64,
    #[serde(with = "lenient_f64")]
    pub tolerance: f64,
    /// Hash of the configuration the check ran on.
    pub config_hash: String,
    pub detail: String,
}

impl CheckResult {
    /// A bound check: fails iff `measured > bound + tolerance` (NaN fails).
    pub fn judged(
        id: String,
        family: Family,
        measured: f64,
        bound: f64,
        tolerance: f64,
        config: &RunConfig,
        detail: String,
    ) -> Self {
        let status = if measured <= bound + tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        CheckResult {
            id,
            family,
            status,
            measured,
            bound,
            tolerance,
            config_hash: config.hash(),
            detail,
        }
    }

    pub fn info(id: String, family: Family, measured: f64, config: &RunConfig, detail: String) -> Self {
        CheckResult {
            id,
            family,
            status: Status::Info,
            measured,
            bound: f64::NAN,
            tolerance: 0.0,
            config_hash: config.hash(),
            detail,
        }
    }
}

/// Runs every configuration of every family in `suite`, in parallel.
///
/// The configuration is validated first, so a violated standing condition is
/// reported before any simulation. Results come back sorted by id.
pub fn run_suite(suite: Suite, config: &RunConfig) -> Result<Vec<CheckResult>> {
    config.validate()?;
    let jobs: Vec<(Family, String, RunConfig)> = suite
        .families()
        .into_iter()
        .flat_map(|f| f.configurations(config).into_iter().map(move |(label, c)| (f, label, c)))
        .collect();
    for (f, label, c) in &jobs {
        c.validate()
            .map_err(|e| Error::Config(format!("{}.{label}: {e}", f.name())))?;
    }
    let mut results: Vec<CheckResult> = jobs
        .par_iter()
        .map(|(f, label, c)| {
            f.run(label, c)
                .map_err(|e| Error::Config(format!("check {}.{label} failed to run: {e}", f.name())))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    results.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(results)
}

pub fn any_failed(results: &[CheckResult]) -> bool {
    results.iter().any(|r| r.status == Status::Fail)
}

/// Fixed-width summary table, one line per check.
pub fn summary_table(results: &[CheckResult]) -> String {
    let w = results.iter().map(|r| r.id.len()).max().unwrap_or(2).max(2);
    let mut s = format!("{:<w$}  {:<6}  {:>12}  {:>12}\n", "id", "status", "measured", "bound");
    for r in results {
        let status = match r.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Info => "info",
        };
        s.push_str(&format!(
            "{:<w$}  {:<6}  {:>12.5e}  {:>12.5e}\n",
            r.id, status, r.measured, r.bound
        ));
    }
    s
}

/// Schema tag of results files.
pub const RESULTS_SCHEMA: &str = "pullback-verify/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsFile {
    pub schema: String,
    pub results: Vec<CheckResult>,
}

impl ResultsFile {
    pub fn new(results: Vec<CheckResult>) -> Self {
        ResultsFile {
            schema: RESULTS_SCHEMA.into(),
            results,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ResultsFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if f.schema != RESULTS_SCHEMA {
            return Err(Error::Schema(format!(
                "expected schema `{RESULTS_SCHEMA}`, found `{}`",
                f.schema
            )));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    Unchanged,
    /// Moved away from its bound by more than the tolerance.
    ExpectedImprovement,
    /// Moved towards (or past) its bound by more than the tolerance.
    Regression,
    StatusChange,
    Missing,
    New,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub id: String,
    pub kind: DriftKind,
    #[serde(with = "lenient_opt_f64")]
    pub baseline: Option<f64>,
    #[serde(with = "lenient_opt_f64")]
    pub current: Option<f64>,
    #[serde(with = "lenient_opt_f64")]
    pub relative_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<Drift>,
    pub tolerance: f64,
}

impl Comparison {
    /// Rows that moved in any way.
    pub fn drifted(&self) -> impl Iterator<Item = &Drift> {
        self.rows.iter().filter(|d| d.kind != DriftKind::Unchanged)
    }

    pub fn regressions(&self) -> usize {
        self.rows
            .iter()
            .filter(|d| matches!(d.kind, DriftKind::Regression | DriftKind::StatusChange | DriftKind::Missing))
            .count()
    }
}

/// Compares current results against the baseline file at `path`.
pub fn regression_baseline(path: &std::path::Path, current: &[CheckResult], tolerance: f64) -> Result<Comparison> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("baseline {}: {e}", path.display())))?;
    let base = ResultsFile::from_json(&text)?;
    Ok(compare(&base.results, current, tolerance))
}

/// Per-id drift of `measured`. Relative changes above `tolerance` count as
/// drift; lower measured values are an improvement, since every bound check
/// has the form `measured ≤ bound`.
pub fn compare(baseline: &[CheckResult], current: &[CheckResult], tolerance: f64) -> Comparison {
    let base: BTreeMap<&str, &CheckResult> = baseline.iter().map(|r| (r.id.as_str(), r)).collect();
    let cur: BTreeMap<&str, &CheckResult> = current.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut rows = Vec::new();
    for (id, b) in &base {
        let Some(c) = cur.get(id) else {
            rows.push(Drift {
                id: id.to_string(),
                kind: DriftKind::Missing,
                baseline: Some(b.measured),
                current: None,
                relative_change: None,
            });
            continue;
        };
        let rel = relative_change(b.measured, c.measured);
        let kind = if b.status != c.status {
            if c.status == Status::Pass && b.status == Status::Fail {
                DriftKind::ExpectedImprovement
            } else {
                DriftKind::StatusChange
            }
        } else if rel.abs() <= tolerance {
            DriftKind::Unchanged
        } else if rel < 0.0 {
            DriftKind::ExpectedImprovement
        } else {
            DriftKind::Regression
        };
        rows.push(Drift {
            id: id.to_string(),
            kind,
            baseline: Some(b.measured),
            current: Some(c.measured),
            relative_change: Some(rel),
        });
    }
    for (id, c) in &cur {
        if !base.contains_key(id) {
            rows.push(Drift {
                id: id.to_string(),
                kind: DriftKind::New,
                baseline: None,
                current: Some(c.measured),
                relative_change: None,
            });
        }
    }
    Comparison { rows, tolerance }
}

fn relative_change(base: f64, cur: f64) -> f64 {
    if base.to_bits() == cur.to_bits() || (base.is_nan() && cur.is_nan()) {
        return 0.0;
    }
    let scale = base.abs().max(1e-300);
    (cur - base) / scale
}

/// JSON has no NaN or infinities; those are written as `"nan"`, `"inf"` and `"-inf"`.
mod lenient_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub(super) enum Repr {
        Num(f64),
        Str(String),
    }

    pub(super) fn to_repr(x: f64) -> Repr {
        if x.is_finite() {
            Repr::Num(x)
        } else if x.is_nan() {
            Repr::Str("nan".into())
        } else if x > 0.0 {
            Repr::Str("inf".into())
        } else {
            Repr::Str("-inf".into())
        }
    }

    pub(super) fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("not a number: `{other}`"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }
}

mod lenient_opt_f64 {
    use super::lenient_f64::{from_repr, to_repr, Repr};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        x.map(to_repr).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, measured: f64, bound: f64) -> CheckResult {
        CheckResult::judged(id.into(), Family::Cocycle, measured, bound, 0.0, &RunConfig::default(), String::new())
    }

    #[test]
    fn judged_fails_on_nan_and_excess() {
        assert_eq!(row("a", 1.0, 1.0).status, Status::Pass);
        assert_eq!(row("a", 1.0 + 1e-12, 1.0).status, Status::Fail);
        assert_eq!(row("a", f64::NAN, 1.0).status, Status::Fail);
        assert_eq!(row("a", f64::INFINITY, 1.0).status, Status::Fail);
    }

    #[test]
    fn results_round_trip_with_non_finite_values() {
        let info = CheckResult::info("i".into(), Family::Compactness, 2.5, &RunConfig::default(), "x".into());
        let rows = vec![row("a", f64::INFINITY, 1.0), row("b", f64::NEG_INFINITY, 0.0), info];
        let text = ResultsFile::new(rows.clone()).to_json();
        let back = ResultsFile::from_json(&text).unwrap().results;
        assert_eq!(back.len(), 3);
        assert_eq!(back[0].measured, f64::INFINITY);
        assert_eq!(back[1].measured, f64::NEG_INFINITY);
        assert!(back[2].bound.is_nan());
        assert_eq!(back[0], rows[0]);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let text = ResultsFile::new(vec![row("a", 0.5, 1.0)]).to_json().replace(RESULTS_SCHEMA, "other/9");
        assert!(matches!(ResultsFile::from_json(&text), Err(Error::Schema(_))));
        assert!(matches!(ResultsFile::from_json("{\"schema\": 3}"), Err(Error::Schema(_))));
    }

    #[test]
    fn identical_results_do_not_drift() {
        let rows = vec![row("a", 0.5, 1.0), row("b", 3.0, 1.0)];
        let cmp = compare(&rows, &rows, 1e-6);
        assert_eq!(cmp.drifted().count(), 0);
        assert_eq!(cmp.regressions(), 0);
    }

    #[test]
    fn drift_classification() {
        let base = vec![row("a", 1e-3, 1.0), row("b", 0.5, 1.0), row("c", 0.5, 1.0), row("gone", 0.1, 1.0)];
        let cur = vec![row("a", 2.5e-4, 1.0), row("b", 0.6, 1.0), row("c", 1.5, 1.0), row("new", 0.1, 1.0)];
        let cmp = compare(&base, &cur, 0.05);
        let kind = |id: &str| cmp.rows.iter().find(|d| d.id == id).unwrap().kind;
        assert_eq!(kind("a"), DriftKind::ExpectedImprovement);
        assert_eq!(kind("b"), DriftKind::Regression);
        assert_eq!(kind("c"), DriftKind::StatusChange);
        assert_eq!(kind("gone"), DriftKind::Missing);
        assert_eq!(kind("new"), DriftKind::New);
        assert_eq!(cmp.regressions(), 3);
    }

    #[test]
    fn missing_baseline_is_an_io_error() {
        let err = regression_baseline(std::path::Path::new("/nonexistent/baseline.json"), &[], 0.01);
        assert!(matches!(err, Err(Error::Io(_))));
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(matches!("bogus".parse::<Suite>(), Err(Error::UnknownSuite(_))));
        assert_eq!("all".parse::<Suite>().unwrap().families().len(), 8);
    }
}
