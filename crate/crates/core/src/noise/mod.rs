//! Two-sided Wiener paths in spectral coordinates and the Wiener shift.
//!
//! A [`NoisePath`] is a view into immutable, shared node data. Shifting a
//! path only moves the view's origin, so `θ_t ∘ θ_s = θ_{t+s}` holds
//! bit-for-bit on grid nodes and `θ_0` is the identity.

mod io;
mod ou;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::spectral::{eigenvalue, SpectralState};

pub use io::{read_path_binary, read_path_csv, write_path_binary, write_path_csv};
pub use ou::{OuParams, OuSeries};

/// Relative tolerance used when snapping times to grid nodes.
const NODE_TOL: f64 = 1e-9;

/// Uniform two-sided time grid containing `t = 0` as a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub dt: f64,
    pub n_points: usize,
}

impl NoiseGrid {
    pub fn new(t_min: f64, t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if !(t_min < 0.0 && t_max > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "grid must satisfy t_min < 0 < t_max, got [{t_min}, {t_max}]"
            )));
        }
        let back = steps(-t_min, dt)
            .ok_or_else(|| Error::InvalidGrid(format!("dt {dt} does not divide |t_min| = {}", -t_min)))?;
        let fwd = steps(t_max, dt)
            .ok_or_else(|| Error::InvalidGrid(format!("dt {dt} does not divide t_max = {t_max}")))?;
        Ok(Self::from_steps(back, fwd, dt))
    }

    pub(crate) fn from_steps(back: usize, fwd: usize, dt: f64) -> Self {
        NoiseGrid {
            t_min: -(back as f64) * dt,
            t_max: fwd as f64 * dt,
            dt,
            n_points: back + fwd + 1,
        }
    }

    /// Index of the node `t = 0`.
    pub fn origin(&self) -> usize {
        (self.n_points - 1) - steps(self.t_max, self.dt).unwrap_or(0)
    }

    pub fn time(&self, i: usize) -> f64 {
        (i as f64 - self.origin() as f64) * self.dt
    }

    pub fn contains(&self, t: f64) -> bool {
        let tol = NODE_TOL * self.dt;
        t >= self.t_min - tol && t <= self.t_max + tol
    }
}

/// Number of `dt` steps in `len`, if `len` is a whole multiple of `dt`.
pub(crate) fn steps(len: f64, dt: f64) -> Option<usize> {
    if len < -NODE_TOL * dt {
        return None;
    }
    let r = len / dt;
    let n = r.round();
    if (r - n).abs() <= NODE_TOL * r.abs().max(1.0) {
        Some(n as usize)
    } else {
        None
    }
}

/// Signed node offset for `t`, if `t` is a node multiple of `dt`.
pub(crate) fn node_offset(t: f64, dt: f64) -> Option<isize> {
    let r = t / dt;
    let n = r.round();
    if (r - n).abs() <= NODE_TOL * r.abs().max(1.0) {
        Some(n as isize)
    } else {
        None
    }
}

/// Modal amplitude law `q_k = amplitude · μ_k^{−β−γ/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub beta: f64,
    pub gamma: f64,
    pub amplitude: f64,
}

impl Decay {
    pub fn new(beta: f64, gamma: f64, amplitude: f64) -> Result<Self> {
        let d = Decay {
            beta,
            gamma,
            amplitude,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(param("beta", format!("must lie in (0, 1], got {}", self.beta)));
        }
        if !(self.gamma > 0.5) {
            return Err(Error::Condition {
                condition: "Noise",
                detail: format!(
                    "decay exponent gamma must exceed 1/2 for an X_beta-valued path, got {}",
                    self.gamma
                ),
            });
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(param("amplitude", "must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn scale(&self, k: usize) -> f64 {
        self.amplitude * eigenvalue(k).powf(-self.beta - 0.5 * self.gamma)
    }

    /// Partial sum `Σ_{k≤K} q_k² μ_k^{2β}`.
    pub fn beta_trace(&self, modes: usize) -> f64 {
        (1..=modes)
            .map(|k| self.scale(k).powi(2) * eigenvalue(k).powf(2.0 * self.beta))
            .sum()
    }

    /// Integral bound on the tail `Σ_{k>K} q_k² μ_k^{2β} = a² Σ_{k>K} k^{−2γ}`.
    pub fn beta_trace_tail(&self, modes: usize) -> f64 {
        let g = 2.0 * self.gamma;
        self.amplitude.powi(2) * (modes as f64).powf(1.0 - g) / (g - 1.0)
    }
}

/// Norm in which [`NoisePath::evaluate`] reports its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    X,
    XBeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub state: SpectralState,
    pub norm: f64,
    pub space: Space,
}

#[derive(Debug)]
struct PathData {
    grid: NoiseGrid,
    modes: usize,
    seed: u64,
    decay: Decay,
    scales: Vec<f64>,
    /// `ω_k(t_i)` row-major, `n_points × modes`.
    modal: Vec<f64>,
    scalar: Vec<f64>,
}

/// A view of a two-sided X_β-valued Wiener path together with an
/// independent scalar Brownian path driving the random potential.
#[derive(Debug, Clone)]
pub struct NoisePath {
    data: Arc<PathData>,
    origin: usize,
}

const STREAM_SCALAR_FWD: u64 = 0;
const STREAM_SCALAR_BWD: u64 = 1;

/// Stream of mode `k` (1-based), forward or backward in time.
fn modal_stream(k: usize, backward: bool) -> u64 {
    2 * k as u64 + backward as u64
}

/// Draws a path with i.i.d. `N(0, dt q_k²)` modal increments and a standard
/// scalar Brownian path, both pinned to zero at `t = 0`.
///
/// Every mode and each time direction has its own ChaCha stream, so
/// extending the grid at either end or adding modes leaves existing node
/// values unchanged.
pub fn sample_path(seed: u64, grid: NoiseGrid, modes: usize, decay: Decay) -> Result<NoisePath> {
    if modes == 0 {
        return Err(param("modes", "need at least one mode"));
    }
    let grid = NoiseGrid::new(grid.t_min, grid.t_max, grid.dt)?;
    decay.validate()?;
    let scales: Vec<f64> = (1..=modes).map(|k| decay.scale(k)).collect();
    let n = grid.n_points;
    let o = grid.origin();
    let sqdt = grid.dt.sqrt();

    let mut modal = vec![0.0; n * modes];
    for (k, &q) in scales.iter().enumerate() {
        let sd = sqdt * q;
        let mut rng = stream(seed, modal_stream(k + 1, false));
        for i in o..n - 1 {
            let z: f64 = rng.sample(StandardNormal);
            modal[(i + 1) * modes + k] = modal[i * modes + k] + sd * z;
        }
        let mut rng = stream(seed, modal_stream(k + 1, true));
        for i in (0..o).rev() {
            let z: f64 = rng.sample(StandardNormal);
            modal[i * modes + k] = modal[(i + 1) * modes + k] - sd * z;
        }
    }

    let mut scalar = vec![0.0; n];
    let mut rng = stream(seed, STREAM_SCALAR_FWD);
    for i in o..n - 1 {
        let z: f64 = rng.sample(StandardNormal);
        scalar[i + 1] = scalar[i] + sqdt * z;
    }
    let mut rng = stream(seed, STREAM_SCALAR_BWD);
    for i in (0..o).rev() {
        let z: f64 = rng.sample(StandardNormal);
        scalar[i] = scalar[i + 1] - sqdt * z;
    }

    Ok(NoisePath {
        data: Arc::new(PathData {
            grid,
            modes,
            seed,
            decay,
            scales,
            modal,
            scalar,
        }),
        origin: o,
    })
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl NoisePath {
    pub(crate) fn from_parts(
        grid: NoiseGrid,
        modes: usize,
        seed: u64,
        decay: Decay,
        modal: Vec<f64>,
        scalar: Vec<f64>,
    ) -> Result<Self> {
        if modal.len() != grid.n_points * modes || scalar.len() != grid.n_points {
            return Err(Error::Schema("path body length does not match header".into()));
        }
        let scales = (1..=modes).map(|k| decay.scale(k)).collect();
        let origin = grid.origin();
        Ok(NoisePath {
            data: Arc::new(PathData {
                grid,
                modes,
                seed,
                decay,
                scales,
                modal,
                scalar,
            }),
            origin,
        })
    }

    /// Grid of this view: base nodes re-labelled relative to the view origin.
    pub fn grid(&self) -> NoiseGrid {
        let d = &self.data;
        NoiseGrid::from_steps(self.origin, d.grid.n_points - 1 - self.origin, d.grid.dt)
    }

    pub fn dt(&self) -> f64 {
        self.data.grid.dt
    }

    pub fn modes(&self) -> usize {
        self.data.modes
    }

    pub fn seed(&self) -> u64 {
        self.data.seed
    }

    pub fn decay(&self) -> Decay {
        self.data.decay
    }

    pub fn beta(&self) -> f64 {
        self.data.decay.beta
    }

    pub fn modal_scales(&self) -> &[f64] {
        &self.data.scales
    }

    /// Offset of this view relative to the path as sampled (the `s` in `θ_s ω`).
    pub fn shift_offset(&self) -> f64 {
        (self.origin as f64 - self.data.grid.origin() as f64) * self.dt()
    }

    pub(crate) fn origin_index(&self) -> usize {
        self.origin
    }

    pub(crate) fn base_len(&self) -> usize {
        self.data.grid.n_points
    }

    /// `θ_s ω`: re-centres the path at `s`, which must be a grid node.
    pub fn shift(&self, s: f64) -> Result<NoisePath> {
        let off = node_offset(s, self.dt()).ok_or(Error::OffGrid(s))?;
        let new = self.origin as isize + off;
        if new < 0 || new as usize >= self.base_len() {
            let g = self.grid();
            return Err(Error::OutOfRange {
                t: s,
                t_min: g.t_min,
                t_max: g.t_max,
            });
        }
        Ok(NoisePath {
            data: Arc::clone(&self.data),
            origin: new as usize,
        })
    }

    /// Base index of view node `i` (signed offset from the origin).
    pub(crate) fn base_index(&self, i: isize) -> Option<usize> {
        let b = self.origin as isize + i;
        (b >= 0 && (b as usize) < self.base_len()).then_some(b as usize)
    }

    #[inline]
    pub(crate) fn base_row(&self, b: usize) -> &[f64] {
        let m = self.data.modes;
        &self.data.modal[b * m..(b + 1) * m]
    }

    #[inline]
    pub(crate) fn base_scalar(&self, b: usize) -> f64 {
        self.data.scalar[b]
    }

    /// Modal values at view node `i`, written into `out`.
    pub fn node_values_into(&self, i: isize, out: &mut [f64]) -> Result<()> {
        let b = self.base_index(i).ok_or_else(|| self.range_err(i as f64 * self.dt()))?;
        let row = self.base_row(b);
        let zero = self.base_row(self.origin);
        for ((o, v), z) in out.iter_mut().zip(row).zip(zero) {
            *o = v - z;
        }
        Ok(())
    }

    /// `ω(t_j) − ω(t_i)` between view nodes, computed from the stored base
    /// values so that it does not depend on the view origin.
    pub(crate) fn increment_into(&self, i: isize, j: isize, out: &mut [f64]) -> Result<()> {
        let bi = self.base_index(i).ok_or_else(|| self.range_err(i as f64 * self.dt()))?;
        let bj = self.base_index(j).ok_or_else(|| self.range_err(j as f64 * self.dt()))?;
        let (ri, rj) = (self.base_row(bi), self.base_row(bj));
        for ((o, a), b) in out.iter_mut().zip(rj).zip(ri) {
            *o = a - b;
        }
        Ok(())
    }

    pub fn node_scalar(&self, i: isize) -> Result<f64> {
        let b = self.base_index(i).ok_or_else(|| self.range_err(i as f64 * self.dt()))?;
        Ok(self.data.scalar[b] - self.data.scalar[self.origin])
    }

    fn range_err(&self, t: f64) -> Error {
        let g = self.grid();
        Error::OutOfRange {
            t,
            t_min: g.t_min,
            t_max: g.t_max,
        }
    }

    /// Locates `t` as `(left node, weight of right node)`.
    fn locate(&self, t: f64) -> Result<(isize, f64)> {
        let g = self.grid();
        if !t.is_finite() || !g.contains(t) {
            return Err(self.range_err(t));
        }
        if let Some(i) = node_offset(t, g.dt) {
            return Ok((i, 0.0));
        }
        let r = t / g.dt;
        let i = r.floor();
        Ok((i as isize, r - i))
    }

    /// Modal coefficients `ω(t)` by linear interpolation between nodes.
    pub fn values_at(&self, t: f64) -> Result<Vec<f64>> {
        let (i, w) = self.locate(t)?;
        let m = self.modes();
        let mut left = vec![0.0; m];
        self.node_values_into(i, &mut left)?;
        if w > 0.0 {
            let mut right = vec![0.0; m];
            self.node_values_into(i + 1, &mut right)?;
            for (l, r) in left.iter_mut().zip(&right) {
                *l += w * (r - *l);
            }
        }
        Ok(left)
    }

    /// `ω(t)` with its norm in the requested space. The coefficients are the
    /// same in both spaces; only the reported norm differs.
    pub fn evaluate(&self, t: f64, space: Space) -> Result<Evaluated> {
        let state = SpectralState::from_vec_unchecked(self.values_at(t)?);
        let norm = match space {
            Space::X => state.norm(),
            Space::XBeta => state.norm_eta(self.beta()),
        };
        Ok(Evaluated { state, norm, space })
    }

    /// Scalar driving path `ω̄(t)`.
    pub fn scalar_at(&self, t: f64) -> Result<f64> {
        let (i, w) = self.locate(t)?;
        let left = self.node_scalar(i)?;
        if w > 0.0 {
            let right = self.node_scalar(i + 1)?;
            Ok(left + w * (right - left))
        } else {
            Ok(left)
        }
    }

    /// `‖ω(t_i)‖_{X_η}` at every node of the view, in view order.
    pub fn node_norms(&self, eta: f64) -> Vec<f64> {
        let m = self.modes();
        let weights: Vec<f64> = (1..=m).map(|k| eigenvalue(k).powf(2.0 * eta)).collect();
        let zero = self.base_row(self.origin);
        (0..self.base_len())
            .map(|b| {
                let row = self.base_row(b);
                let s: f64 = row
                    .iter()
                    .zip(zero)
                    .zip(&weights)
                    .map(|((v, z), w)| {
                        let d = v - z;
                        w * d * d
                    })
                    .sum();
                (std::f64::consts::FRAC_PI_2 * s).sqrt()
            })
            .collect()
    }

    /// `‖ω(−j dt)‖_{X_η}` for `j = 0..=steps`, walking back from the view origin.
    pub fn history_norms(&self, eta: f64, steps: usize) -> Result<Vec<f64>> {
        if steps > self.origin {
            return Err(Error::InsufficientHistory {
                t: 0.0,
                needed: -(steps as f64) * self.dt(),
                available: self.grid().t_min,
            });
        }
        let m = self.modes();
        let weights: Vec<f64> = (1..=m).map(|k| eigenvalue(k).powf(2.0 * eta)).collect();
        let zero = self.base_row(self.origin);
        Ok((0..=steps)
            .map(|j| {
                let row = self.base_row(self.origin - j);
                let s: f64 = row
                    .iter()
                    .zip(zero)
                    .zip(&weights)
                    .map(|((v, z), w)| w * (v - z) * (v - z))
                    .sum();
                (std::f64::consts::FRAC_PI_2 * s).sqrt()
            })
            .collect())
    }

    /// Subexponential-growth diagnostics for `e^{−ε|t|}‖ω(t)‖_{X_β}`.
    pub fn check_tempered(&self, beta: f64) -> TemperedReport {
        let g = self.grid();
        let norms = self.node_norms(beta);
        let times: Vec<f64> = (0..norms.len())
            .map(|b| (b as f64 - self.origin as f64) * g.dt)
            .collect();
        let half = 0.5 * g.t_min.abs().max(g.t_max);
        let mut rows = Vec::new();
        for &eps in &TEMPERED_RATES {
            let mut best = (0.0_f64, 0.0_f64);
            let (mut inner, mut outer) = (0.0_f64, 0.0_f64);
            for (t, n) in times.iter().zip(&norms) {
                let v = (-eps * t.abs()).exp() * n;
                if v > best.0 {
                    best = (v, *t);
                }
                if t.abs() <= half {
                    inner = inner.max(v);
                } else {
                    outer = outer.max(v);
                }
            }
            let edge = best.1 <= g.t_min + g.dt * 0.5 || best.1 >= g.t_max - g.dt * 0.5;
            rows.push(TemperedRow {
                eps,
                max_weighted_norm: best.0,
                argmax: best.1,
                resolved: !edge || best.0 == 0.0,
                outer_exceeds_inner: outer > inner,
            });
        }
        let non_decay = rows.last().map(|r| r.outer_exceeds_inner).unwrap_or(false);
        TemperedReport { rows, non_decay }
    }
}

/// Rates at which temperedness is probed.
pub const TEMPERED_RATES: [f64; 3] = [0.01, 0.1, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperedRow {
    pub eps: f64,
    pub max_weighted_norm: f64,
    pub argmax: f64,
    /// Maximum attained strictly inside the stored window.
    pub resolved: bool,
    pub outer_exceeds_inner: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperedReport {
    pub rows: Vec<TemperedRow>,
    /// Weighted norm at the fastest rate fails to decay over the window.
    pub non_decay: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> NoiseGrid {
        NoiseGrid::new(-2.0, 3.0, 0.01).unwrap()
    }

    fn decay() -> Decay {
        Decay::new(0.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(NoiseGrid::new(-1.0, 1.0, 0.0).is_err());
        assert!(NoiseGrid::new(-1.0, 1.0, -0.1).is_err());
        assert!(NoiseGrid::new(0.0, 1.0, 0.1).is_err());
        assert!(NoiseGrid::new(-1.0, 1.05, 0.1).is_err());
        let g = NoiseGrid::new(-1.0, 2.0, 0.25).unwrap();
        assert_eq!(g.n_points, 13);
        assert_eq!(g.origin(), 4);
        assert_eq!(g.time(4), 0.0);
        assert_eq!(g.time(12), 2.0);
    }

    #[test]
    fn zero_modes_rejected() {
        assert!(sample_path(1, grid(), 0, decay()).is_err());
    }

    #[test]
    fn gamma_below_half_names_noise_condition() {
        let err = Decay::new(0.5, 0.5, 1.0).unwrap_err();
        assert!(err.to_string().contains("(Noise)"));
    }

    #[test]
    fn zero_at_zero() {
        let p = sample_path(1, grid(), 8, decay()).unwrap();
        let e = p.evaluate(0.0, Space::X).unwrap();
        assert!(e.state.is_zero());
        assert_eq!(p.scalar_at(0.0).unwrap(), 0.0);
        let s = p.shift(0.37).unwrap();
        assert!(s.evaluate(0.0, Space::XBeta).unwrap().state.is_zero());
        assert_eq!(s.scalar_at(0.0).unwrap(), 0.0);
    }

    #[test]
    fn deterministic() {
        let a = sample_path(7, grid(), 8, decay()).unwrap();
        let b = sample_path(7, grid(), 8, decay()).unwrap();
        assert_eq!(a.data.modal, b.data.modal);
        assert_eq!(a.data.scalar, b.data.scalar);
        let c = sample_path(8, grid(), 8, decay()).unwrap();
        assert_ne!(a.data.modal, c.data.modal);
    }

    #[test]
    fn extending_grid_keeps_shared_nodes() {
        let a = sample_path(3, grid(), 4, decay()).unwrap();
        let big = NoiseGrid::new(-4.0, 5.0, 0.01).unwrap();
        let b = sample_path(3, big, 4, decay()).unwrap();
        for t in [-2.0, -1.23, 0.0, 0.5, 3.0] {
            assert_eq!(a.values_at(t).unwrap(), b.values_at(t).unwrap());
            assert_eq!(a.scalar_at(t).unwrap(), b.scalar_at(t).unwrap());
        }
    }

    #[test]
    fn adding_modes_keeps_existing_ones() {
        let a = sample_path(3, grid(), 4, decay()).unwrap();
        let b = sample_path(3, grid(), 9, decay()).unwrap();
        for t in [-2.0, -0.5, 1.7, 3.0] {
            assert_eq!(a.values_at(t).unwrap()[..], b.values_at(t).unwrap()[..4]);
            assert_eq!(a.scalar_at(t).unwrap(), b.scalar_at(t).unwrap());
        }
    }

    #[test]
    fn out_of_range_is_error() {
        let p = sample_path(1, grid(), 2, decay()).unwrap();
        assert!(matches!(p.values_at(3.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(p.values_at(-2.01), Err(Error::OutOfRange { .. })));
        assert!(p.shift(3.5).is_err());
        assert!(matches!(p.shift(0.005), Err(Error::OffGrid(_))));
    }

    #[test]
    fn shift_identity_and_group_law() {
        let p = sample_path(11, grid(), 6, decay()).unwrap();
        let p0 = p.shift(0.0).unwrap();
        for i in -200..=300 {
            let mut a = vec![0.0; 6];
            let mut b = vec![0.0; 6];
            p.node_values_into(i, &mut a).unwrap();
            p0.node_values_into(i, &mut b).unwrap();
            assert_eq!(a, b);
        }
        let (s, t) = (0.7, -1.3);
        let lhs = p.shift(s).unwrap().shift(t).unwrap();
        let rhs = p.shift(s + t).unwrap();
        assert_eq!(lhs.grid(), rhs.grid());
        for i in -70..=360 {
            let mut a = vec![0.0; 6];
            let mut b = vec![0.0; 6];
            lhs.node_values_into(i, &mut a).unwrap();
            rhs.node_values_into(i, &mut b).unwrap();
            assert_eq!(a, b);
            assert_eq!(lhs.node_scalar(i).unwrap(), rhs.node_scalar(i).unwrap());
        }
    }

    #[test]
    fn node_evaluation_is_exact() {
        let p = sample_path(2, grid(), 3, decay()).unwrap();
        let b = p.base_index(57).unwrap();
        assert_eq!(p.values_at(0.57).unwrap(), p.base_row(b).to_vec());
    }

    #[test]
    fn beta_norm_matches_direct_sum() {
        let p = sample_path(5, grid(), 8, decay()).unwrap();
        for t in [-1.5, -0.333, 0.8, 2.71] {
            let e = p.evaluate(t, Space::XBeta).unwrap();
            let brute: f64 = e
                .state
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| ((i + 1) as f64).powi(2).powf(2.0 * 0.5) * c * c)
                .sum::<f64>()
                * std::f64::consts::FRAC_PI_2;
            assert!((e.norm - brute.sqrt()).abs() < 1e-13);
        }
    }

    #[test]
    fn beta_trace_partial_sums_monotone_and_bounded() {
        let d = Decay::new(0.75, 1.5, 1.0).unwrap();
        let mut prev = 0.0;
        let total_bound = d.beta_trace(1) + d.beta_trace_tail(1);
        for k in 1..200 {
            let s = d.beta_trace(k);
            assert!(s >= prev);
            assert!(s <= total_bound + 1e-12);
            prev = s;
        }
    }

    #[test]
    fn tempered_zero_path() {
        let d = Decay::new(0.5, 1.0, 0.0).unwrap();
        let p = sample_path(1, grid(), 4, d).unwrap();
        let r = p.check_tempered(0.5);
        assert!(r.rows.iter().all(|row| row.max_weighted_norm == 0.0));
        assert!(!r.non_decay);
    }

    #[test]
    fn tempered_monotone_in_eps() {
        let g = NoiseGrid::new(-20.0, 20.0, 0.01).unwrap();
        let p = sample_path(9, g, 8, decay()).unwrap();
        let r = p.check_tempered(0.5);
        for w in r.rows.windows(2) {
            assert!(w[1].max_weighted_norm <= w[0].max_weighted_norm);
        }
        assert!(!r.non_decay);
        let fast = &r.rows[1];
        assert!(fast.max_weighted_norm.is_finite());
        assert!(fast.argmax.abs() < 15.0);
    }
}
