//! Covering numbers of the unit ball of `X_η` by `ε`-balls of `X`.
//!
//! In the scaled coordinates `y_k = √(π/2) c_k` the X-norm is Euclidean and
//! the unit ball of `X_η` is the ellipsoid with semi-axes `a_k = μ_k^{−η}`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::spectral::eigenvalue;

/// Brute-force oracles are only run up to this many dimensions.
pub const BRUTE_FORCE_MODES: usize = 4;
const LATTICE_BUDGET: f64 = 2e5;
/// Grids with more cells than this are counted by the bounding-box product.
const ENUMERATION_BUDGET: f64 = 1e6;
/// Per-axis cell counts are searched only when there are at most this many choices.
const SEARCH_BUDGET: f64 = 2e4;

pub fn semi_axis(k: usize, eta: f64) -> f64 {
    eigenvalue(k).powf(-eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveringMethod {
    /// A single ball: `ε ≥ a_1`.
    Trivial,
    /// Boxes of diagonal `2ε_h` over the head modes.
    Gridding,
    /// Disjoint `ε_h/2` balls of a maximal packing inside the enlarged head ellipsoid.
    Volumetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringBound {
    pub eta: f64,
    pub eps: f64,
    pub modes: usize,
    /// Natural log of the upper bound on `N_ε`.
    pub log_upper: f64,
    /// Head modes covered explicitly; the rest lie in a slab of width `a_{j+1}`.
    pub head_modes: usize,
    pub method: CoveringMethod,
    /// `a_{K+1}`: the largest semi-axis dropped by the truncation.
    pub tail_semi_axis: f64,
    /// Natural log of a greedy `2ε`-packing size, on at most four modes.
    pub log_lower: Option<f64>,
}

impl CoveringBound {
    pub fn upper(&self) -> f64 {
        self.log_upper.exp()
    }

    pub fn log2_upper(&self) -> f64 {
        self.log_upper / std::f64::consts::LN_2
    }
}

/// Upper bound on `N_ε(B^{X_η}(0,1))` over splits into `j` head modes and a tail.
///
/// The tail of any point has norm at most `a_{j+1}`, so covering the head
/// ellipsoid with balls of radius `ε_h = √(ε² − a_{j+1}²)` covers the set.
/// The head count is the smaller of gridding and the volumetric bound
/// `Π √2 (1 + 2a_k/ε_h)`. Gridding tiles `[−a_k, a_k]` with `n_k` cells per
/// axis under `Σ (a_k/n_k)² ≤ ε_h²`, so every box fits in an `ε_h`-ball, and
/// counts the boxes meeting the ellipsoid. Cubes with `n_k = ⌈a_k √j / ε_h⌉`
/// are always tried; small heads also search over the `n_k`. Splits with
/// `j < K` bound the untruncated ball as well; `j = K` uses `a_{K+1}` for the rest.
pub fn covering_number(eta: f64, eps: f64, modes: usize) -> Result<CoveringBound> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(param("eps", format!("must be positive, got {eps}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(param("eta", format!("must be positive, got {eta}")));
    }
    if modes == 0 {
        return Err(param("modes", "must be positive"));
    }
    let a: Vec<f64> = (1..=modes + 1).map(|k| semi_axis(k, eta)).collect();
    let log_lower = (modes <= BRUTE_FORCE_MODES).then(|| (greedy_packing(eta, eps, modes) as f64).ln());
    let mut best = CoveringBound {
        eta,
        eps,
        modes,
        log_upper: 0.0,
        head_modes: 0,
        method: CoveringMethod::Trivial,
        tail_semi_axis: a[modes],
        log_lower,
    };
    if eps >= a[0] {
        return Ok(best);
    }
    best.log_upper = f64::INFINITY;
    for j in 1..=modes {
        let tail = a[j];
        if tail >= eps {
            continue;
        }
        let eh = (eps * eps - tail * tail).sqrt();
        let grid = gridding(&a[..j], eh);
        let vol: f64 = a[..j]
            .iter()
            .map(|ak| (std::f64::consts::SQRT_2 * (1.0 + 2.0 * ak / eh)).ln())
            .sum();
        let (v, m) = if grid <= vol {
            (grid, CoveringMethod::Gridding)
        } else {
            (vol, CoveringMethod::Volumetric)
        };
        if v < best.log_upper {
            best.log_upper = v;
            best.head_modes = j;
            best.method = m;
        }
        // further head modes only add factors without shrinking the tail noticeably
        if tail < 0.05 * eps {
            break;
        }
    }
    Ok(best)
}

/// Log of the smallest box count found for the ellipsoid with semi-axes `a`
/// and boxes of half-diagonal `eh`.
fn gridding(a: &[f64], eh: f64) -> f64 {
    let sj = (a.len() as f64).sqrt();
    let cubes: Vec<usize> = a.iter().map(|ak| ((ak * sj / eh).ceil() as usize).max(1)).collect();
    let mut best = boxes_meeting(a, &cubes);
    // any admissible n_k satisfies a_k / n_k ≤ ε_h
    let lo: Vec<usize> = a.iter().map(|ak| ((ak / eh).ceil() as usize).max(1)).collect();
    let choices: f64 = lo.iter().zip(&cubes).map(|(l, c)| (2 * c + 1 - l) as f64).product();
    if choices <= SEARCH_BUDGET {
        let mut n = lo.clone();
        loop {
            let used: f64 = a.iter().zip(&n).map(|(ak, &c)| (ak / c as f64).powi(2)).sum();
            if used <= eh * eh {
                best = best.min(boxes_meeting(a, &n));
            }
            let mut i = 0;
            loop {
                if i == n.len() {
                    return best;
                }
                n[i] += 1;
                if n[i] <= 2 * cubes[i] {
                    break;
                }
                n[i] = lo[i];
                i += 1;
            }
        }
    }
    best
}

/// Log of the number of cells of the grid with `n_k` cells on `[−a_k, a_k]`
/// that meet the ellipsoid, or of the whole grid when it is too large.
fn boxes_meeting(a: &[f64], n: &[usize]) -> f64 {
    let log_product: f64 = n.iter().map(|&c| (c as f64).ln()).sum();
    if log_product > ENUMERATION_BUDGET.ln() {
        return log_product;
    }
    // per axis: the smallest (x / a_k)² over each cell
    let cells: Vec<Vec<f64>> = a
        .iter()
        .zip(n)
        .map(|(ak, &c)| {
            let side = 2.0 * ak / c as f64;
            (0..c)
                .map(|i| {
                    let lo = -ak + i as f64 * side;
                    let hi = lo + side;
                    let m = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
                    (m / ak) * (m / ak)
                })
                .collect()
        })
        .collect();
    fn count(cells: &[Vec<f64>], partial: f64) -> u64 {
        match cells.split_first() {
            None => 1,
            Some((first, rest)) => first
                .iter()
                .filter(|&&m| partial + m <= 1.0)
                .map(|&m| count(rest, partial + m))
                .sum(),
        }
    }
    (count(&cells, 0.0).max(1) as f64).ln()
}

/// Lattice points of spacing `step` inside the ellipsoid on the first `d` modes.
fn lattice(eta: f64, d: usize, step: f64) -> Vec<Vec<f64>> {
    let a: Vec<f64> = (1..=d).map(|k| semi_axis(k, eta)).collect();
    let counts: Vec<i64> = a.iter().map(|ak| (ak / step).floor() as i64).collect();
    let mut out = Vec::new();
    let mut idx: Vec<i64> = counts.iter().map(|c| -c).collect();
    loop {
        let p: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        let q: f64 = p.iter().zip(&a).map(|(x, ak)| (x / ak) * (x / ak)).sum();
        if q <= 1.0 {
            out.push(p);
        }
        let mut i = 0;
        loop {
            if i == d {
                return out;
            }
            idx[i] += 1;
            if idx[i] <= counts[i] {
                break;
            }
            idx[i] = -counts[i];
            i += 1;
        }
    }
}

fn lattice_step(eta: f64, d: usize, eps: f64) -> f64 {
    let box_volume: f64 = (1..=d).map(|k| 2.0 * semi_axis(k, eta)).product();
    let budget_step = (box_volume / LATTICE_BUDGET).powf(1.0 / d as f64);
    (eps / 4.0).max(budget_step)
}

fn dist2(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Size of a greedy `2ε`-separated set of lattice points in the ellipsoid
/// on the first `min(K, 4)` modes. Each `ε`-ball holds at most one of them,
/// so this is a lower bound on `N_ε`.
pub fn greedy_packing(eta: f64, eps: f64, modes: usize) -> usize {
    let d = modes.min(BRUTE_FORCE_MODES);
    let pts = lattice(eta, d, lattice_step(eta, d, eps));
    let sep = 4.0 * eps * eps;
    let mut chosen: Vec<&Vec<f64>> = Vec::new();
    for p in &pts {
        if chosen.iter().all(|q| dist2(p, q) > sep) {
            chosen.push(p);
        }
    }
    chosen.len().max(1)
}

/// Greedy cover of the lattice points in the ellipsoid on the first
/// `min(K, 4)` modes by `ε`-balls centred at lattice points.
pub fn greedy_cover(eta: f64, eps: f64, modes: usize) -> usize {
    let d = modes.min(BRUTE_FORCE_MODES);
    let pts = lattice(eta, d, lattice_step(eta, d, eps));
    let r2 = eps * eps;
    let mut covered = vec![false; pts.len()];
    let mut count = 0;
    for i in 0..pts.len() {
        if covered[i] {
            continue;
        }
        count += 1;
        for (j, q) in pts.iter().enumerate() {
            if !covered[j] && dist2(&pts[i], q) <= r2 {
                covered[j] = true;
            }
        }
    }
    count.max(1)
}

/// Slope of `ln log₂ N_ε` against `ln(1/ε)` over nine radii in `[lo, 10·lo]`.
pub fn entropy_slope(eta: f64, lo: f64, modes: usize) -> Result<f64> {
    let eps: Vec<f64> = (0..=8).map(|i| lo * 10f64.powf(i as f64 / 8.0)).collect();
    let x: Vec<f64> = eps.iter().map(|e| (1.0 / e).ln()).collect();
    let y = eps
        .iter()
        .map(|&e| Ok(covering_number(eta, e, modes)?.log2_upper().ln()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(crate::quadrature::linear_fit(&x, &y).1)
}
