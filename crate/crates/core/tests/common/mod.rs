#![allow(dead_code)]

use pullback_core::noise::{sample_path, Decay, NoiseGrid, NoisePath, OuParams};
use pullback_core::operator::{GeneratorFamily, Potential};
use pullback_core::SpectralState;

pub const K: usize = 64;

pub fn decay() -> Decay {
    Decay::new(0.75, 1.5, 1.0).unwrap()
}

pub fn path(seed: u64, t_min: f64, t_max: f64, dt: f64, modes: usize) -> NoisePath {
    sample_path(seed, NoiseGrid::new(t_min, t_max, dt).unwrap(), modes, decay()).unwrap()
}

pub fn potential(a0: f64, eps: f64) -> Potential {
    Potential::new(a0, eps, OuParams::new(1.0, 10.0).unwrap()).unwrap()
}

/// Default instance on `[t_min, t_max]` with noise step 1e-3.
pub fn default_gen(seed: u64, t_min: f64, t_max: f64) -> GeneratorFamily {
    GeneratorFamily::new(K, potential(0.3, 0.2), &path(seed, t_min, t_max, 1e-3, K)).unwrap()
}

/// `x(π − x)` in the sine basis: `8/(π k³)` on odd `k`.
pub fn parabola(modes: usize) -> SpectralState {
    SpectralState::new(
        (1..=modes)
            .map(|k| {
                if k % 2 == 1 {
                    8.0 / (std::f64::consts::PI * (k * k * k) as f64)
                } else {
                    0.0
                }
            })
            .collect(),
    )
    .unwrap()
}
