//! Solver output and its replay formats.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! b"PBTRAJ01"
//! u64 modes, u64 n_states, u64 seed, f64 shift
//! u64 config_len, config_len bytes of UTF-8 (config snapshot)
//! f64 × n_states              times
//! f64 × (n_states · modes)    coefficients, row-major by time
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::SolverParams;
use crate::error::{Error, Result};
use crate::io::{csv_row, ByteReader, ByteWriter};
use crate::spectral::SpectralState;

/// Identifies the noise fiber `θ_shift ω_seed` a trajectory was driven by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fiber {
    pub seed: u64,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralState>,
    pub fiber: Fiber,
    pub params: SolverParams,
}

impl Trajectory {
    pub fn last(&self) -> &SpectralState {
        self.states.last().expect("trajectories are never empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.states[0].modes()
    }

    /// Checks the type invariants: equal lengths, increasing times, finite states.
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.states.len() || self.times.is_empty() {
            return Err(Error::InvalidState("times and states differ in length".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidState("times not strictly increasing".into()));
        }
        for (t, s) in self.times.iter().zip(&self.states) {
            s.validate().map_err(|e| Error::InvalidState(format!("at t = {t}: {e}")))?;
        }
        Ok(())
    }

    /// State at a recorded time, matched to within a thousandth of a step.
    pub fn at(&self, t: f64) -> Option<&SpectralState> {
        let tol = 1e-3 * self.params.dt;
        self.times
            .iter()
            .position(|&x| (x - t).abs() <= tol)
            .map(|i| &self.states[i])
    }
}

/// CSV with header `t,c1..cK`.
pub fn write_trajectory_csv(traj: &Trajectory, out: &mut impl Write) -> Result<()> {
    let cols: Vec<String> = (1..=traj.modes()).map(|k| format!("c{k}")).collect();
    writeln!(out, "t,{}", cols.join(","))?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        writeln!(out, "{}", csv_row(std::iter::once(*t).chain(s.coeffs().iter().copied())))?;
    }
    Ok(())
}

const MAGIC: &[u8; 8] = b"PBTRAJ01";

pub fn write_trajectory_binary(traj: &Trajectory, config: &str, out: &mut impl Write) -> Result<()> {
    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u64(traj.modes() as u64);
    w.u64(traj.len() as u64);
    w.u64(traj.fiber.seed);
    w.f64(traj.fiber.shift);
    w.u64(config.len() as u64);
    w.bytes(config.as_bytes());
    w.f64s(&traj.times);
    for s in &traj.states {
        w.f64s(s.coeffs());
    }
    out.write_all(&w.buf)?;
    Ok(())
}

/// Returns the times, states, fiber and embedded config snapshot.
pub fn read_trajectory_binary(bytes: &[u8]) -> Result<(Vec<f64>, Vec<SpectralState>, Fiber, String)> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(MAGIC)?;
    let modes = r.usize()?;
    let n = r.usize()?;
    let fiber = Fiber {
        seed: r.u64()?,
        shift: r.f64()?,
    };
    let len = r.usize()?;
    let config = String::from_utf8(r.take(len)?.to_vec())
        .map_err(|_| Error::Schema("config snapshot is not UTF-8".into()))?;
    let times = r.f64s(n)?;
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        states.push(SpectralState::new(r.f64s(modes)?)?);
    }
    r.finish()?;
    Ok((times, states, fiber, config))
}
