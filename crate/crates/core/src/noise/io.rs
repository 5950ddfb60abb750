//! Replay dumps of noise paths.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! b"PBNOISE1"
//! u64 seed, u64 modes, u64 steps_back, u64 steps_forward
//! f64 dt, f64 beta, f64 gamma, f64 amplitude
//! f64 × (n_points · modes)   modal values, row-major by node
//! f64 × n_points             scalar path
//! ```
//!
//! A shifted view is written re-zeroed at its own origin, so reading it back
//! reproduces the view's node values exactly.

use std::io::{BufRead, Write};

use super::{Decay, NoiseGrid, NoisePath};
use crate::error::{Error, Result};
use crate::io::{csv_row, parse_f64, ByteReader, ByteWriter};

const MAGIC: &[u8; 8] = b"PBNOISE1";

fn view_body(path: &NoisePath) -> (Vec<f64>, Vec<f64>) {
    let m = path.modes();
    let zero = path.base_row(path.origin_index()).to_vec();
    let zs = path.base_scalar(path.origin_index());
    let mut modal = Vec::with_capacity(path.base_len() * m);
    let mut scalar = Vec::with_capacity(path.base_len());
    for b in 0..path.base_len() {
        modal.extend(path.base_row(b).iter().zip(&zero).map(|(v, z)| v - z));
        scalar.push(path.base_scalar(b) - zs);
    }
    (modal, scalar)
}

pub fn write_path_binary(path: &NoisePath, out: &mut impl Write) -> Result<()> {
    let g = path.grid();
    let d = path.decay();
    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u64(path.seed());
    w.u64(path.modes() as u64);
    w.u64(path.origin_index() as u64);
    w.u64((g.n_points - 1 - path.origin_index()) as u64);
    w.f64(g.dt);
    w.f64(d.beta);
    w.f64(d.gamma);
    w.f64(d.amplitude);
    let (modal, scalar) = view_body(path);
    w.f64s(&modal);
    w.f64s(&scalar);
    out.write_all(&w.buf)?;
    Ok(())
}

pub fn read_path_binary(bytes: &[u8]) -> Result<NoisePath> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(MAGIC)?;
    let seed = r.u64()?;
    let modes = r.usize()?;
    let back = r.usize()?;
    let fwd = r.usize()?;
    let dt = r.f64()?;
    let decay = Decay {
        beta: r.f64()?,
        gamma: r.f64()?,
        amplitude: r.f64()?,
    };
    let grid = NoiseGrid::from_steps(back, fwd, dt);
    let modal = r.f64s(grid.n_points * modes)?;
    let scalar = r.f64s(grid.n_points)?;
    r.finish()?;
    NoisePath::from_parts(grid, modes, seed, decay, modal, scalar)
}

/// CSV dump: `#`-prefixed header lines, then `t,scalar,w_1..w_K` per node.
pub fn write_path_csv(path: &NoisePath, out: &mut impl Write) -> Result<()> {
    let g = path.grid();
    let d = path.decay();
    writeln!(out, "# seed={}", path.seed())?;
    writeln!(
        out,
        "# modes={} steps_back={} steps_forward={} dt={:.16e}",
        path.modes(),
        path.origin_index(),
        g.n_points - 1 - path.origin_index(),
        g.dt
    )?;
    writeln!(
        out,
        "# beta={:.16e} gamma={:.16e} amplitude={:.16e}",
        d.beta, d.gamma, d.amplitude
    )?;
    let cols: Vec<String> = (1..=path.modes()).map(|k| format!("w{k}")).collect();
    writeln!(out, "t,scalar,{}", cols.join(","))?;
    let (modal, scalar) = view_body(path);
    let m = path.modes();
    for (b, s) in scalar.iter().enumerate() {
        let t = (b as f64 - path.origin_index() as f64) * g.dt;
        let row = [t, *s].into_iter().chain(modal[b * m..(b + 1) * m].iter().copied());
        writeln!(out, "{}", csv_row(row))?;
    }
    Ok(())
}

pub fn read_path_csv(input: impl BufRead) -> Result<NoisePath> {
    let mut header = std::collections::HashMap::new();
    let mut modal = Vec::new();
    let mut scalar = Vec::new();
    let mut seen_columns = false;
    for line in input.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix('#') {
            for kv in rest.split_whitespace() {
                if let Some((k, v)) = kv.split_once('=') {
                    header.insert(k.to_string(), v.to_string());
                }
            }
            continue;
        }
        if !seen_columns {
            seen_columns = true;
            continue;
        }
        let mut fields = line.split(',');
        fields.next();
        let s = fields
            .next()
            .ok_or_else(|| Error::Schema("row missing scalar column".into()))?;
        scalar.push(parse_f64(s)?);
        for f in fields {
            modal.push(parse_f64(f)?);
        }
    }
    let get = |k: &str| -> Result<&String> {
        header
            .get(k)
            .ok_or_else(|| Error::Schema(format!("header missing `{k}`")))
    };
    let uint = |k: &str| -> Result<u64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Schema(format!("bad header `{k}`")))
    };
    let float = |k: &str| -> Result<f64> { parse_f64(get(k)?) };
    let modes = uint("modes")? as usize;
    let grid = NoiseGrid::from_steps(uint("steps_back")? as usize, uint("steps_forward")? as usize, float("dt")?);
    let decay = Decay {
        beta: float("beta")?,
        gamma: float("gamma")?,
        amplitude: float("amplitude")?,
    };
    NoisePath::from_parts(grid, modes, uint("seed")?, decay, modal, scalar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::sample_path;

    fn sample() -> NoisePath {
        let g = NoiseGrid::new(-1.0, 2.0, 0.05).unwrap();
        sample_path(21, g, 5, Decay::new(0.75, 1.5, 0.8).unwrap()).unwrap()
    }

    fn same_nodes(a: &NoisePath, b: &NoisePath) {
        assert_eq!(a.grid(), b.grid());
        let g = a.grid();
        let lo = -(a.origin_index() as isize);
        for i in lo..lo + g.n_points as isize {
            let mut x = vec![0.0; a.modes()];
            let mut y = vec![0.0; a.modes()];
            a.node_values_into(i, &mut x).unwrap();
            b.node_values_into(i, &mut y).unwrap();
            assert_eq!(x, y);
            assert_eq!(a.node_scalar(i).unwrap(), b.node_scalar(i).unwrap());
        }
    }

    #[test]
    fn binary_roundtrip() {
        let p = sample();
        let mut buf = Vec::new();
        write_path_binary(&p, &mut buf).unwrap();
        let q = read_path_binary(&buf).unwrap();
        same_nodes(&p, &q);
        assert_eq!(q.seed(), 21);
        assert_eq!(q.decay(), p.decay());
        let mut again = Vec::new();
        write_path_binary(&q, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn shifted_view_roundtrip() {
        let p = sample().shift(0.5).unwrap();
        let mut buf = Vec::new();
        write_path_binary(&p, &mut buf).unwrap();
        let q = read_path_binary(&buf).unwrap();
        same_nodes(&p, &q);
    }

    #[test]
    fn csv_roundtrip() {
        let p = sample();
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf).unwrap();
        let q = read_path_csv(&buf[..]).unwrap();
        same_nodes(&p, &q);
    }

    #[test]
    fn corrupt_binary_rejected() {
        let p = sample();
        let mut buf = Vec::new();
        write_path_binary(&p, &mut buf).unwrap();
        assert!(read_path_binary(&buf[..buf.len() - 3]).is_err());
        buf[0] = b'X';
        assert!(matches!(read_path_binary(&buf), Err(Error::Schema(_))));
    }
}
