//! Field snapshots: a compact binary format and a CSV alternative.
//!
//! Binary layout, all little-endian, 64-byte header followed by the field:
//!
//! | bytes  | content                                        |
//! |--------|------------------------------------------------|
//! | 0..5   | magic `MHD25`                                  |
//! | 5      | format version (`1`)                           |
//! | 6..8   | `nx` (u16)                                     |
//! | 8..10  | `ny` (u16)                                     |
//! | 10..42 | `x_lo, x_hi, y_lo, y_hi` (f64 each)            |
//! | 42..46 | time (f32)                                     |
//! | 46..62 | `gamma, mu, eta, kappa` (f32 each)             |
//! | 62     | x boundary code (0 periodic, 1 reflecting, 2 zero-gradient) |
//! | 63     | y boundary code                                |
//! | 64..   | `nx * ny * 8` f64 values, cell `(i, j)` at `(j * nx + i) * 8` |
//!
//! The eight values per cell are `rho, rho vx, rho vy, rho vz, Bx, By, Bz, e`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{
    current_j, div_b, BcKind, BoundaryPolicy, Grid2D, MhdParams, MhdState, NVAR, VAR_NAMES,
};

pub const MAGIC: &[u8; 5] = b"MHD25";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 64;

/// A field plus the metadata stored alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: MhdState,
    pub time: f64,
    pub params: MhdParams,
    pub bc: BoundaryPolicy,
}

impl Snapshot {
    pub fn grid(&self) -> &Grid2D {
        &self.state.grid
    }

    pub fn encode_header(&self) -> [u8; HEADER_LEN] {
        let g = self.grid();
        let mut h = [0u8; HEADER_LEN];
        h[0..5].copy_from_slice(MAGIC);
        h[5] = VERSION;
        h[6..8].copy_from_slice(&(g.nx as u16).to_le_bytes());
        h[8..10].copy_from_slice(&(g.ny as u16).to_le_bytes());
        for (k, v) in [g.x_lo, g.x_hi, g.y_lo, g.y_hi].iter().enumerate() {
            h[10 + 8 * k..18 + 8 * k].copy_from_slice(&v.to_le_bytes());
        }
        let p = &self.params;
        for (k, v) in [self.time, p.gamma, p.mu, p.eta, p.kappa].iter().enumerate() {
            h[42 + 4 * k..46 + 4 * k].copy_from_slice(&(*v as f32).to_le_bytes());
        }
        h[62] = self.bc.x.code();
        h[63] = self.bc.y.code();
        h
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.encode_header())?;
        for v in &self.state.u {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut h = [0u8; HEADER_LEN];
        r.read_exact(&mut h)
            .map_err(|e| Error::Format(format!("snapshot header: {e}")))?;
        if &h[0..5] != MAGIC {
            return Err(Error::Format("not an MHD25 snapshot (bad magic)".into()));
        }
        if h[5] != VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {}", h[5])));
        }
        let u16_at = |o: usize| u16::from_le_bytes([h[o], h[o + 1]]) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(h[o..o + 8].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(h[o..o + 4].try_into().unwrap()) as f64;
        let grid = Grid2D::new(
            u16_at(6),
            u16_at(8),
            (f64_at(10), f64_at(18)),
            (f64_at(26), f64_at(34)),
        )
        .map_err(|e| Error::Format(format!("snapshot grid: {e}")))?;
        let params = MhdParams {
            gamma: f32_at(46),
            mu: f32_at(50),
            eta: f32_at(54),
            kappa: f32_at(58),
            ..MhdParams::default()
        };
        let bc = BoundaryPolicy::new(BcKind::from_code(h[62])?, BcKind::from_code(h[63])?);
        let mut bytes = vec![0u8; grid.state_len() * 8];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::Format(format!("snapshot body truncated: {e}")))?;
        let u = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after snapshot", rest.len())));
        }
        Ok(Self {
            state: MhdState::from_vec(grid, u)?,
            time: f32_at(42),
            params,
            bc,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_binary(BufWriter::new(fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_binary(BufReader::new(fs::File::open(path)?))
    }

    fn metadata_line(&self) -> String {
        let g = self.grid();
        let p = &self.params;
        format!(
            "# MHD25 nx={} ny={} x_lo={:?} x_hi={:?} y_lo={:?} y_hi={:?} time={:?} gamma={:?} mu={:?} eta={:?} kappa={:?} bc_x={} bc_y={}",
            g.nx, g.ny, g.x_lo, g.x_hi, g.y_lo, g.y_hi, self.time, p.gamma, p.mu, p.eta, p.kappa, self.bc.x, self.bc.y
        )
    }

    /// One row per cell: `i, j, x, y` and the eight conserved variables.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.grid();
        writeln!(w, "{}", self.metadata_line())?;
        writeln!(w, "i,j,x,y,{}", VAR_NAMES.join(","))?;
        for j in 0..g.ny {
            for i in 0..g.nx {
                write!(w, "{i},{j},{:?},{:?}", g.x(i as isize), g.y(j as isize))?;
                for v in self.state.cell(i, j) {
                    write!(w, ",{v:?}")?;
                }
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let meta = lines
            .next()
            .ok_or_else(|| Error::Format("empty snapshot CSV".into()))??;
        let fields: std::collections::HashMap<&str, &str> = meta
            .trim_start_matches('#')
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let get = |k: &str| -> Result<&str> {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Format(format!("snapshot CSV metadata lacks '{k}'")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Format(format!("bad value for '{k}'")))
        };
        let int = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Format(format!("bad value for '{k}'")))
        };
        let grid = Grid2D::new(
            int("nx")?,
            int("ny")?,
            (num("x_lo")?, num("x_hi")?),
            (num("y_lo")?, num("y_hi")?),
        )?;
        let params = MhdParams {
            gamma: num("gamma")?,
            mu: num("mu")?,
            eta: num("eta")?,
            kappa: num("kappa")?,
            ..MhdParams::default()
        };
        let bc = BoundaryPolicy::new(
            get("bc_x")?.parse().map_err(|e: Error| Error::Format(e.to_string()))?,
            get("bc_y")?.parse().map_err(|e: Error| Error::Format(e.to_string()))?,
        );
        let time = num("time")?;
        let _columns = lines.next().ok_or_else(|| Error::Format("missing column header".into()))??;
        let mut state = MhdState::zeros(grid);
        let mut seen = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<&str> = line.split(',').collect();
            if vals.len() != 4 + NVAR {
                return Err(Error::Format(format!("row has {} columns: {line}", vals.len())));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::Format(format!("bad number '{s}'")))
            };
            let i = parse(vals[0])? as usize;
            let j = parse(vals[1])? as usize;
            if i >= grid.nx || j >= grid.ny {
                return Err(Error::Format(format!("cell ({i}, {j}) outside grid")));
            }
            let cell = state.cell_mut(i, j);
            for v in 0..NVAR {
                cell[v] = parse(vals[4 + v])?;
            }
            seen += 1;
        }
        if seen != grid.cells() {
            return Err(Error::Format(format!("expected {} rows, found {seen}", grid.cells())));
        }
        Ok(Self {
            state,
            time,
            params,
            bc,
        })
    }

    /// Current density and magnetic divergence per cell, the quantities a
    /// plotting tool needs without re-deriving them.
    pub fn write_derived_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.grid();
        let cur = current_j(&self.state.u, g, &self.bc);
        let div = div_b(&self.state.u, g, &self.bc);
        writeln!(w, "{}", self.metadata_line())?;
        writeln!(w, "i,j,x,y,jx,jy,jz,divb")?;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.cell(i, j);
                let [jx, jy, jz] = cur[k];
                writeln!(
                    w,
                    "{i},{j},{:?},{:?},{jx:?},{jy:?},{jz:?},{:?}",
                    g.x(i as isize),
                    g.y(j as isize),
                    div.field[k]
                )?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        let grid = Grid2D::new(5, 4, (-1.5, 2.5), (-0.5, 0.5)).unwrap();
        let u: Vec<f64> = (0..grid.state_len()).map(|k| (k as f64).sin() + 1.5).collect();
        Snapshot {
            state: MhdState::from_vec(grid, u).unwrap(),
            time: 2.5,
            params: MhdParams::new(0.01, 0.001, 0.04),
            bc: BoundaryPolicy::new(BcKind::Periodic, BcKind::Reflecting),
        }
    }

    #[test]
    fn header_layout() {
        let s = sample();
        let h = s.encode_header();
        assert_eq!(&h[0..5], b"MHD25");
        assert_eq!(h[5], 1);
        assert_eq!(u16::from_le_bytes([h[6], h[7]]), 5);
        assert_eq!(u16::from_le_bytes([h[8], h[9]]), 4);
        assert_eq!(f64::from_le_bytes(h[10..18].try_into().unwrap()), -1.5);
        assert_eq!(f64::from_le_bytes(h[34..42].try_into().unwrap()), 0.5);
        assert_eq!(f32::from_le_bytes(h[42..46].try_into().unwrap()), 2.5);
        assert_eq!(f32::from_le_bytes(h[50..54].try_into().unwrap()), 0.01f32);
        assert_eq!((h[62], h[63]), (0, 1));
    }

    #[test]
    fn binary_round_trip() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + s.state.u.len() * 8);
        let back = Snapshot::read_binary(&buf[..]).unwrap();
        assert_eq!(back.state, s.state);
        assert_eq!(back.bc, s.bc);
        assert_eq!(back.time, 2.5);
        assert!((back.params.mu - 0.01).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = Snapshot::read_csv(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(Snapshot::read_binary(&bad[..]), Err(Error::Format(_))));
        assert!(matches!(Snapshot::read_binary(&buf[..buf.len() - 3]), Err(Error::Format(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(Snapshot::read_binary(&long[..]).is_err());
        let mut bad_bc = buf;
        bad_bc[63] = 9;
        assert!(Snapshot::read_binary(&bad_bc[..]).is_err());
    }

    #[test]
    fn derived_csv_has_one_row_per_cell() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_derived_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "i,j,x,y,jx,jy,jz,divb");
        assert_eq!(lines.len(), 2 + 20);
    }
}
