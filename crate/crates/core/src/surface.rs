//! Coefficients `A`, `B` of the quadratic value-function ansatz
//! `theta ~ -A y^2 - B y - C` on a time × auxiliary-state grid, with CSV and
//! binary serialisation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lerp, locate_time, StateGrid1D};

const MAGIC: &[u8; 8] = b"AMMQSURF";
pub const FORMAT_VERSION: u32 = 1;

/// Which system produced a surface; fixes the meaning of the state axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    /// Constant coefficients, no auxiliary state.
    Constant,
    HestonBates,
    SteinSteinJump,
    HawkesPrice,
    ZHawkes,
    /// Axis is the liquidity regime index.
    Mmpp,
}

impl SurfaceKind {
    fn code(self) -> u8 {
        match self {
            SurfaceKind::Constant => 0,
            SurfaceKind::HestonBates => 1,
            SurfaceKind::SteinSteinJump => 2,
            SurfaceKind::HawkesPrice => 3,
            SurfaceKind::ZHawkes => 4,
            SurfaceKind::Mmpp => 5,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => SurfaceKind::Constant,
            1 => SurfaceKind::HestonBates,
            2 => SurfaceKind::SteinSteinJump,
            3 => SurfaceKind::HawkesPrice,
            4 => SurfaceKind::ZHawkes,
            5 => SurfaceKind::Mmpp,
            _ => return Err(Error::Format(format!("unknown surface kind code {c}"))),
        })
    }

    pub fn axis_names(self) -> &'static [&'static str] {
        match self {
            SurfaceKind::Constant => &[],
            SurfaceKind::HestonBates => &["nu"],
            SurfaceKind::SteinSteinJump => &["sigma"],
            SurfaceKind::HawkesPrice => &["lambda"],
            SurfaceKind::ZHawkes => &["h", "xi"],
            SurfaceKind::Mmpp => &["regime"],
        }
    }
}

/// Solver bookkeeping written next to every surface.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub time_steps: usize,
    pub richardson: bool,
    /// Largest `|A_fine - A_coarse|` at common times; an a-posteriori error
    /// indicator for the extrapolated surface.
    pub richardson_delta_a: f64,
    pub richardson_delta_b: f64,
    /// Nonlocal evaluations that fell outside the state grid and were clamped.
    pub shift_clamps: u64,
    /// Rows whose diagonal dominance was verified.
    pub monotone_rows_checked: u64,
    pub min_a: f64,
    pub max_a: f64,
}

/// Discrete value-function coefficients.
///
/// `a` and `b` are stored time-major: entry `(j, s)` is at `j * n_states + s`
/// where `s` runs over the state grid in row-major axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    pub kind: SurfaceKind,
    /// Ascending `0 = t_0 < ... < t_J = T`.
    pub times: Vec<f64>,
    pub axes: Vec<StateGrid1D>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub diagnostics: SolverDiagnostics,
}

/// Coefficients read off a surface at a point, with a flag set when the
/// state had to be clamped into the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub clamped: bool,
}

impl ValueSurface {
    pub fn n_states(&self) -> usize {
        self.axes.iter().map(|g| g.n_points).product()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn a_at(&self, j: usize, s: usize) -> f64 {
        self.a[j * self.n_states() + s]
    }

    pub fn b_at(&self, j: usize, s: usize) -> f64 {
        self.b[j * self.n_states() + s]
    }

    /// `A` on the state grid at time index `j`.
    pub fn a_slice(&self, j: usize) -> &[f64] {
        let n = self.n_states();
        &self.a[j * n..(j + 1) * n]
    }

    pub fn b_slice(&self, j: usize) -> &[f64] {
        let n = self.n_states();
        &self.b[j * n..(j + 1) * n]
    }

    /// Flat state index of grid node `idx`.
    pub fn state_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, g)| acc * g.n_points + i)
    }

    fn check_state_len(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.axes.len() {
            return Err(Error::InvalidInput(format!(
                "surface has {} state axes, got {} state values",
                self.axes.len(),
                state.len()
            )));
        }
        Ok(())
    }

    /// Interpolated `A`, `B` at `(t, state)`: linear in `t` and in each
    /// state axis (regime axes are looked up, never interpolated). Out-of-grid
    /// states are clamped unless `strict`, in which case they are an error.
    pub fn coefficients(&self, t: f64, state: &[f64], strict: bool) -> Result<Coefficients> {
        self.check_state_len(state)?;
        if !t.is_finite() || t < -1e-12 || t > self.horizon() * (1.0 + 1e-12) {
            return Err(Error::OutsideGrid {
                what: "t".into(),
                value: t,
                lo: 0.0,
                hi: self.horizon(),
            });
        }
        let mut clamped = false;
        // Multilinear weights over the 2^d surrounding nodes.
        let mut corners: Vec<(usize, f64)> = vec![(0, 1.0)];
        for (k, (g, &x)) in self.axes.iter().zip(state).enumerate() {
            let (i0, w) = if self.kind == SurfaceKind::Mmpp {
                let r = x.round();
                if !(r >= 0.0 && (r as usize) < g.n_points) || (x - r).abs() > 1e-9 {
                    return Err(Error::OutsideGrid {
                        what: "regime".into(),
                        value: x,
                        lo: 0.0,
                        hi: (g.n_points - 1) as f64,
                    });
                }
                (r as usize, 0.0)
            } else {
                let loc = g.locate(x);
                if loc.clamped {
                    if strict {
                        return Err(Error::OutsideGrid {
                            what: self.kind.axis_names()[k].into(),
                            value: x,
                            lo: g.lo,
                            hi: g.hi,
                        });
                    }
                    clamped = true;
                }
                (loc.index, loc.weight)
            };
            let mut next = Vec::with_capacity(corners.len() * 2);
            for &(idx, wt) in &corners {
                next.push((idx * g.n_points + i0, wt * (1.0 - w)));
                if w > 0.0 {
                    next.push((idx * g.n_points + i0 + 1, wt * w));
                }
            }
            corners = next;
        }
        let (j, wt) = locate_time(&self.times, t);
        let eval = |v: &[f64]| {
            let at = |jj: usize| -> f64 {
                let n = self.n_states();
                corners.iter().map(|&(s, w)| w * v[jj * n + s]).sum()
            };
            if wt == 0.0 {
                at(j)
            } else {
                lerp(at(j), at(j + 1), wt)
            }
        };
        Ok(Coefficients {
            a: eval(&self.a),
            b: eval(&self.b),
            clamped,
        })
    }

    /// CSV header: `t,<axis names>,A,B`.
    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t"];
        cols.extend_from_slice(self.kind.axis_names());
        cols.extend_from_slice(&["A", "B"]);
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        let n = self.n_states();
        let grids: Vec<Vec<f64>> = self.axes.iter().map(|g| g.nodes()).collect();
        for (j, &t) in self.times.iter().enumerate() {
            for s in 0..n {
                write!(w, "{}", fmt_f64(t))?;
                let mut rem = s;
                let mut idx = vec![0; self.axes.len()];
                for k in (0..self.axes.len()).rev() {
                    idx[k] = rem % self.axes[k].n_points;
                    rem /= self.axes[k].n_points;
                }
                for (k, &i) in idx.iter().enumerate() {
                    if self.kind == SurfaceKind::Mmpp {
                        write!(w, ",{i}")?;
                    } else {
                        write!(w, ",{}", fmt_f64(grids[k][i]))?;
                    }
                }
                writeln!(w, ",{},{}", fmt_f64(self.a[j * n + s]), fmt_f64(self.b[j * n + s]))?;
            }
        }
        Ok(())
    }

    /// Little-endian binary: magic, version, kind, axes, times, A, B and the
    /// diagnostics as a length-prefixed JSON string.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[self.kind.code()])?;
        write_u64(&mut w, self.axes.len() as u64)?;
        for g in &self.axes {
            w.write_all(&g.lo.to_le_bytes())?;
            w.write_all(&g.hi.to_le_bytes())?;
            write_u64(&mut w, g.n_points as u64)?;
        }
        for v in [&self.times, &self.a, &self.b] {
            write_u64(&mut w, v.len() as u64)?;
            for x in v.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        let diag = serde_json::to_vec(&self.diagnostics)?;
        write_u64(&mut w, diag.len() as u64)?;
        w.write_all(&diag)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("truncated surface file".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("not a surface file (bad magic)".into()));
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v)?;
        let version = u32::from_le_bytes(v);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "surface format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let mut k = [0u8; 1];
        r.read_exact(&mut k)?;
        let kind = SurfaceKind::from_code(k[0])?;
        let n_axes = read_len(&mut r, 8)?;
        let mut axes = Vec::with_capacity(n_axes);
        for _ in 0..n_axes {
            let lo = read_f64(&mut r)?;
            let hi = read_f64(&mut r)?;
            let n = read_len(&mut r, 1 << 24)?;
            if kind == SurfaceKind::Mmpp {
                // Regime axes are index lists and may have fewer than 3 entries.
                if n == 0 {
                    return Err(Error::Format("empty regime axis".into()));
                }
                axes.push(StateGrid1D { lo, hi, n_points: n });
            } else {
                axes.push(StateGrid1D::new(lo, hi, n)?);
            }
        }
        let mut arrays = Vec::with_capacity(3);
        for _ in 0..3 {
            let n = read_len(&mut r, 1 << 30)?;
            let mut xs = Vec::with_capacity(n);
            for _ in 0..n {
                xs.push(read_f64(&mut r)?);
            }
            arrays.push(xs);
        }
        let n = read_len(&mut r, 1 << 24)?;
        let mut diag = vec![0u8; n];
        r.read_exact(&mut diag)?;
        let diagnostics = serde_json::from_slice(&diag)?;
        let b = arrays.pop().unwrap();
        let a = arrays.pop().unwrap();
        let times = arrays.pop().unwrap();
        let s = Self {
            kind,
            times,
            axes,
            a,
            b,
            diagnostics,
        };
        let expect = s.times.len() * s.n_states();
        if s.times.len() < 2 || s.a.len() != expect || s.b.len() != expect {
            return Err(Error::Format("surface array sizes are inconsistent".into()));
        }
        if s.kind.axis_names().len() != s.axes.len() {
            return Err(Error::Format("surface axis count does not match its kind".into()));
        }
        Ok(s)
    }
}

/// 17 significant digits; round-trips every finite `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated surface file".into()))?;
    Ok(f64::from_le_bytes(b))
}

fn read_len<R: Read>(r: &mut R, cap: usize) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated surface file".into()))?;
    let n = u64::from_le_bytes(b);
    if n > cap as u64 {
        return Err(Error::Format(format!("implausible length {n} in surface file")));
    }
    Ok(n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ValueSurface {
        let axes = vec![StateGrid1D::new(0.0, 1.0, 3).unwrap()];
        let times = vec![0.0, 0.5, 1.0];
        let a: Vec<f64> = (0..9).map(|i| i as f64 * 0.1).collect();
        let b: Vec<f64> = (0..9).map(|i| -(i as f64)).collect();
        ValueSurface {
            kind: SurfaceKind::HestonBates,
            times,
            axes,
            a,
            b,
            diagnostics: SolverDiagnostics::default(),
        }
    }

    #[test]
    fn binary_round_trip() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(ValueSurface::read_binary(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn bad_version_is_rejected() {
        let mut buf = Vec::new();
        sample().write_binary(&mut buf).unwrap();
        buf[8] = 9;
        let err = ValueSurface::read_binary(buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("version 9"));
    }

    #[test]
    fn csv_header_and_rows() {
        let mut out = Vec::new();
        sample().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,nu,A,B");
        assert_eq!(lines.len(), 10);
        let last: Vec<f64> = lines[9].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(last, vec![1.0, 1.0, 0.8, -8.0]);
    }

    #[test]
    fn bilinear_lookup_and_clamp() {
        let s = sample();
        let c = s.coefficients(0.25, &[0.25], false).unwrap();
        // A(j, s) = 0.1 * (3 j + s): linear in both directions.
        assert!((c.a - 0.1 * (3.0 * 0.5 + 0.5)).abs() < 1e-14);
        assert!(!c.clamped);
        let c = s.coefficients(0.0, &[7.0], false).unwrap();
        assert!(c.clamped);
        assert!((c.a - 0.2).abs() < 1e-15);
        assert!(s.coefficients(0.0, &[7.0], true).is_err());
        assert!(s.coefficients(2.0, &[0.0], false).is_err());
    }
}
