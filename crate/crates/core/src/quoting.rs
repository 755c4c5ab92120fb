//! Markups from solved value functions.
//!
//! For a reservation spread `p` the optimal markup on a side is
//! `delta_bar(z, p) = argmax_d f(z, d) (d - p)`. Quadratic surfaces give
//! `p01 = A (z - 2Y) - B`, `p10 = A (z + 2Y) + B`; full value functions give
//! `p01 = (theta(Y) - theta(Y - z)) / z`, `p10 = (theta(Y) - theta(Y + z)) / z`.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::grid::quadratic_interp;
use crate::hamiltonian::optimal_delta;
use crate::model::{DemandCurve, Side};
use crate::pide::ThetaGrid;
use crate::surface::{fmt_f64, ValueSurface};

/// What a policy reads its reservation spreads from.
#[derive(Debug, Clone)]
pub enum QuoteSource {
    Surface(ValueSurface),
    Theta(ThetaGrid),
    /// Zero reservation spreads: the myopic markups `delta_bar(z, 0)`.
    Myopic { horizon: f64 },
}

/// A markup rule for both sides and all sizes of a demand curve.
#[derive(Debug)]
pub struct QuotePolicy {
    pub name: String,
    pub source: QuoteSource,
    pub curve: DemandCurve,
    /// Optional `(min, max)` clamp applied to every markup, last.
    pub clamp: Option<(f64, f64)>,
    /// Reject auxiliary states outside the source grid instead of clamping.
    pub strict_state: bool,
    /// Multiplies every markup (a mis-tuning knob for comparisons).
    pub markup_scale: f64,
    clamped_lookups: AtomicU64,
}

impl Clone for QuotePolicy {
    fn clone(&self) -> Self {
        Self {
            name: self.name.clone(),
            source: self.source.clone(),
            curve: self.curve.clone(),
            clamp: self.clamp,
            strict_state: self.strict_state,
            markup_scale: self.markup_scale,
            clamped_lookups: AtomicU64::new(0),
        }
    }
}

impl QuotePolicy {
    pub fn new(name: impl Into<String>, source: QuoteSource, curve: DemandCurve) -> Self {
        Self {
            name: name.into(),
            source,
            curve,
            clamp: None,
            strict_state: false,
            markup_scale: 1.0,
            clamped_lookups: AtomicU64::new(0),
        }
    }

    pub fn from_surface(surface: ValueSurface, curve: DemandCurve) -> Self {
        Self::new("surface", QuoteSource::Surface(surface), curve)
    }

    pub fn from_theta(theta: ThetaGrid, curve: DemandCurve) -> Self {
        Self::new("theta", QuoteSource::Theta(theta), curve)
    }

    pub fn myopic(curve: DemandCurve, horizon: f64) -> Self {
        Self::new("myopic", QuoteSource::Myopic { horizon }, curve)
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_markup_scale(mut self, scale: f64) -> Self {
        self.markup_scale = scale;
        self
    }

    pub fn with_clamp(mut self, lo: f64, hi: f64) -> Self {
        self.clamp = Some((lo, hi));
        self
    }

    pub fn strict(mut self) -> Self {
        self.strict_state = true;
        self
    }

    pub fn horizon(&self) -> f64 {
        match &self.source {
            QuoteSource::Surface(s) => s.horizon(),
            QuoteSource::Theta(g) => *g.times.last().unwrap_or(&0.0),
            QuoteSource::Myopic { horizon } => *horizon,
        }
    }

    /// Number of quote requests whose auxiliary state was clamped to the grid.
    pub fn clamped_lookups(&self) -> u64 {
        self.clamped_lookups.load(Ordering::Relaxed)
    }

    fn note_clamp(&self, clamped: bool) {
        if clamped {
            let n = self.clamped_lookups.fetch_add(1, Ordering::Relaxed);
            if n == 0 {
                log::warn!("policy {}: auxiliary state clamped to the solver grid", self.name);
            }
        }
    }

    /// Reservation spreads `(p01, p10)` for every size of the curve.
    pub fn reservation_spreads(&self, t: f64, y: f64, aux: &[f64]) -> Result<Vec<(f64, f64)>> {
        let sizes = &self.curve.grid.sizes;
        match &self.source {
            QuoteSource::Myopic { horizon } => {
                if !(t >= 0.0 && t <= *horizon) {
                    return Err(Error::OutsideGrid {
                        what: "t".into(),
                        value: t,
                        lo: 0.0,
                        hi: *horizon,
                    });
                }
                Ok(vec![(0.0, 0.0); sizes.len()])
            }
            QuoteSource::Surface(s) => {
                let c = s.coefficients(t, aux, self.strict_state)?;
                self.note_clamp(c.clamped);
                Ok(sizes
                    .iter()
                    .map(|z| (c.a * (z - 2.0 * y) - c.b, c.a * (z + 2.0 * y) + c.b))
                    .collect())
            }
            QuoteSource::Theta(g) => {
                let (line, clamped) = g.line_at(t, aux, self.strict_state)?;
                self.note_clamp(clamped);
                let h = g.y.spacing();
                let at = |x: f64| -> Result<f64> {
                    if !g.y.contains(x) {
                        return Err(Error::OutsideGrid {
                            what: "y".into(),
                            value: x,
                            lo: g.y.lo,
                            hi: g.y.hi,
                        });
                    }
                    Ok(quadratic_interp(g.y.lo, h, &line, x))
                };
                let th = at(y)?;
                sizes
                    .iter()
                    .map(|&z| Ok(((th - at(y - z)?) / z, (th - at(y + z)?) / z)))
                    .collect()
            }
        }
    }

    fn markup(&self, side: Side, k: usize, p: f64) -> Result<f64> {
        let d = self.curve.side(side);
        let mut delta = optimal_delta(d.a[k], d.b[k], p)? * self.markup_scale;
        if let Some((lo, hi)) = self.clamp {
            delta = delta.clamp(lo, hi);
        }
        Ok(delta)
    }

    /// `(delta01, delta10)` for every size of the curve.
    pub fn quotes(&self, t: f64, y: f64, aux: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.reservation_spreads(t, y, aux)?
            .into_iter()
            .enumerate()
            .map(|(k, (p01, p10))| Ok((self.markup(Side::ZeroOne, k, p01)?, self.markup(Side::OneZero, k, p10)?)))
            .collect()
    }

    /// `(delta01, delta10)` for size index `k`.
    pub fn quote_pair(&self, t: f64, y: f64, aux: &[f64], k: usize) -> Result<(f64, f64)> {
        if k >= self.curve.grid.len() {
            return Err(Error::InvalidInput(format!("size index {k} out of range")));
        }
        let p = self.reservation_spreads(t, y, aux)?[k];
        Ok((self.markup(Side::ZeroOne, k, p.0)?, self.markup(Side::OneZero, k, p.1)?))
    }
}

/// Quotes from a quadratic surface: `delta01 = delta_bar(z, A (z - 2Y) - B)`,
/// `delta10 = delta_bar(z, A (z + 2Y) + B)`.
pub fn quote_pair_from_surface(
    surface: &ValueSurface,
    curve: &DemandCurve,
    t: f64,
    y: f64,
    aux: &[f64],
    k: usize,
) -> Result<(f64, f64)> {
    QuotePolicy::from_surface(surface.clone(), curve.clone()).quote_pair(t, y, aux, k)
}

/// Quotes from a full value function via finite differences of `theta`.
pub fn quote_pair_from_theta(
    theta: &ThetaGrid,
    curve: &DemandCurve,
    t: f64,
    y: f64,
    aux: &[f64],
    k: usize,
) -> Result<(f64, f64)> {
    QuotePolicy::from_theta(theta.clone(), curve.clone()).quote_pair(t, y, aux, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuoteRow {
    pub t: f64,
    pub y: f64,
    pub state: Vec<f64>,
    pub z: f64,
    pub side: Side,
    pub delta: f64,
}

/// Dense table ordered by `Y`, then auxiliary state, then size, then side.
pub fn build_quote_table(
    policy: &QuotePolicy,
    t: f64,
    ys: &[f64],
    states: &[Vec<f64>],
) -> Result<Vec<QuoteRow>> {
    let mut rows = Vec::with_capacity(ys.len() * states.len() * policy.curve.grid.len() * 2);
    for &y in ys {
        for state in states {
            let quotes = policy.quotes(t, y, state)?;
            for (k, (d01, d10)) in quotes.into_iter().enumerate() {
                let z = policy.curve.grid.sizes[k];
                for (side, delta) in [(Side::ZeroOne, d01), (Side::OneZero, d10)] {
                    rows.push(QuoteRow {
                        t,
                        y,
                        state: state.clone(),
                        z,
                        side,
                        delta,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// CSV with columns `t,Y,state1,state2,z,side,delta`; unused state columns are empty.
pub fn write_quote_csv<W: std::io::Write>(rows: &[QuoteRow], mut w: W) -> Result<()> {
    writeln!(w, "t,Y,state1,state2,z,side,delta")?;
    for r in rows {
        let st = |i: usize| r.state.get(i).map(|x| fmt_f64(*x)).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.y),
            st(0),
            st(1),
            fmt_f64(r.z),
            r.side.label(),
            fmt_f64(r.delta)
        )?;
    }
    Ok(())
}
