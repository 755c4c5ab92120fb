use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::price::PriceProcess;
use crate::error::{Error, Result};
use crate::model::{DemandCurve, LiquidityModel, PoolState, PriceModel, RiskParams, Side};
use crate::pide::ThetaKind;
use crate::quoting::{QuotePolicy, QuoteSource};
use crate::surface::{fmt_f64, SurfaceKind};

/// Identifies the random streams of one Monte Carlo path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub path: u64,
}

impl RngSpec {
    pub const PRICE: u64 = 0;
    pub const TRADES: u64 = 1;
    pub const LIQUIDITY: u64 = 2;

    /// Independent ChaCha8 stream `k` of this path.
    pub fn stream(&self, k: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.path.wrapping_mul(4).wrapping_add(k));
        rng
    }
}

/// Everything but the policy that defines a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetup {
    pub price: PriceModel,
    pub liquidity: LiquidityModel,
    pub curve: DemandCurve,
    pub pool0: PoolState,
    pub risk: RiskParams,
    /// Price step of the diffusive models; defaults to `horizon / 2000`.
    pub dt: Option<f64>,
    pub record_trades: bool,
}

impl SimSetup {
    pub fn step(&self) -> f64 {
        self.dt.unwrap_or(self.risk.horizon / 2000.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub t: f64,
    pub side: Side,
    pub z: f64,
    pub delta: f64,
    /// Rejected because it would have depleted a reserve.
    pub rejected: bool,
    /// Price and pool after the event.
    pub s: f64,
    pub q0: f64,
    pub q1: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    /// `X_T - X_0 + (q0_T - q0_0) + (q1_T - q1_0) S_T`.
    pub excess_pnl: f64,
    /// Same quantity as markups plus `int (q1 - q1_0) dS`.
    pub excess_pnl_pathwise: f64,
    /// Markups + `int (q1 - q1_ref) dS` - `gamma/2 int rate Y^2 dt`.
    pub objective: f64,
    pub markup_revenue: f64,
    pub inventory_pnl: f64,
    pub penalty: f64,
    pub executed: [u64; 2],
    /// Requests that passed thinning (executed or rejected).
    pub requests: u64,
    pub rejected_trades: u64,
    pub trades: Vec<TradeRecord>,
    pub final_pool: PoolState,
}

impl EpisodeResult {
    pub fn accounting_gap(&self) -> f64 {
        (self.excess_pnl - self.excess_pnl_pathwise).abs()
    }
}

/// How a policy's auxiliary coordinates are read from the simulated state.
#[derive(Debug, Clone, Copy, PartialEq)]
enum AuxMap {
    None,
    Price,
    Regime,
    LiquidityIntensities,
}

fn aux_map(policy: &QuotePolicy, setup: &SimSetup) -> Result<AuxMap> {
    let price_kind = match &setup.price {
        PriceModel::Gbm(_) => SurfaceKind::Constant,
        PriceModel::HestonBates(_) => SurfaceKind::HestonBates,
        PriceModel::SteinSteinJump(_) => SurfaceKind::SteinSteinJump,
        PriceModel::HawkesPrice(_) => SurfaceKind::HawkesPrice,
        PriceModel::ZHawkes(_) => SurfaceKind::ZHawkes,
    };
    let mismatch = |what: &str| {
        Err(Error::InvalidInput(format!(
            "policy {} built for {what} cannot drive a {} price with {} liquidity",
            policy.name,
            setup.price.name(),
            match setup.liquidity {
                LiquidityModel::Constant => "constant",
                LiquidityModel::Mmpp(_) => "MMPP",
                LiquidityModel::HawkesLiquidity(_) => "Hawkes",
            }
        )))
    };
    match &policy.source {
        QuoteSource::Myopic { .. } => Ok(AuxMap::None),
        QuoteSource::Surface(s) => match s.kind {
            SurfaceKind::Mmpp if matches!(setup.liquidity, LiquidityModel::Mmpp(_)) => Ok(AuxMap::Regime),
            SurfaceKind::Mmpp => mismatch("MMPP liquidity"),
            SurfaceKind::Constant => Ok(AuxMap::None),
            k if k == price_kind => Ok(AuxMap::Price),
            k => mismatch(&format!("{k:?}")),
        },
        QuoteSource::Theta(g) => match g.kind {
            ThetaKind::Mmpp if matches!(setup.liquidity, LiquidityModel::Mmpp(_)) => Ok(AuxMap::Regime),
            ThetaKind::HawkesLiquidity if matches!(setup.liquidity, LiquidityModel::HawkesLiquidity(_)) => {
                Ok(AuxMap::LiquidityIntensities)
            }
            ThetaKind::HestonBates if price_kind == SurfaceKind::HestonBates => Ok(AuxMap::Price),
            k => mismatch(&format!("{k:?}")),
        },
    }
}

/// Liquidity state of both sides.
enum Liquidity<'a> {
    Constant([f64; 2]),
    Mmpp {
        model: &'a crate::model::Mmpp,
        regime: usize,
        next_switch: f64,
    },
    Hawkes {
        model: &'a crate::model::HawkesLiquidity,
        lambda: [f64; 2],
    },
}

impl Liquidity<'_> {
    fn intensities(&self) -> [f64; 2] {
        match self {
            Liquidity::Constant(l) => *l,
            Liquidity::Mmpp { model, regime, .. } => {
                let (a, b) = model.intensities(*regime);
                [a, b]
            }
            Liquidity::Hawkes { lambda, .. } => *lambda,
        }
    }

    fn decay(&mut self, dt: f64) {
        if let Liquidity::Hawkes { model, lambda } = self {
            let e = (-model.kappa * dt).exp();
            for s in 0..2 {
                lambda[s] = model.lambda_inf[s] + (lambda[s] - model.lambda_inf[s]) * e;
            }
        }
    }

    fn draw_switch(&mut self, t: f64, rng: &mut ChaCha8Rng) {
        if let Liquidity::Mmpp {
            model,
            regime,
            next_switch,
        } = self
        {
            let rate = -model.rate_matrix[*regime][*regime];
            *next_switch = if rate > 0.0 {
                let e: f64 = Exp1.sample(rng);
                t + e / rate
            } else {
                f64::INFINITY
            };
        }
    }

    fn next_switch(&self) -> f64 {
        match self {
            Liquidity::Mmpp { next_switch, .. } => *next_switch,
            _ => f64::INFINITY,
        }
    }

    fn switch(&mut self, rng: &mut ChaCha8Rng) {
        if let Liquidity::Mmpp { model, regime, .. } = self {
            let row = &model.rate_matrix[*regime];
            let total = -row[*regime];
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = *regime;
            for (k, q) in row.iter().enumerate() {
                if k == *regime || *q <= 0.0 {
                    continue;
                }
                acc += q;
                pick = k;
                if u < acc {
                    break;
                }
            }
            *regime = pick;
        }
    }

    fn on_trade(&mut self, side: usize) {
        if let Liquidity::Hawkes { model, lambda } = self {
            lambda[side] += model.kappa * model.m;
        }
    }
}

fn pick(weights: &[f64], total: f64, u: f64) -> usize {
    let mut acc = 0.0;
    let target = u * total;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Simulates one episode on `[0, horizon]` under `policy`.
///
/// Trade requests on each side arrive at rate `lambda_t * sum_k phi_k m_k`;
/// a request picks size `k` with probability proportional to `phi_k m_k`
/// and executes with probability `f(z_k, delta)` at the markup quoted from
/// the left-limit state. For the diffusive price models the price moves in
/// steps of `dt`, before any trade at the same instant. Requests that would
/// drive a reserve negative are rejected and counted.
pub fn simulate_episode(policy: &QuotePolicy, setup: &SimSetup, rng: RngSpec) -> Result<EpisodeResult> {
    let horizon = setup.risk.horizon;
    if policy.horizon() + 1e-12 < horizon {
        return Err(Error::InvalidInput(format!(
            "policy horizon {} is shorter than the simulation horizon {horizon}",
            policy.horizon()
        )));
    }
    let dt = setup.step();
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt must be > 0 (got {dt})")));
    }
    let map = aux_map(policy, setup)?;
    let curve = &setup.curve;
    let gamma = setup.risk.gamma;
    let mut price_rng = rng.stream(RngSpec::PRICE);
    let mut trade_rng = rng.stream(RngSpec::TRADES);
    let mut liq_rng = rng.stream(RngSpec::LIQUIDITY);

    let pool0 = setup.pool0;
    let mut pool = pool0;
    let mut price = PriceProcess::new(&setup.price, pool0.s);
    let mut liq = match &setup.liquidity {
        LiquidityModel::Constant => Liquidity::Constant([curve.side01.lambda_height, curve.side10.lambda_height]),
        LiquidityModel::Mmpp(m) => Liquidity::Mmpp {
            model: m,
            regime: m.initial_state,
            next_switch: f64::INFINITY,
        },
        LiquidityModel::HawkesLiquidity(h) => Liquidity::Hawkes {
            model: h,
            lambda: h.lambda0,
        },
    };
    liq.draw_switch(0.0, &mut liq_rng);

    // Per-side request weights phi_k m_k and their totals.
    let weights: [Vec<f64>; 2] = [Side::ZeroOne, Side::OneZero].map(|s| {
        curve
            .side(s)
            .phi
            .iter()
            .zip(&curve.grid.weights)
            .map(|(p, m)| p * m)
            .collect()
    });
    let mass = [weights[0].iter().sum::<f64>(), weights[1].iter().sum::<f64>()];

    let event_driven = price.is_event_driven();
    let n_steps = (horizon / dt).ceil().max(1.0) as usize;
    let step = horizon / n_steps as f64;
    let mut k_step = 0usize;
    let next_grid = |k: usize| {
        if event_driven || k >= n_steps {
            f64::INFINITY
        } else {
            horizon * (k + 1) as f64 / n_steps as f64
        }
    };
    if event_driven {
        price.draw_candidate(0.0, &mut price_rng);
    }

    let mut bound = [0.0; 2];
    let draw_request = |t: f64, liq: &Liquidity, bound: &mut [f64; 2], rng: &mut ChaCha8Rng| -> f64 {
        let l = liq.intensities();
        *bound = [l[0] * mass[0], l[1] * mass[1]];
        let total = bound[0] + bound[1];
        let e: f64 = Exp1.sample(rng);
        if total > 0.0 {
            t + e / total
        } else {
            f64::INFINITY
        }
    };
    let mut candidate = draw_request(0.0, &liq, &mut bound, &mut trade_rng);

    let mut res = EpisodeResult {
        excess_pnl: 0.0,
        excess_pnl_pathwise: 0.0,
        objective: 0.0,
        markup_revenue: 0.0,
        inventory_pnl: 0.0,
        penalty: 0.0,
        executed: [0; 2],
        requests: 0,
        rejected_trades: 0,
        trades: Vec::new(),
        final_pool: pool0,
    };
    let mut hodl_pnl = 0.0; // int (q1 - q1_start) dS
    let mut t = 0.0;
    loop {
        let tp = if event_driven { price.next_candidate } else { next_grid(k_step) };
        let ts = liq.next_switch();
        let t_next = tp.min(ts).min(candidate).min(horizon);
        let span = t_next - t;
        if span > 0.0 {
            let y = (pool.q1 - pool0.q1_initial) * price.s;
            res.penalty += 0.5 * gamma * y * y * price.integrated_variance(span);
            price.decay(span);
            liq.decay(span);
            t = t_next;
        }
        // Price moves first at a shared instant.
        if tp <= t_next && tp <= horizon {
            let s_old = price.s;
            if event_driven {
                price.candidate(t, &mut price_rng);
            } else {
                price.diffuse(step, &mut price_rng)?;
                k_step += 1;
            }
            let ds = price.s - s_old;
            res.inventory_pnl += (pool.q1 - pool0.q1_initial) * ds;
            hodl_pnl += (pool.q1 - pool0.q1) * ds;
            pool.s = price.s;
            continue;
        }
        if t_next >= horizon {
            break;
        }
        if ts <= t_next {
            liq.switch(&mut liq_rng);
            liq.draw_switch(t, &mut liq_rng);
            candidate = draw_request(t, &liq, &mut bound, &mut trade_rng);
            continue;
        }
        // Trade request candidate.
        let u_side: f64 = trade_rng.random();
        let u_size: f64 = trade_rng.random();
        let u_acc: f64 = trade_rng.random();
        let side = if u_side * (bound[0] + bound[1]) < bound[0] { 0 } else { 1 };
        let now = liq.intensities();
        if bound[side] > 0.0 {
            let k = pick(&weights[side], mass[side], u_size);
            let z = curve.grid.sizes[k];
            let y = (pool.q1 - pool0.q1_initial) * price.s;
            let aux = match map {
                AuxMap::None => vec![],
                AuxMap::Price => price.quote_aux(),
                AuxMap::Regime => match &liq {
                    Liquidity::Mmpp { regime, .. } => vec![*regime as f64],
                    _ => unreachable!(),
                },
                AuxMap::LiquidityIntensities => now.to_vec(),
            };
            let (d01, d10) = policy.quote_pair(t, y, &aux, k)?;
            let delta = if side == 0 { d01 } else { d10 };
            let sd = curve.side(if side == 0 { Side::ZeroOne } else { Side::OneZero });
            let fill = sd.fill_probability(k, delta);
            let ratio = now[side] * mass[side] / bound[side];
            if u_acc < ratio * fill {
                res.requests += 1;
                let dq1 = z / price.s;
                let depletes = if side == 0 { pool.q1 < dq1 } else { pool.q0 < z };
                if depletes {
                    res.rejected_trades += 1;
                } else {
                    if side == 0 {
                        pool.q0 += z;
                        pool.q1 -= dq1;
                    } else {
                        pool.q0 -= z;
                        pool.q1 += dq1;
                    }
                    pool.x += z * delta;
                    res.markup_revenue += z * delta;
                    res.executed[side] += 1;
                    liq.on_trade(side);
                }
                if setup.record_trades {
                    res.trades.push(TradeRecord {
                        t,
                        side: if side == 0 { Side::ZeroOne } else { Side::OneZero },
                        z,
                        delta,
                        rejected: depletes,
                        s: price.s,
                        q0: pool.q0,
                        q1: pool.q1,
                        x: pool.x,
                    });
                }
            }
        }
        candidate = draw_request(t, &liq, &mut bound, &mut trade_rng);
    }
    res.excess_pnl = (pool.x - pool0.x) + (pool.q0 - pool0.q0) + (pool.q1 - pool0.q1) * pool.s;
    res.excess_pnl_pathwise = res.markup_revenue + hodl_pnl;
    res.objective = res.markup_revenue + res.inventory_pnl - res.penalty;
    res.final_pool = pool;
    if !(res.objective.is_finite() && res.excess_pnl.is_finite()) {
        return Err(Error::NonFinite("episode accounting".into()));
    }
    Ok(res)
}

/// Episode log with columns `path_id,t,event_type,side,z,delta,S,q0,q1,X`.
pub fn write_episode_log<W: std::io::Write>(path_id: u64, episode: &EpisodeResult, mut w: W, header: bool) -> Result<()> {
    if header {
        writeln!(w, "path_id,t,event_type,side,z,delta,S,q0,q1,X")?;
    }
    for tr in &episode.trades {
        writeln!(
            w,
            "{path_id},{},{},{},{},{},{},{},{},{}",
            fmt_f64(tr.t),
            if tr.rejected { "rejected" } else { "trade" },
            tr.side.label(),
            fmt_f64(tr.z),
            fmt_f64(tr.delta),
            fmt_f64(tr.s),
            fmt_f64(tr.q0),
            fmt_f64(tr.q1),
            fmt_f64(tr.x)
        )?;
    }
    Ok(())
}
