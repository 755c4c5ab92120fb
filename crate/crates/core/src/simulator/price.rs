use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{JumpMeasure, PriceModel};

/// Sampled reference-price path. For the event-driven models the samples
/// are the initial point, every jump and the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub aux: Vec<Vec<f64>>,
}

pub(crate) fn draw_jump(jumps: &JumpMeasure, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (eta, p) in jumps.supports.iter().zip(&jumps.probs) {
        acc += p;
        if u < acc {
            return *eta;
        }
    }
    *jumps.supports.last().unwrap_or(&0.0)
}

/// Reference price with its auxiliary state, advanced either in fixed steps
/// (diffusive models) or event by event (Hawkes-type models).
pub(crate) struct PriceProcess<'a> {
    pub model: &'a PriceModel,
    pub s: f64,
    pub aux: Vec<f64>,
    eta2: f64,
    /// Event-driven models: next candidate event time and the thinning bound
    /// it was drawn with.
    pub next_candidate: f64,
    bound: f64,
}

impl<'a> PriceProcess<'a> {
    pub fn new(model: &'a PriceModel, s0: f64) -> Self {
        Self {
            model,
            s: s0,
            aux: model.initial_aux(),
            eta2: model.jumps().map(|j| j.moments().eta_bar_sq).unwrap_or(0.0),
            next_candidate: f64::INFINITY,
            bound: 0.0,
        }
    }

    pub fn is_event_driven(&self) -> bool {
        matches!(self.model, PriceModel::HawkesPrice(_) | PriceModel::ZHawkes(_))
    }

    /// Auxiliary state as a quoting coordinate (variance floored at zero).
    pub fn quote_aux(&self) -> Vec<f64> {
        match self.model {
            PriceModel::HestonBates(_) => vec![self.aux[0].max(0.0)],
            _ => self.aux.clone(),
        }
    }

    fn jump_intensity(&self) -> f64 {
        match self.model {
            PriceModel::HawkesPrice(_) => self.aux[0],
            PriceModel::ZHawkes(m) => m.intensity(self.aux[0], self.aux[1]),
            _ => 0.0,
        }
    }

    /// `int_0^dt` of the quadratic-variation rate of `log S`, given no event in between.
    pub fn integrated_variance(&self, dt: f64) -> f64 {
        if dt <= 0.0 {
            return 0.0;
        }
        match self.model {
            PriceModel::HawkesPrice(m) => {
                let excess = self.aux[0] - m.lambda_inf;
                self.eta2 * (m.lambda_inf * dt + excess * decay_integral(m.beta, dt))
            }
            PriceModel::ZHawkes(m) => {
                let (h, xi) = (self.aux[0], self.aux[1]);
                self.eta2
                    * (m.lambda_inf * dt
                        + h * decay_integral(m.kappa, dt)
                        + xi * xi * decay_integral(2.0 * m.omega, dt))
            }
            _ => self.model.variance_rate(&self.aux) * dt,
        }
    }

    /// Deterministic relaxation of the event-driven intensity over `dt`.
    pub fn decay(&mut self, dt: f64) {
        match self.model {
            PriceModel::HawkesPrice(m) => {
                self.aux[0] = m.lambda_inf + (self.aux[0] - m.lambda_inf) * (-m.beta * dt).exp();
            }
            PriceModel::ZHawkes(m) => {
                self.aux[0] *= (-m.kappa * dt).exp();
                self.aux[1] *= (-m.omega * dt).exp();
            }
            _ => {}
        }
    }

    /// Draws the next thinning candidate after `t` from the current intensity,
    /// which bounds the intensity until the next event.
    pub fn draw_candidate(&mut self, t: f64, rng: &mut ChaCha8Rng) {
        self.bound = self.jump_intensity();
        self.next_candidate = if self.bound > 0.0 {
            let e: f64 = Exp1.sample(rng);
            t + e / self.bound
        } else {
            f64::INFINITY
        };
    }

    /// At the candidate time (state already decayed to it): accepts with
    /// probability `intensity / bound`, applies the jump, draws the next
    /// candidate. Returns whether a jump happened.
    pub fn candidate(&mut self, t: f64, rng: &mut ChaCha8Rng) -> bool {
        let u: f64 = rng.random();
        let accept = u * self.bound < self.jump_intensity();
        if accept {
            match self.model {
                PriceModel::HawkesPrice(m) => {
                    let eta = draw_jump(&m.jumps, rng);
                    self.s *= 1.0 + eta;
                    self.aux[0] += m.beta * m.n;
                }
                PriceModel::ZHawkes(m) => {
                    let eta = draw_jump(&m.jumps, rng);
                    self.s *= 1.0 + eta;
                    self.aux[0] += m.kappa * m.n_h;
                    self.aux[1] += eta.signum() * m.xi_jump();
                }
                _ => {}
            }
        }
        self.draw_candidate(t, rng);
        accept
    }

    /// One step of a diffusive model.
    pub fn diffuse(&mut self, dt: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let jumps = |rate: f64, measure: &JumpMeasure, rng: &mut ChaCha8Rng| -> Result<f64> {
            if rate <= 0.0 {
                return Ok(1.0);
            }
            let count = Poisson::new(rate * dt)
                .map_err(|e| Error::InvalidInput(format!("jump count: {e}")))?
                .sample(rng) as u64;
            Ok((0..count).map(|_| 1.0 + draw_jump(measure, rng)).product())
        };
        match self.model {
            PriceModel::Gbm(m) => {
                self.s *= ((m.mu - 0.5 * m.sigma * m.sigma) * dt + m.sigma * dt.sqrt() * z1).exp();
            }
            PriceModel::HestonBates(m) => {
                // Full truncation: the negative part of nu is dropped in drift and diffusion.
                let v = self.aux[0].max(0.0);
                let w2 = m.rho * z1 + (1.0 - m.rho * m.rho).sqrt() * z2;
                self.aux[0] += m.k * (m.nu_bar - v) * dt + m.xi * (v * dt).sqrt() * w2;
                let j = jumps(m.jump_rate, &m.jumps, rng)?;
                self.s *= ((m.mu - 0.5 * v) * dt + (v * dt).sqrt() * z1).exp() * j;
            }
            PriceModel::SteinSteinJump(m) => {
                let sig = self.aux[0];
                let w2 = m.rho * z1 + (1.0 - m.rho * m.rho).sqrt() * z2;
                let e = (-m.k * dt).exp();
                let sd = if m.k > 0.0 {
                    m.xi * ((1.0 - e * e) / (2.0 * m.k)).sqrt()
                } else {
                    m.xi * dt.sqrt()
                };
                self.aux[0] = m.sigma_bar + (sig - m.sigma_bar) * e + sd * w2;
                let j = jumps(m.jump_rate, &m.jumps, rng)?;
                self.s *= ((m.mu - 0.5 * sig * sig) * dt + sig * dt.sqrt() * z1).exp() * j;
            }
            PriceModel::HawkesPrice(_) | PriceModel::ZHawkes(_) => {}
        }
        if !(self.s.is_finite() && self.aux.iter().all(|a| a.is_finite())) {
            return Err(Error::NonFinite("price step".into()));
        }
        Ok(())
    }
}

/// `int_0^dt e^{-r s} ds`.
fn decay_integral(r: f64, dt: f64) -> f64 {
    if r * dt < 1e-8 {
        dt * (1.0 - 0.5 * r * dt)
    } else {
        -(-r * dt).exp_m1() / r
    }
}

/// Simulates the reference price alone on `[0, horizon]`.
///
/// Diffusive models take steps of at most `dt` (the last step ends exactly at
/// the horizon); the Hawkes-type models are simulated exactly by thinning
/// against the left-limit intensity, and `dt` is only validated.
pub fn simulate_price(
    model: &PriceModel,
    s0: f64,
    horizon: f64,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PricePath> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt must be > 0 (got {dt})")));
    }
    if !(horizon > 0.0 && s0 > 0.0) {
        return Err(Error::InvalidInput("horizon and initial price must be > 0".into()));
    }
    let mut p = PriceProcess::new(model, s0);
    let mut path = PricePath {
        times: vec![0.0],
        s: vec![s0],
        aux: vec![p.aux.clone()],
    };
    if p.is_event_driven() {
        let mut t = 0.0;
        p.draw_candidate(0.0, rng);
        while p.next_candidate < horizon {
            let tc = p.next_candidate;
            p.decay(tc - t);
            t = tc;
            if p.candidate(t, rng) {
                path.times.push(t);
                path.s.push(p.s);
                path.aux.push(p.aux.clone());
            }
        }
        p.decay(horizon - t);
        path.times.push(horizon);
        path.s.push(p.s);
        path.aux.push(p.aux.clone());
    } else {
        let n = (horizon / dt).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = horizon * k as f64 / n as f64;
            p.diffuse(horizon / n as f64, rng)?;
            path.times.push(t);
            path.s.push(p.s);
            path.aux.push(p.aux.clone());
        }
    }
    Ok(path)
}
