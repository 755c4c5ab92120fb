//! The JSON experiment file and the dispatch from a configuration to the
//! matching solver.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError};
use crate::grid::StateGrid1D;
use crate::hamiltonian::{curve_moments, QuadraticCoeffs};
use crate::model::*;
use crate::pide::{
    solve_pide_hawkes_liquidity_demo, solve_pide_heston_bates, solve_pide_mmpp, CostReport, DemoGrids,
    PideOptions, ThetaGrid,
};
use crate::quoting::QuotePolicy;
use crate::riccati::{self, RiccatiOptions};
use crate::simulator::SimSetup;
use crate::surface::{SurfaceKind, ValueSurface};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Coefficients `A`, `B` of the quadratic ansatz.
    #[default]
    Riccati,
    /// Value function on an inventory grid.
    Pide,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub solver: SolverKind,
    pub riccati: RiccatiOptions,
    pub pide: PideOptions,
    pub hawkes_liquidity: DemoGrids,
    /// Auxiliary-state axes in solver order; empty means defaulted grids.
    pub state: Vec<StateGrid1D>,
}

/// Where a simulated policy gets its quotes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySource {
    /// Solved from this configuration with `grids.solver`.
    Optimal,
    /// Zero reservation spreads.
    Myopic,
    /// A binary surface written by `solve`.
    Surface(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: String,
    pub source: PolicySource,
    #[serde(default = "one")]
    pub markup_scale: f64,
    #[serde(default)]
    pub clamp: Option<[f64; 2]>,
}

fn one() -> f64 {
    1.0
}

impl PolicySpec {
    pub fn optimal() -> Self {
        Self {
            name: "optimal".into(),
            source: PolicySource::Optimal,
            markup_scale: 1.0,
            clamp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub pool: PoolState,
    /// Price step of the diffusive models; defaults to `horizon / 2000`.
    pub dt: Option<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub policies: Vec<PolicySpec>,
    /// Also write one CSV row per trade request.
    pub episode_log: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            pool: PoolState::balanced(1000.0, 1.0),
            dt: None,
            n_paths: 1000,
            seed: 0,
            policies: vec![PolicySpec::optimal()],
            episode_log: false,
        }
    }
}

/// Points at which `quote-table` evaluates the quotes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuoteTableConfig {
    /// Binary surface; solved from the configuration when absent.
    pub surface: Option<PathBuf>,
    pub t: f64,
    #[serde(rename = "Y")]
    pub ys: Vec<f64>,
    /// Auxiliary states; one empty entry for models without auxiliary state.
    pub states: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub price_model: PriceModel,
    pub liquidity_model: LiquidityModel,
    pub demand: DemandCurve,
    pub risk: RiskParams,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub quote_table: Option<QuoteTableConfig>,
}

impl Validate for Config {
    fn validate_into(&self, _path: &str, errors: &mut Vec<ValidationError>) {
        self.price_model.validate_into("price_model", errors);
        self.liquidity_model.validate_into("liquidity_model", errors);
        self.demand.validate_into("demand", errors);
        self.risk.validate_into("risk", errors);
        self.simulation.pool.validate_into("simulation.pool", errors);
        if !matches!(self.liquidity_model, LiquidityModel::Constant)
            && !matches!(self.price_model, PriceModel::Gbm(_))
        {
            errors.push(ValidationError::new(
                "liquidity_model",
                "stochastic liquidity requires a gbm price model",
            ));
        }
        if let Some(dt) = self.simulation.dt {
            if !(dt.is_finite() && dt > 0.0) {
                errors.push(ValidationError::new("simulation.dt", "must be > 0"));
            }
        }
        if self.simulation.n_paths == 0 {
            errors.push(ValidationError::new("simulation.n_paths", "must be >= 1"));
        }
        for (i, p) in self.simulation.policies.iter().enumerate() {
            if !(p.markup_scale.is_finite() && p.markup_scale > 0.0) {
                errors.push(ValidationError::new(
                    format!("simulation.policies[{i}].markup_scale"),
                    "must be > 0",
                ));
            }
            if let Some([lo, hi]) = p.clamp {
                if !(lo <= hi) {
                    errors.push(ValidationError::new(
                        format!("simulation.policies[{i}].clamp"),
                        "lower bound must not exceed upper bound",
                    ));
                }
            }
        }
        if let Some(q) = &self.quote_table {
            if !(q.t.is_finite() && (0.0..=self.risk.horizon).contains(&q.t)) {
                errors.push(ValidationError::new("quote_table.t", "must lie in [0, horizon]"));
            }
        }
        for (i, g) in self.grids.state.iter().enumerate() {
            if let Err(e) = StateGrid1D::new(g.lo, g.hi, g.n_points) {
                errors.push(ValidationError::new(format!("grids.state[{i}]"), e.to_string()));
            }
        }
    }
}

impl Config {
    /// Parses and validates; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate().map_err(Error::Validation)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn sim_setup(&self) -> SimSetup {
        SimSetup {
            price: self.price_model.clone(),
            liquidity: self.liquidity_model.clone(),
            curve: self.demand.clone(),
            pool0: self.simulation.pool,
            risk: self.risk,
            dt: self.simulation.dt,
            record_trades: self.simulation.episode_log,
        }
    }
}

/// The system a `solve` run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveTarget {
    Constant,
    HestonBates,
    SteinStein,
    Hawkes,
    Zhawkes,
    Mmpp,
    PideHestonBates,
    PideMmpp,
    PideHawkesLiquidity,
}

impl SolveTarget {
    pub const ALL: [SolveTarget; 9] = [
        SolveTarget::Constant,
        SolveTarget::HestonBates,
        SolveTarget::SteinStein,
        SolveTarget::Hawkes,
        SolveTarget::Zhawkes,
        SolveTarget::Mmpp,
        SolveTarget::PideHestonBates,
        SolveTarget::PideMmpp,
        SolveTarget::PideHawkesLiquidity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolveTarget::Constant => "constant",
            SolveTarget::HestonBates => "heston-bates",
            SolveTarget::SteinStein => "stein-stein",
            SolveTarget::Hawkes => "hawkes",
            SolveTarget::Zhawkes => "zhawkes",
            SolveTarget::Mmpp => "mmpp",
            SolveTarget::PideHestonBates => "pide-heston-bates",
            SolveTarget::PideMmpp => "pide-mmpp",
            SolveTarget::PideHawkesLiquidity => "pide-hawkes-liquidity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }

    /// The target implied by the configured models and `grids.solver`.
    pub fn for_config(cfg: &Config) -> Result<Self> {
        use SolveTarget::*;
        let pide = cfg.grids.solver == SolverKind::Pide;
        let t = match (&cfg.liquidity_model, &cfg.price_model) {
            (LiquidityModel::HawkesLiquidity(_), _) => PideHawkesLiquidity,
            (LiquidityModel::Mmpp(_), _) => {
                if pide {
                    PideMmpp
                } else {
                    Mmpp
                }
            }
            (LiquidityModel::Constant, PriceModel::HestonBates(_)) => {
                if pide {
                    PideHestonBates
                } else {
                    HestonBates
                }
            }
            (LiquidityModel::Constant, p) if pide => {
                return Err(Error::InvalidInput(format!(
                    "no full-equation solver for the {} price model",
                    p.name()
                )))
            }
            (LiquidityModel::Constant, PriceModel::Gbm(_)) => Constant,
            (LiquidityModel::Constant, PriceModel::SteinSteinJump(_)) => SteinStein,
            (LiquidityModel::Constant, PriceModel::HawkesPrice(_)) => Hawkes,
            (LiquidityModel::Constant, PriceModel::ZHawkes(_)) => Zhawkes,
        };
        Ok(t)
    }

    /// Checks that this target can run on `cfg`.
    pub fn check(self, cfg: &Config) -> Result<()> {
        use SolveTarget::*;
        let constant = matches!(cfg.liquidity_model, LiquidityModel::Constant);
        let ok = match self {
            Constant => constant && matches!(cfg.price_model, PriceModel::Gbm(_)),
            HestonBates | PideHestonBates => constant && matches!(cfg.price_model, PriceModel::HestonBates(_)),
            SteinStein => constant && matches!(cfg.price_model, PriceModel::SteinSteinJump(_)),
            Hawkes => constant && matches!(cfg.price_model, PriceModel::HawkesPrice(_)),
            Zhawkes => constant && matches!(cfg.price_model, PriceModel::ZHawkes(_)),
            Mmpp | PideMmpp => matches!(cfg.liquidity_model, LiquidityModel::Mmpp(_)),
            PideHawkesLiquidity => matches!(cfg.liquidity_model, LiquidityModel::HawkesLiquidity(_)),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "model {} does not match the configured {} price / {} liquidity",
                self.name(),
                cfg.price_model.name(),
                liquidity_name(&cfg.liquidity_model)
            )))
        }
    }
}

fn liquidity_name(l: &LiquidityModel) -> &'static str {
    match l {
        LiquidityModel::Constant => "constant",
        LiquidityModel::HawkesLiquidity(_) => "hawkes_liquidity",
        LiquidityModel::Mmpp(_) => "mmpp",
    }
}

#[derive(Debug, Clone)]
pub enum Solution {
    Surface(ValueSurface),
    Theta {
        theta: ThetaGrid,
        cost: Option<CostReport>,
    },
}

impl Solution {
    pub fn policy(self, curve: DemandCurve) -> QuotePolicy {
        match self {
            Solution::Surface(s) => QuotePolicy::from_surface(s, curve),
            Solution::Theta { theta, .. } => QuotePolicy::from_theta(theta, curve),
        }
    }
}

fn gbm_params(cfg: &Config) -> (f64, f64) {
    match &cfg.price_model {
        PriceModel::Gbm(g) => (g.sigma, g.mu),
        // Rejected by validation for stochastic liquidity.
        other => (other.variance_rate(&other.initial_aux()).sqrt(), other.drift()),
    }
}

fn axis(cfg: &Config, i: usize) -> Option<StateGrid1D> {
    cfg.grids.state.get(i).copied()
}

/// Runs `target` (or the configuration's default target) on `cfg`.
pub fn solve(cfg: &Config, target: Option<SolveTarget>) -> Result<Solution> {
    let target = match target {
        Some(t) => t,
        None => SolveTarget::for_config(cfg)?,
    };
    target.check(cfg)?;
    let (r, c, ro, po) = (&cfg.risk, &cfg.demand, &cfg.grids.riccati, &cfg.grids.pide);
    let surface = |s| Ok(Solution::Surface(s));
    let theta = |theta| Ok(Solution::Theta { theta, cost: None });
    match (target, &cfg.price_model, &cfg.liquidity_model) {
        (SolveTarget::Constant, PriceModel::Gbm(g), _) => {
            let coeffs = QuadraticCoeffs::new(c, ro.expansion_point)?;
            surface(riccati::solve_constant_ab(r, &curve_moments(c, &coeffs), g.sigma * g.sigma, g.mu, ro)?)
        }
        (SolveTarget::HestonBates, PriceModel::HestonBates(m), _) => {
            surface(riccati::solve_heston_bates_ab(m, r, c, axis(cfg, 0), ro)?)
        }
        (SolveTarget::SteinStein, PriceModel::SteinSteinJump(m), _) => {
            surface(riccati::solve_stein_stein_ab(m, r, c, axis(cfg, 0), ro)?)
        }
        (SolveTarget::Hawkes, PriceModel::HawkesPrice(m), _) => {
            surface(riccati::solve_hawkes_price_ab(m, r, c, axis(cfg, 0), ro)?)
        }
        (SolveTarget::Zhawkes, PriceModel::ZHawkes(m), _) => {
            let grids = axis(cfg, 0).zip(axis(cfg, 1));
            surface(riccati::solve_zhawkes_ab(m, r, c, grids, ro)?)
        }
        (SolveTarget::Mmpp, _, LiquidityModel::Mmpp(q)) => {
            let (sigma, mu) = gbm_params(cfg);
            surface(riccati::solve_mmpp_ab(q, r, c, sigma, mu, ro)?)
        }
        (SolveTarget::PideHestonBates, PriceModel::HestonBates(m), _) => {
            theta(solve_pide_heston_bates(m, r, c, axis(cfg, 0), po)?)
        }
        (SolveTarget::PideMmpp, _, LiquidityModel::Mmpp(q)) => {
            let (sigma, mu) = gbm_params(cfg);
            theta(solve_pide_mmpp(q, r, c, sigma, mu, po)?)
        }
        (SolveTarget::PideHawkesLiquidity, _, LiquidityModel::HawkesLiquidity(h)) => {
            let (sigma, mu) = gbm_params(cfg);
            let (theta, cost) =
                solve_pide_hawkes_liquidity_demo(h, sigma, mu, r, c, &cfg.grids.hawkes_liquidity)?;
            Ok(Solution::Theta { theta, cost: Some(cost) })
        }
        _ => unreachable!("target checked against the configuration"),
    }
}

/// Builds the quoting policy described by `spec`. `optimal` is solved on
/// first use and reused.
pub fn build_policy(cfg: &Config, spec: &PolicySpec, optimal: &mut Option<QuotePolicy>) -> Result<QuotePolicy> {
    let base = match &spec.source {
        PolicySource::Optimal => match optimal {
            Some(p) => p.clone(),
            None => {
                let p = solve(cfg, None)?.policy(cfg.demand.clone());
                *optimal = Some(p.clone());
                p
            }
        },
        PolicySource::Myopic => QuotePolicy::myopic(cfg.demand.clone(), cfg.risk.horizon),
        PolicySource::Surface(path) => {
            let s = ValueSurface::read_binary(std::io::BufReader::new(std::fs::File::open(path)?))?;
            let expected = match SolveTarget::for_config(cfg) {
                Ok(SolveTarget::Constant) => Some(SurfaceKind::Constant),
                Ok(SolveTarget::HestonBates) => Some(SurfaceKind::HestonBates),
                Ok(SolveTarget::SteinStein) => Some(SurfaceKind::SteinSteinJump),
                Ok(SolveTarget::Hawkes) => Some(SurfaceKind::HawkesPrice),
                Ok(SolveTarget::Zhawkes) => Some(SurfaceKind::ZHawkes),
                Ok(SolveTarget::Mmpp) => Some(SurfaceKind::Mmpp),
                _ => None,
            };
            if expected.is_some_and(|k| k != s.kind) {
                return Err(Error::InvalidInput(format!(
                    "surface {} is of kind {:?}, configuration needs {:?}",
                    path.display(),
                    s.kind,
                    expected.unwrap()
                )));
            }
            QuotePolicy::from_surface(s, cfg.demand.clone())
        }
    };
    let mut p = base.named(spec.name.clone()).with_markup_scale(spec.markup_scale);
    if let Some([lo, hi]) = spec.clamp {
        p = p.with_clamp(lo, hi);
    }
    Ok(p)
}
