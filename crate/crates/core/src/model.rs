//! Parameter, state and configuration types shared by the solvers, the
//! quoting layer and the simulator.
//!
//! Everything here is plain data. Invariants are checked by [`Validate`]
//! implementations which collect *every* violation instead of stopping at the
//! first one.

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

const SUM_TOL: f64 = 1e-9;
const CENTER_TOL: f64 = 1e-12;

/// Collects invariant violations into `errors`, prefixing field names with `path`.
pub trait Validate {
    fn validate_into(&self, path: &str, errors: &mut Vec<ValidationError>);

    fn validate(&self) -> Result<(), Vec<ValidationError>> {
        let mut errors = Vec::new();
        self.validate_into("", &mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

fn field(path: &str, name: &str) -> String {
    if path.is_empty() {
        name.to_string()
    } else {
        format!("{path}.{name}")
    }
}

fn check_finite(path: &str, name: &str, v: f64, errors: &mut Vec<ValidationError>) -> bool {
    if v.is_finite() {
        true
    } else {
        errors.push(ValidationError::new(field(path, name), "must be finite"));
        false
    }
}

fn check_positive(path: &str, name: &str, v: f64, errors: &mut Vec<ValidationError>) {
    if check_finite(path, name, v, errors) && v <= 0.0 {
        errors.push(ValidationError::new(field(path, name), "must be > 0"));
    }
}

fn check_nonneg(path: &str, name: &str, v: f64, errors: &mut Vec<ValidationError>) {
    if check_finite(path, name, v, errors) && v < 0.0 {
        errors.push(ValidationError::new(field(path, name), "must be >= 0"));
    }
}

fn check_correlation(path: &str, v: f64, errors: &mut Vec<ValidationError>) {
    if check_finite(path, "rho", v, errors) && !(-1.0..=1.0).contains(&v) {
        errors.push(ValidationError::new(field(path, "rho"), "must lie in [-1, 1]"));
    }
}

/// Discrete size measure `m`: trade sizes (in currency 0) and their masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeGrid {
    pub sizes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SizeGrid {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn max_size(&self) -> f64 {
        self.sizes.iter().copied().fold(0.0, f64::max)
    }
}

impl Validate for SizeGrid {
    fn validate_into(&self, path: &str, errors: &mut Vec<ValidationError>) {
        if self.sizes.is_empty() {
            errors.push(ValidationError::new(field(path, "sizes"), "must not be empty"));
        }
        if self.sizes.len() != self.weights.len() {
            errors.push(ValidationError::new(
                field(path, "weights"),
                format!(
                    "length {} differs from sizes length {}",
                    self.weights.len(),
                    self.sizes.len()
                ),
            ));
        }
        for (i, &z) in self.sizes.iter().enumerate() {
            if !(z.is_finite() && z > 0.0) {
                errors.push(ValidationError::new(
                    format!("{}[{i}]", field(path, "sizes")),
                    "size must be finite and > 0",
                ));
            }
        }
        if self.sizes.windows(2).any(|w| w[1] <= w[0]) {
            errors.push(ValidationError::new(
                field(path, "sizes"),
                "sizes must be strictly increasing",
            ));
        }
        for (i, &w) in self.weights.iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                errors.push(ValidationError::new(
                    format!("{}[{i}]", field(path, "weights")),
                    "weight must be finite and >= 0",
                ));
            }
        }
        if !self.weights.is_empty() && self.weights.iter().all(|&w| w <= 0.0) {
            errors.push(ValidationError::new(
                field(path, "weights"),
                "at least one weight must be positive",
            ));
        }
    }
}

/// One side of the liquidity-taker demand: intensity height, size density
/// w.r.t. the size measure and the logistic parameters per size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSide {
    pub lambda_height: f64,
    pub phi: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl DemandSide {
    /// Probability that a request at markup `delta` is accepted.
    pub fn fill_probability(&self, k: usize, delta: f64) -> f64 {
        crate::hamiltonian::logistic(self.a[k], self.b[k], delta)
    }

    fn validate_against(&self, path: &str, grid: &SizeGrid, errors: &mut Vec<ValidationError>) {
        check_positive(path, "lambda_height", self.lambda_height, errors);
        let n = grid.len();
        for (name, v) in [("phi", &self.phi), ("a", &self.a), ("b", &self.b)] {
            if v.len() != n {
                errors.push(ValidationError::new(
                    field(path, name),
                    format!("length {} differs from size grid length {n}", v.len()),
                ));
            }
        }
        for (i, &p) in self.phi.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                errors.push(ValidationError::new(
                    format!("{}[{i}]", field(path, "phi")),
                    "must be finite and >= 0",
                ));
            }
        }
        for (i, &a) in self.a.iter().enumerate() {
            if !a.is_finite() {
                errors.push(ValidationError::new(
                    format!("{}[{i}]", field(path, "a")),
                    "must be finite",
                ));
            }
        }
        for (i, &b) in self.b.iter().enumerate() {
            if !(b.is_finite() && b > 0.0) {
                errors.push(ValidationError::new(
                    format!("{}[{i}]", field(path, "b")),
                    "must be finite and > 0",
                ));
            }
        }
        if self.phi.len() == n && grid.weights.len() == n {
            let mass: f64 = self.phi.iter().zip(&grid.weights).map(|(p, m)| p * m).sum();
            if (mass - 1.0).abs() > SUM_TOL {
                errors.push(ValidationError::new(
                    field(path, "phi"),
                    format!("size density must integrate to 1 against the size measure (got {mass})"),
                ));
            }
        }
    }
}

/// Both sides of the demand. `side01`: the AMM sells currency 1 (receives
/// currency 0). `side10`: the AMM sells currency 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandCurve {
    pub grid: SizeGrid,
    pub side01: DemandSide,
    pub side10: DemandSide,
}

impl DemandCurve {
    pub fn side(&self, side: Side) -> &DemandSide {
        match side {
            Side::ZeroOne => &self.side01,
            Side::OneZero => &self.side10,
        }
    }

    /// Two identical sides with a single size `z` of unit mass.
    pub fn symmetric_single(z: f64, lambda: f64, a: f64, b: f64) -> Self {
        let side = DemandSide {
            lambda_height: lambda,
            phi: vec![1.0],
            a: vec![a],
            b: vec![b],
        };
        Self {
            grid: SizeGrid {
                sizes: vec![z],
                weights: vec![1.0],
            },
            side01: side.clone(),
            side10: side,
        }
    }
}

impl Validate for DemandCurve {
    fn validate_into(&self, path: &str, errors: &mut Vec<ValidationError>) {
        self.grid.validate_into(&field(path, "grid"), errors);
        self.side01
            .validate_against(&field(path, "side01"), &self.grid, errors);
        self.side10
            .validate_against(&field(path, "side10"), &self.grid, errors);
    }
}

/// Trade direction as seen from the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// The AMM sells currency 1 and receives currency 0.
    #[serde(rename = "01")]
    ZeroOne,
    /// The AMM sells currency 0 and receives currency 1.
    #[serde(rename = "10")]
    OneZero,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::ZeroOne, Side::OneZero];

    pub fn label(self) -> &'static str {
        match self {
            Side::ZeroOne => "01",
            Side::OneZero => "10",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::ZeroOne => 0,
            Side::OneZero => 1,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Finite distribution of relative price jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpMeasure {
    pub supports: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Default for JumpMeasure {
    fn default() -> Self {
        Self {
            supports: vec![0.01, -0.01],
            probs: vec![0.5, 0.5],
        }
    }
}

impl JumpMeasure {
    pub fn symmetric(eta: f64) -> Self {
        Self {
            supports: vec![eta, -eta],
            probs: vec![0.5, 0.5],
        }
    }

    pub fn moments(&self) -> JumpMoments {
        jump_moments(self)
    }
}

impl Validate for JumpMeasure {
    fn validate_into(&self, path: &str, errors: &mut Vec<ValidationError>) {
        if self.supports.is_empty() {
            errors.push(ValidationError::new(field(path, "supports"), "must not be empty"));
            return;
        }
        if self.supports.len() != self.probs.len() {
            errors.push(ValidationError::new(
                field(path, "probs"),
                "length differs from supports length",
            ));
            return;
        }
        let mut ok = true;
        for (i, &eta) in self.supports.iter().enumerate() {
            if !eta.is_finite() || eta <= -1.0 {
                ok = false;
                errors.push(ValidationError::new(
                    format!("{}[{i}]", field(path, "supports")),
                    "relative jump must be finite and > -1",
                ));
            } else if eta == 0.0 {
                ok = false;
                errors.push(ValidationError::new(
                    format!("{}[{i}]", field(path, "supports")),
                    "relative jump must be nonzero",
                ));
            }
        }
        for (i, &p) in self.probs.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                ok = false;
                errors.push(ValidationError::new(
                    format!("{}[{i}]", field(path, "probs")),
                    "probability must be finite and >= 0",
                ));
            }
        }
        if !ok {
            return;
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            errors.push(ValidationError::new(
                field(path, "probs"),
                format!("probabilities must sum to 1 (got {total})"),
            ));
        }
        let mean: f64 = self.supports.iter().zip(&self.probs).map(|(e, p)| e * p).sum();
        if mean.abs() > CENTER_TOL {
            errors.push(ValidationError::new(
                field(path, "supports"),
                format!("jump measure not centered (mean {mean:e})"),
            ));
        }
    }
}

/// Moments of a [`JumpMeasure`] that enter the value-function systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpMoments {
    /// Second moment of the relative jump.
    pub eta_bar_sq: f64,
    pub m1_plus: f64,
    pub m1_minus: f64,
    pub m2_plus: f64,
    pub m2_minus: f64,
}

pub fn jump_moments(jumps: &JumpMeasure) -> JumpMoments {
    let mut out = JumpMoments {
        eta_bar_sq: 0.0,
        m1_plus: 0.0,
        m1_minus: 0.0,
        m2_plus: 0.0,
        m2_minus: 0.0,
    };
    for (&eta, &p) in jumps.supports.iter().zip(&jumps.probs) {
        out.eta_bar_sq += p * eta * eta;
        let g = 1.0 + eta;
        if eta > 0.0 {
            out.m1_plus += p * g;
            out.m2_plus += p * g * g;
        } else if eta < 0.0 {
            out.m1_minus += p * g;
            out.m2_minus += p * g * g;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gbm {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HestonBates {
    pub mu: f64,
    pub k: f64,
    pub nu_bar: f64,
    pub xi: f64,
    pub rho: f64,
    pub nu0: f64,
    pub jump_rate: f64,
    pub jumps: JumpMeasure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteinSteinJump {
    pub mu: f64,
    pub k: f64,
    pub sigma_bar: f64,
    pub xi: f64,
    pub rho: f64,
    pub sigma0: f64,
    pub jump_rate: f64,
    pub jumps: JumpMeasure,
}

/// Pure-jump price whose jump intensity is an exponential-kernel Hawkes process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HawkesPrice {
    pub lambda_inf: f64,
    pub beta: f64,
    /// Branching ratio: each jump raises the intensity by `beta * n`.
    pub n: f64,
    pub lambda0: f64,
    pub jumps: JumpMeasure,
}

/// Pure-jump price with intensity `lambda_inf + h + xi^2` (Hawkes part `h`,
/// trend part `xi`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZHawkes {
    pub lambda_inf: f64,
    pub kappa: f64,
    pub omega: f64,
    #[serde(rename = "nH")]
    pub n_h: f64,
    #[serde(rename = "nZ")]
    pub n_z: f64,
    pub h0: f64,
    pub xi0: f64,
    pub jumps: JumpMeasure,
}

impl ZHawkes {
    /// Size of the `xi` kick at each price jump.
    pub fn xi_jump(&self) -> f64 {
        (2.0 * self.n_z * self.omega).sqrt()
    }

    pub fn intensity(&self, h: f64, xi: f64) -> f64 {
        self.lambda_inf + h + xi * xi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PriceModel {
    Gbm(Gbm),
    HestonBates(HestonBates),
    SteinSteinJump(SteinSteinJump),
    HawkesPrice(HawkesPrice),
    ZHawkes(ZHawkes),
}

impl PriceModel {
    pub fn name(&self) -> &'static str {
        match self {
            PriceModel::Gbm(_) => "gbm",
            PriceModel::HestonBates(_) => "heston_bates",
            PriceModel::SteinSteinJump(_) => "stein_stein_jump",
            PriceModel::HawkesPrice(_) => "hawkes_price",
            PriceModel::ZHawkes(_) => "z_hawkes",
        }
    }

    /// Drift of the reference price (the Hawkes-type models are driftless).
    pub fn drift(&self) -> f64 {
        match self {
            PriceModel::Gbm(m) => m.mu,
            PriceModel::HestonBates(m) => m.mu,
            PriceModel::SteinSteinJump(m) => m.mu,
            PriceModel::HawkesPrice(_) | PriceModel::ZHawkes(_) => 0.0,
        }
    }

    pub fn jumps(&self) -> Option<&JumpMeasure> {
        match self {
            PriceModel::Gbm(_) => None,
            PriceModel::HestonBates(m) => Some(&m.jumps),
            PriceModel::SteinSteinJump(m) => Some(&m.jumps),
            PriceModel::HawkesPrice(m) => Some(&m.jumps),
            PriceModel::ZHawkes(m) => Some(&m.jumps),
        }
    }

    /// Initial auxiliary state, in the order used by value surfaces.
    pub fn initial_aux(&self) -> Vec<f64> {
        match self {
            PriceModel::Gbm(_) => vec![],
            PriceModel::HestonBates(m) => vec![m.nu0],
            PriceModel::SteinSteinJump(m) => vec![m.sigma0],
            PriceModel::HawkesPrice(m) => vec![m.lambda0],
            PriceModel::ZHawkes(m) => vec![m.h0, m.xi0],
        }
    }

    /// Instantaneous quadratic-variation rate of `log S` given the auxiliary
    /// state; this is the factor multiplying `Y^2` in the risk penalty.
    pub fn variance_rate(&self, aux: &[f64]) -> f64 {
        match self {
            PriceModel::Gbm(m) => m.sigma * m.sigma,
            PriceModel::HestonBates(m) => {
                aux[0].max(0.0) + m.jump_rate * m.jumps.moments().eta_bar_sq
            }
            PriceModel::SteinSteinJump(m) => {
                aux[0] * aux[0] + m.jump_rate * m.jumps.moments().eta_bar_sq
            }
            PriceModel::HawkesPrice(m) => aux[0] * m.jumps.moments().eta_bar_sq,
            PriceModel::ZHawkes(m) => m.intensity(aux[0], aux[1]) * m.jumps.moments().eta_bar_sq,
        }
    }
}

impl Validate for PriceModel {
    fn validate_into(&self, path: &str, errors: &mut Vec<ValidationError>) {
        match self {
            PriceModel::Gbm(m) => {
                check_finite(path, "mu", m.mu, errors);
                check_nonneg(path, "sigma", m.sigma, errors);
            }
            PriceModel::HestonBates(m) => {
                check_finite(path, "mu", m.mu, errors);
                check_positive(path, "k", m.k, errors);
                check_nonneg(path, "nu_bar", m.nu_bar, errors);
                check_positive(path, "xi", m.xi, errors);
                check_correlation(path, m.rho, errors);
                check_nonneg(path, "nu0", m.nu0, errors);
                check_nonneg(path, "jump_rate", m.jump_rate, errors);
                m.jumps.validate_into(&field(path, "jumps"), errors);
            }
            PriceModel::SteinSteinJump(m) => {
                check_finite(path, "mu", m.mu, errors);
                check_positive(path, "k", m.k, errors);
                check_finite(path, "sigma_bar", m.sigma_bar, errors);
                check_positive(path, "xi", m.xi, errors);
                check_correlation(path, m.rho, errors);
                check_finite(path, "sigma0", m.sigma0, errors);
                check_nonneg(path, "jump_rate", m.jump_rate, errors);
                m.jumps.validate_into(&field(path, "jumps"), errors);
            }
            PriceModel::HawkesPrice(m) => {
                check_positive(path, "lambda_inf", m.lambda_inf, errors);
                check_positive(path, "beta", m.beta, errors);
                if check_finite(path, "n", m.n, errors) && !(m.n > 0.0 && m.n < 1.0) {
                    errors.push(ValidationError::new(field(path, "n"), "must lie in (0, 1)"));
                }
                if check_finite(path, "lambda0", m.lambda0, errors) && m.lambda0 < m.lambda_inf {
                    errors.push(ValidationError::new(
                        field(path, "lambda0"),
                        "initial intensity must be >= lambda_inf",
                    ));
                }
                m.jumps.validate_into(&field(path, "jumps"), errors);
            }
            PriceModel::ZHawkes(m) => {
                check_positive(path, "lambda_inf", m.lambda_inf, errors);
                check_positive(path, "kappa", m.kappa, errors);
                check_positive(path, "omega", m.omega, errors);
                check_positive(path, "n_h", m.n_h, errors);
                check_positive(path, "n_z", m.n_z, errors);
                if m.n_h + m.n_z >= 1.0 {
                    errors.push(ValidationError::new(
                        field(path, "n_h"),
                        "n_h + n_z must be < 1",
                    ));
                }
                check_nonneg(path, "h0", m.h0, errors);
                check_finite(path, "xi0", m.xi0, errors);
                m.jumps.validate_into(&field(path, "jumps"), errors);
            }
        }
    }
}

/// Self-exciting liquidity: each executed trade on a side raises that side's
/// intensity by `kappa * m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HawkesLiquidity {
    pub kappa: f64,
    pub m: f64,
    /// Long-run intensities `[side01, side10]`.
    pub lambda_inf: [f64; 2],
    pub lambda0: [f64; 2],
}

/// Markov-modulated intensities. Regime `r = j01 * p + j10` (0-based,
/// lexicographic) means side01 runs at `levels[j01]`, side10 at `levels[j10]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mmpp {
    pub levels: Vec<f64>,
    pub rate_matrix: Vec<Vec<f64>>,
    pub initial_state: usize,
}

impl Mmpp {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn n_regimes(&self) -> usize {
        self.levels.len() * self.levels.len()
    }

    /// Intensities `(side01, side10)` in regime `r`.
    pub fn intensities(&self, r: usize) -> (f64, f64) {
        let p = self.levels.len();
        (self.levels[r / p], self.levels[r % p])
    }

    pub fn regime_of(&self, j01: usize, j10: usize) -> usize {
        j01 * self.levels.len() + j10
    }

    /// Stationary distribution of the regime chain (solves `pi Q = 0`,
    /// `sum pi = 1` by Gaussian elimination).
    pub fn stationary_distribution(&self) -> Vec<f64> {
        let n = self.n_regimes();
        // Transposed system with the last equation replaced by normalisation.
        let mut m = vec![vec![0.0; n + 1]; n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().take(n).enumerate() {
                *cell = self.rate_matrix[j][i];
            }
        }
        for j in 0..n {
            m[n - 1][j] = 1.0;
        }
        m[n - 1][n] = 1.0;
        crate::linalg::gauss_solve_augmented(&mut m).unwrap_or_else(|| vec![1.0 / n as f64; n])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LiquidityModel {
    Constant,
    HawkesLiquidity(HawkesLiquidity),
    Mmpp(Mmpp),
}

impl Validate for LiquidityModel {
    fn validate_into(&self, path: &str, errors: &mut Vec<ValidationError>) {
        match self {
            LiquidityModel::Constant => {}
            LiquidityModel::HawkesLiquidity(h) => {
                check_positive(path, "kappa", h.kappa, errors);
                if check_finite(path, "m", h.m, errors) && !(h.m > 0.0 && h.m < 1.0) {
                    errors.push(ValidationError::new(field(path, "m"), "must lie in (0, 1)"));
                }
                for s in 0..2 {
                    check_positive(path, &format!("lambda_inf[{s}]"), h.lambda_inf[s], errors);
                    if check_finite(path, &format!("lambda0[{s}]"), h.lambda0[s], errors)
                        && h.lambda0[s] < h.lambda_inf[s]
                    {
                        errors.push(ValidationError::new(
                            format!("{}[{s}]", field(path, "lambda0")),
                            "must be >= lambda_inf",
                        ));
                    }
                }
            }
            LiquidityModel::Mmpp(q) => {
                let p = q.levels.len();
                if p == 0 {
                    errors.push(ValidationError::new(field(path, "levels"), "must not be empty"));
                    return;
                }
                for (i, &l) in q.levels.iter().enumerate() {
                    if !(l.is_finite() && l > 0.0) {
                        errors.push(ValidationError::new(
                            format!("{}[{i}]", field(path, "levels")),
                            "level must be finite and > 0",
                        ));
                    }
                }
                if q.levels.windows(2).any(|w| w[1] <= w[0]) {
                    errors.push(ValidationError::new(
                        field(path, "levels"),
                        "levels must be strictly increasing",
                    ));
                }
                let n = p * p;
                if q.rate_matrix.len() != n || q.rate_matrix.iter().any(|r| r.len() != n) {
                    errors.push(ValidationError::new(
                        field(path, "rate_matrix"),
                        format!("must be {n}x{n} (p^2 regimes in lexicographic order)"),
                    ));
                    return;
                }
                for (i, row) in q.rate_matrix.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        if !v.is_finite() {
                            errors.push(ValidationError::new(
                                format!("{}[{i}][{j}]", field(path, "rate_matrix")),
                                "must be finite",
                            ));
                        } else if i != j && v < 0.0 {
                            errors.push(ValidationError::new(
                                format!("{}[{i}][{j}]", field(path, "rate_matrix")),
                                "off-diagonal rate must be >= 0",
                            ));
                        }
                    }
                    let sum: f64 = row.iter().sum();
                    let scale = row.iter().map(|v| v.abs()).fold(1.0, f64::max);
                    if sum.abs() > SUM_TOL * scale {
                        errors.push(ValidationError::new(
                            format!("{}[{i}]", field(path, "rate_matrix")),
                            format!("rate matrix row sum nonzero ({sum})"),
                        ));
                    }
                }
                if q.initial_state >= n {
                    errors.push(ValidationError::new(
                        field(path, "initial_state"),
                        format!("must be < {n}"),
                    ));
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskParams {
    pub gamma: f64,
    pub horizon: f64,
}

impl Validate for RiskParams {
    fn validate_into(&self, path: &str, errors: &mut Vec<ValidationError>) {
        check_nonneg(path, "gamma", self.gamma, errors);
        check_positive(path, "horizon", self.horizon, errors);
    }
}

/// Reserves, reference price and accumulated markups of the pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolState {
    pub q0: f64,
    pub q1: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "X", default)]
    pub x: f64,
    pub q1_initial: f64,
}

impl PoolState {
    /// Pool starting at the Hodl reference with reserves worth `value` in each currency.
    pub fn balanced(value: f64, s: f64) -> Self {
        Self {
            q0: value,
            q1: value / s,
            s,
            x: 0.0,
            q1_initial: value / s,
        }
    }

    /// Spread to Hodl, `(q1 - q1_initial) * S`.
    pub fn y(&self) -> f64 {
        (self.q1 - self.q1_initial) * self.s
    }

    /// Same pool with the currency-1 reserve moved so that `y() == y`.
    pub fn with_y(mut self, y: f64) -> Self {
        self.q1 = self.q1_initial + y / self.s;
        self
    }
}

impl Validate for PoolState {
    fn validate_into(&self, path: &str, errors: &mut Vec<ValidationError>) {
        check_nonneg(path, "q0", self.q0, errors);
        check_nonneg(path, "q1", self.q1, errors);
        check_positive(path, "S", self.s, errors);
        check_finite(path, "X", self.x, errors);
        check_nonneg(path, "q1_initial", self.q1_initial, errors);
    }
}
