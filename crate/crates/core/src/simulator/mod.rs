//! Monte Carlo verification of quoting policies.
//!
//! Every path owns three ChaCha8 streams (price, trade requests, liquidity)
//! keyed by `(seed, path)`, so an episode is reproducible bit for bit and two
//! policies run on the same seed see the same prices and liquidity regimes
//! (common random numbers). Paths run in parallel; results are collected in
//! path order and reduced with pairwise summation, so estimates do not depend
//! on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::pairwise_sum;
use crate::quoting::QuotePolicy;

mod episode;
mod price;

pub use episode::{simulate_episode, write_episode_log, EpisodeResult, RngSpec, SimSetup, TradeRecord};
pub use price::{simulate_price, PricePath};

/// Normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub ci95: [f64; 2],
}

impl SampleStats {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                stderr: f64::NAN,
                ci95: [f64::NAN; 2],
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let stderr = if n > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            n,
            mean,
            stderr,
            ci95: [mean - Z95 * stderr, mean + Z95 * stderr],
        }
    }

    pub fn ci_contains(&self, x: f64) -> bool {
        self.ci95[0] <= x && x <= self.ci95[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEstimate {
    pub policy: String,
    pub mean: f64,
    pub stderr: f64,
    pub ci95: [f64; 2],
    /// Rejected requests over requests that passed thinning.
    pub rejected_rate: f64,
    pub n_paths: usize,
    pub mean_excess_pnl: f64,
    pub max_accounting_gap: f64,
}

/// Runs paths `0..n_paths` of `seed` in parallel, in path order.
pub fn run_episodes(
    policy: &QuotePolicy,
    setup: &SimSetup,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<EpisodeResult>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|path| simulate_episode(policy, setup, RngSpec { seed, path }))
        .collect()
}

/// Reduces finished episodes of `policy` to an estimate.
pub fn summarize(policy: &QuotePolicy, episodes: &[EpisodeResult]) -> ObjectiveEstimate {
    let obj: Vec<f64> = episodes.iter().map(|e| e.objective).collect();
    let pnl: Vec<f64> = episodes.iter().map(|e| e.excess_pnl).collect();
    let st = SampleStats::of(&obj);
    let requests: u64 = episodes.iter().map(|e| e.requests).sum();
    let rejected: u64 = episodes.iter().map(|e| e.rejected_trades).sum();
    ObjectiveEstimate {
        policy: policy.name.clone(),
        mean: st.mean,
        stderr: st.stderr,
        ci95: st.ci95,
        rejected_rate: if requests > 0 { rejected as f64 / requests as f64 } else { 0.0 },
        n_paths: episodes.len(),
        mean_excess_pnl: pairwise_sum(&pnl) / pnl.len().max(1) as f64,
        max_accounting_gap: episodes.iter().map(|e| e.accounting_gap()).fold(0.0, f64::max),
    }
}

/// Mean penalized objective with its standard error and 95% interval.
pub fn estimate_objective(
    policy: &QuotePolicy,
    setup: &SimSetup,
    n_paths: usize,
    seed: u64,
) -> Result<ObjectiveEstimate> {
    if n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be >= 1".into()));
    }
    let episodes = run_episodes(policy, setup, n_paths, seed)?;
    Ok(summarize(policy, &episodes))
}

/// Paired difference `first - second` of two policies' objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub first: String,
    pub second: String,
    pub mean_diff: f64,
    pub stderr: f64,
    pub ci95: [f64; 2],
}

impl PairComparison {
    /// The first policy is better with the 95% interval excluding zero.
    pub fn first_wins(&self) -> bool {
        self.ci95[0] > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub estimates: Vec<ObjectiveEstimate>,
    /// Every ordered pair `(i, j)` with `i < j`.
    pub pairs: Vec<PairComparison>,
}

impl Comparison {
    /// Policy names ranked by mean objective, best first.
    pub fn ranking(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.estimates.len()).collect();
        idx.sort_by(|&a, &b| self.estimates[b].mean.total_cmp(&self.estimates[a].mean));
        idx.into_iter().map(|i| self.estimates[i].policy.as_str()).collect()
    }
}

/// Runs every policy on the same seed (common random numbers) and reports
/// paired differences for every pair.
pub fn compare_policies(
    policies: &[QuotePolicy],
    setup: &SimSetup,
    n_paths: usize,
    seed: u64,
) -> Result<Comparison> {
    if policies.len() < 2 {
        return Err(Error::InvalidInput("compare needs at least two policies".into()));
    }
    if n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be >= 1".into()));
    }
    let runs: Vec<Vec<EpisodeResult>> = policies
        .iter()
        .map(|p| run_episodes(p, setup, n_paths, seed))
        .collect::<Result<_>>()?;
    let estimates = policies.iter().zip(&runs).map(|(p, r)| summarize(p, r)).collect();
    let mut pairs = Vec::new();
    for i in 0..policies.len() {
        for j in i + 1..policies.len() {
            let d: Vec<f64> = runs[i]
                .iter()
                .zip(&runs[j])
                .map(|(a, b)| a.objective - b.objective)
                .collect();
            let st = SampleStats::of(&d);
            pairs.push(PairComparison {
                first: policies[i].name.clone(),
                second: policies[j].name.clone(),
                mean_diff: st.mean,
                stderr: st.stderr,
                ci95: st.ci95,
            });
        }
    }
    Ok(Comparison { estimates, pairs })
}
