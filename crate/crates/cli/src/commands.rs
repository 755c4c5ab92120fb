use std::fmt;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::time::Instant;

use ammq_core::config::{self, Config, Solution, SolveTarget};
use ammq_core::quoting::{build_quote_table, write_quote_csv, QuotePolicy};
use ammq_core::simulator::{compare_policies, run_episodes, summarize, write_episode_log};
use ammq_core::{Error, ValueSurface};
use log::{info, warn};
use serde_json::json;

use crate::output::{create, ensure_dir, write_json, RunManifest};

#[derive(Debug)]
pub enum CliError {
    User(String),
    Core(Error),
}

impl CliError {
    /// 1 for bad input, 2 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub struct Context {
    pub config_path: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
}

impl Context {
    fn load(&self) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(&self.config_path)
            .map_err(|e| CliError::User(format!("cannot read {}: {e}", self.config_path.display())))?;
        let mut cfg = Config::from_json(&text)?;
        if let Some(s) = self.seed {
            cfg.simulation.seed = s;
        }
        if let Some(n) = self.paths {
            if n == 0 {
                return Err(CliError::User("--paths must be >= 1".into()));
            }
            cfg.simulation.n_paths = n;
        }
        Ok(cfg)
    }

    fn manifest(&self, command: &str, cfg: Option<&Config>, start: Instant) -> Result<(), CliError> {
        let sim = cfg.map(|c| &c.simulation);
        write_json(
            &self.out,
            "manifest.json",
            &RunManifest {
                config_path: self.config_path.clone(),
                command: command.into(),
                output_dir: self.out.clone(),
                seed: sim.map(|s| s.seed),
                n_paths: sim.map(|s| s.n_paths),
                tool_version: env!("CARGO_PKG_VERSION"),
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            },
        )
    }
}

fn flush(mut w: impl Write) -> Result<(), CliError> {
    w.flush().map_err(Error::from)?;
    Ok(())
}

pub fn validate(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.load()?;
    let target = SolveTarget::for_config(&cfg).map(|t| t.name()).unwrap_or("none");
    println!("ok: {} price, default solve target {target}", cfg.price_model.name());
    Ok(())
}

pub fn solve(ctx: &Context, model: Option<&str>) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = ctx.load()?;
    let target = match model {
        None => SolveTarget::for_config(&cfg)?,
        Some(m) => SolveTarget::parse(m).ok_or_else(|| {
            let names: Vec<_> = SolveTarget::ALL.iter().map(|t| t.name()).collect();
            CliError::User(format!("unknown model {m:?}; expected one of {}", names.join(", ")))
        })?,
    };
    info!("solving {}", target.name());
    let solution = config::solve(&cfg, Some(target))?;
    ensure_dir(&ctx.out)?;
    match &solution {
        Solution::Surface(s) => {
            let mut w = create(&ctx.out, "surface.csv")?;
            s.write_csv(&mut w)?;
            flush(w)?;
            let mut w = create(&ctx.out, "surface.bin")?;
            s.write_binary(&mut w)?;
            flush(w)?;
            write_json(
                &ctx.out,
                "diagnostics.json",
                &json!({ "model": target.name(), "kind": s.kind, "diagnostics": s.diagnostics }),
            )?;
        }
        Solution::Theta { theta, cost } => {
            let mut w = create(&ctx.out, "theta.csv")?;
            theta.write_csv(&mut w)?;
            flush(w)?;
            write_json(
                &ctx.out,
                "diagnostics.json",
                &json!({ "model": target.name(), "kind": theta.kind, "diagnostics": theta.diagnostics, "cost": cost }),
            )?;
            if let Some(c) = cost {
                write_json(&ctx.out, "cost.json", c)?;
            }
        }
    }
    ctx.manifest("solve", Some(&cfg), start)
}

pub fn quote_table(ctx: &Context, surface: Option<PathBuf>) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = ctx.load()?;
    let table = cfg
        .quote_table
        .clone()
        .ok_or_else(|| CliError::User("configuration has no quote_table section".into()))?;
    let policy = match surface.or(table.surface.clone()) {
        Some(path) => {
            let f = std::fs::File::open(&path)
                .map_err(|e| CliError::User(format!("cannot open {}: {e}", path.display())))?;
            QuotePolicy::from_surface(ValueSurface::read_binary(BufReader::new(f))?, cfg.demand.clone())
        }
        None => config::solve(&cfg, None)?.policy(cfg.demand.clone()),
    }
    .strict();
    let rows = build_quote_table(&policy, table.t, &table.ys, &table.states)?;
    ensure_dir(&ctx.out)?;
    let mut w = create(&ctx.out, "quotes.csv")?;
    write_quote_csv(&rows, &mut w)?;
    flush(w)?;
    ctx.manifest("quote-table", Some(&cfg), start)
}

fn policies(cfg: &Config) -> Result<Vec<QuotePolicy>, CliError> {
    let mut optimal = None;
    let ps = cfg
        .simulation
        .policies
        .iter()
        .map(|spec| config::build_policy(cfg, spec, &mut optimal))
        .collect::<Result<Vec<_>, _>>()?;
    if ps.is_empty() {
        return Err(CliError::User("simulation.policies is empty".into()));
    }
    Ok(ps)
}

fn report_clamps(p: &QuotePolicy) {
    let n = p.clamped_lookups();
    if n > 0 {
        warn!("policy {}: {n} quote lookups clamped into the state grid", p.name);
    }
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = ctx.load()?;
    let setup = cfg.sim_setup();
    let (n, seed) = (cfg.simulation.n_paths, cfg.simulation.seed);
    ensure_dir(&ctx.out)?;
    let mut summaries = Vec::new();
    for (i, p) in policies(&cfg)?.iter().enumerate() {
        let episodes = run_episodes(p, &setup, n, seed)?;
        let est = summarize(p, &episodes);
        info!("{}: mean {:.6} ± {:.6}", est.policy, est.mean, est.stderr);
        if est.rejected_rate > 0.01 {
            warn!("policy {}: {:.2}% of requests rejected for depletion", est.policy, 100.0 * est.rejected_rate);
        }
        report_clamps(p);
        if cfg.simulation.episode_log {
            let mut w = create(&ctx.out, &format!("episodes_{i}.csv"))?;
            for (path, e) in episodes.iter().enumerate() {
                write_episode_log(path as u64, e, &mut w, path == 0)?;
            }
            flush(w)?;
        }
        summaries.push(est);
    }
    write_json(&ctx.out, "summary.json", &summaries)?;
    ctx.manifest("simulate", Some(&cfg), start)
}

pub fn compare(ctx: &Context) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = ctx.load()?;
    let ps = policies(&cfg)?;
    if ps.len() < 2 {
        return Err(CliError::User("compare needs at least two entries in simulation.policies".into()));
    }
    let c = compare_policies(&ps, &cfg.sim_setup(), cfg.simulation.n_paths, cfg.simulation.seed)?;
    ps.iter().for_each(report_clamps);
    for pair in &c.pairs {
        info!(
            "{} - {}: {:.6} [{:.6}, {:.6}]",
            pair.first, pair.second, pair.mean_diff, pair.ci95[0], pair.ci95[1]
        );
    }
    ensure_dir(&ctx.out)?;
    write_json(&ctx.out, "comparison.json", &json!({ "ranking": c.ranking(), "estimates": c.estimates, "pairs": c.pairs }))?;
    ctx.manifest("compare", Some(&cfg), start)
}
