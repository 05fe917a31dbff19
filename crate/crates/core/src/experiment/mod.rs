//! Config-driven experiment runners producing CSV artifacts.
//!
//! Cells are independent and run on a bounded rayon pool; each cell gets
//! its own derived seed, so outputs do not depend on scheduling or on the
//! number of threads.

mod config;

pub use config::{
    locate_key, BiasTableConfig, ExperimentConfig, ModelConfig, PlansConfig, SimulateConfig, ZetaConfig,
};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimand::{theta_g, theta_naive_limit, true_eta};
use crate::estimation::{zeta, Zeta};
use crate::model::{Grid, ModelParams};
use crate::panel::fmt_f64;
use crate::rng::derive_seed;
use crate::sde::{simulate_counterfactual, simulate_panel};

pub const BIAS_TABLE_FILE: &str = "bias_table.csv";
pub const OBSERVED_FILE: &str = "observed.csv";
pub const COUNTERFACTUAL_FILE: &str = "counterfactual.csv";
pub const ZETA_FILE: &str = "zeta.csv";
pub const ZETA_SUMMARY_FILE: &str = "zeta_summary.csv";

pub const BIAS_TABLE_HEADER: &str = "beta11,beta21,beta12,J,theta_g,eta,delta,theta_naive_limit";
pub const ZETA_HEADER: &str = "params_hash,J,beta12,tau_hat,ci_lower,ci_upper,tau_half,zeta,seed,replicate";
pub const ZETA_SUMMARY_HEADER: &str =
    "beta12,J,replicates,median_zeta,zero_fraction,undefined,median_tau_hat";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BiasTable,
    Simulate,
    Zeta,
}

/// Validates `cfg`, runs `cmd` on a pool of `cfg.threads` workers and writes
/// its CSV files into `cfg.out`. Returns the paths written.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let files: Vec<(&str, String)> = pool.install(|| -> Result<_> {
        Ok(match cmd {
            Command::BiasTable => vec![(BIAS_TABLE_FILE, bias_table_csv(&bias_table(cfg)?))],
            Command::Simulate => {
                let (obs, cf) = simulate(cfg)?;
                vec![(OBSERVED_FILE, obs), (COUNTERFACTUAL_FILE, cf)]
            }
            Command::Zeta => {
                let rows = zeta_sweep(cfg)?;
                let summary = zeta_summary(&rows);
                vec![(ZETA_FILE, zeta_csv(&rows)), (ZETA_SUMMARY_FILE, zeta_summary_csv(&summary))]
            }
        })
    })?;
    std::fs::create_dir_all(&cfg.out)?;
    files.into_iter().map(|(name, body)| write_file(&cfg.out, name, &body)).collect()
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub beta11: f64,
    pub beta21: f64,
    pub beta12: f64,
    pub steps: usize,
    pub theta_g: f64,
    pub eta: f64,
    pub delta: f64,
    pub theta_naive_limit: f64,
}

/// Analytic `θ^g_J`, `η` and `δ_J` over the configured sweep, ordered by
/// `β11`, `β21`, `β12`, then `J`.
pub fn bias_table(cfg: &ExperimentConfig) -> Result<Vec<BiasRow>> {
    let bt = &cfg.bias_table;
    let plan = &cfg.plans.star;
    let mut cells = Vec::new();
    for &b11 in &bt.beta11 {
        for &b21 in &bt.beta21 {
            for &b12 in &bt.beta12 {
                cells.push((b11, b21, b12));
            }
        }
    }
    let blocks = cells
        .par_iter()
        .map(|&(b11, b21, b12)| -> Result<Vec<BiasRow>> {
            let params = cfg.model.params_with(Some(b11), Some(b12), Some(b21))?;
            let eta = true_eta(&params, plan)?;
            let limit = theta_naive_limit(&params);
            bt.j.iter()
                .map(|&j| {
                    let tg = theta_g(&params, plan, j)?;
                    Ok(BiasRow {
                        beta11: b11,
                        beta21: b21,
                        beta12: b12,
                        steps: j,
                        theta_g: tg,
                        eta,
                        delta: tg - eta,
                        theta_naive_limit: limit,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.concat())
}

pub fn bias_table_csv(rows: &[BiasRow]) -> String {
    let mut s = format!("{BIAS_TABLE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.beta11),
            fmt_f64(r.beta21),
            fmt_f64(r.beta12),
            r.steps,
            fmt_f64(r.theta_g),
            fmt_f64(r.eta),
            fmt_f64(r.delta),
            fmt_f64(r.theta_naive_limit)
        );
    }
    s
}

/// Observed and counterfactual (`plans.star`) panels as CSV text, on the
/// same grid and with the same master seed.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(String, String)> {
    let params = cfg.model.params()?;
    let grid = Grid::new(cfg.simulate.j, params.horizon)?;
    let obs = simulate_panel(&params, &grid, cfg.simulate.n, cfg.seed)?;
    let cf = simulate_counterfactual(&params, &cfg.plans.star, &grid, cfg.simulate.n, cfg.seed)?;
    Ok((obs.to_csv_string(), cf.to_csv_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZetaRow {
    pub params_hash: String,
    pub steps: usize,
    pub beta12: f64,
    pub tau_hat: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub tau_half: f64,
    pub zeta: Zeta,
    pub seed: u64,
    pub replicate: usize,
}

/// Seed of one `(β12, J, replicate)` cell; `cell` is the position of
/// `(β12, J)` in the sweep.
pub fn cell_seed(master: u64, cell: usize, replicate: usize) -> u64 {
    derive_seed(master, replicate as u64, cell as u64)
}

/// Short stable fingerprint of the model parameters.
pub fn params_hash(p: &ModelParams) -> String {
    let mut h = Sha256::new();
    let m = [p.beta, p.sigma, p.init_cov];
    for v in m.iter().flat_map(|m| m.rows().into_iter().flatten()).chain(p.init_mean).chain([p.horizon]) {
        h.update(v.to_le_bytes());
    }
    h.finalize()[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// One simulated panel, bootstrap interval and half-grid estimate per
/// `(β12, J, replicate)`, ordered by `β12`, `J`, then replicate.
pub fn zeta_sweep(cfg: &ExperimentConfig) -> Result<Vec<ZetaRow>> {
    let z = &cfg.zeta;
    let mut jobs = Vec::new();
    for (bi, &b12) in z.beta12.iter().enumerate() {
        for (ji, &j) in z.j.iter().enumerate() {
            for r in 0..z.replicates {
                jobs.push((b12, j, bi * z.j.len() + ji, r));
            }
        }
    }
    jobs.par_iter()
        .map(|&(b12, j, cell, r)| {
            let params = cfg.model.params_with(None, Some(b12), None)?;
            let seed = cell_seed(cfg.seed, cell, r);
            let grid = Grid::new(j, params.horizon)?;
            let panel = simulate_panel(&params, &grid, z.n, seed)?;
            let rep = zeta(&panel, &cfg.plans.star, &cfg.plans.base, z.bootstrap, z.alpha, seed)?;
            Ok(ZetaRow {
                params_hash: params_hash(&params),
                steps: j,
                beta12: b12,
                tau_hat: rep.tau_hat,
                ci_lower: rep.ci_lower,
                ci_upper: rep.ci_upper,
                tau_half: rep.tau_hat_half,
                zeta: rep.zeta,
                seed,
                replicate: r,
            })
        })
        .collect()
}

pub fn zeta_csv(rows: &[ZetaRow]) -> String {
    let mut s = format!("{ZETA_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.params_hash,
            r.steps,
            fmt_f64(r.beta12),
            fmt_f64(r.tau_hat),
            fmt_f64(r.ci_lower),
            fmt_f64(r.ci_upper),
            fmt_f64(r.tau_half),
            r.zeta,
            r.seed,
            r.replicate
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZetaSummary {
    pub beta12: f64,
    pub steps: usize,
    pub replicates: usize,
    /// Undefined ζ values sort above every finite value; the median is
    /// infinite only if they make up the upper half.
    pub median_zeta: f64,
    pub zero_fraction: f64,
    pub undefined: usize,
    pub median_tau_hat: f64,
}

/// Aggregates consecutive rows sharing `(β12, J)`.
pub fn zeta_summary(rows: &[ZetaRow]) -> Vec<ZetaSummary> {
    rows.chunk_by(|a, b| a.beta12 == b.beta12 && a.steps == b.steps)
        .map(|cell| {
            let mut z: Vec<f64> = cell.iter().map(|r| r.zeta.sort_key()).collect();
            let mut tau: Vec<f64> = cell.iter().map(|r| r.tau_hat).collect();
            z.sort_by(f64::total_cmp);
            tau.sort_by(f64::total_cmp);
            ZetaSummary {
                beta12: cell[0].beta12,
                steps: cell[0].steps,
                replicates: cell.len(),
                median_zeta: median_sorted(&z),
                zero_fraction: z.iter().filter(|&&v| v == 0.0).count() as f64 / z.len() as f64,
                undefined: cell.iter().filter(|r| r.zeta == Zeta::UndefinedDenominator).count(),
                median_tau_hat: median_sorted(&tau),
            }
        })
        .collect()
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn zeta_summary_csv(rows: &[ZetaSummary]) -> String {
    let mut s = format!("{ZETA_SUMMARY_HEADER}\n");
    for r in rows {
        let median = if r.median_zeta.is_finite() { fmt_f64(r.median_zeta) } else { "undefined".into() };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_f64(r.beta12),
            r.steps,
            r.replicates,
            median,
            fmt_f64(r.zero_fraction),
            r.undefined,
            fmt_f64(r.median_tau_hat)
        );
    }
    s
}
