//! Scaling studies and the discount-grid sweep.
//!
//! Each benchmark row generates a random instance, runs one discarded
//! warm-up optimization and then one timed run (monotonic clock, float
//! mode). Rows run in parallel; output order is deterministic.
//!
//! Seeds: RQ1 and RQ3 rows use the given seed as is (RQ3 therefore
//! varies only the discounts of one instance); RQ2 rows add the position
//! in the principal list so repeated counts get distinct instances.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gen::random::{random_mdp, DiscountScheme, RandomMdpConfig};
use crate::model::AsymMdp;
use crate::numeric::{format_rational, format_sig, int, parse_rational, rational, NumericMode, Rational, Scalar};
use crate::oracle::{enumerate_counting, DEFAULT_CAP};
use crate::strategy::CountingStrategy;
use crate::welfare::{optimize, WelfareConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub config: RandomMdpConfig,
    /// `λ0/λ1` for RQ3 rows.
    pub ratio: Option<Rational>,
    pub kappa: Option<u64>,
    pub social_welfare: Option<f64>,
    pub wall_time_total: f64,
    pub wall_time_longterm: f64,
    pub wall_time_unroll: f64,
    pub strategy: Option<CountingStrategy>,
    pub error: Option<String>,
}

pub const BENCH_HEADER: [&str; 11] = [
    "states",
    "actions",
    "principals",
    "ratio",
    "seed",
    "kappa",
    "social_welfare",
    "wall_time_total_s",
    "wall_time_longterm_s",
    "wall_time_unroll_s",
    "status",
];

impl BenchRow {
    pub fn record(&self) -> Vec<String> {
        let c = &self.config;
        vec![
            c.num_states.to_string(),
            c.actions_per_state.to_string(),
            c.num_principals.to_string(),
            self.ratio.as_ref().map(|r| format_sig(r.to_f64(), 9)).unwrap_or_default(),
            c.seed.to_string(),
            self.kappa.map(|k| k.to_string()).unwrap_or_default(),
            self.social_welfare.map(|x| format_sig(x, 9)).unwrap_or_default(),
            format_sig(self.wall_time_total, 9),
            format_sig(self.wall_time_longterm, 9),
            format_sig(self.wall_time_unroll, 9),
            self.error.clone().unwrap_or_else(|| "ok".into()),
        ]
    }

    /// Rebuilds the benchmarked instance.
    pub fn instance(&self) -> Result<AsymMdp> {
        random_mdp(&self.config)
    }
}

fn write_csv(header: &[&str], records: impl Iterator<Item = Vec<String>>, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bench_csv(rows: &[BenchRow], out: impl Write) -> csv::Result<()> {
    write_csv(&BENCH_HEADER, rows.iter().map(BenchRow::record), out)
}

fn run_row(config: RandomMdpConfig, ratio: Option<Rational>, start: usize) -> BenchRow {
    let mut row = BenchRow {
        config,
        ratio,
        kappa: None,
        social_welfare: None,
        wall_time_total: 0.0,
        wall_time_longterm: 0.0,
        wall_time_unroll: 0.0,
        strategy: None,
        error: None,
    };
    let outcome = random_mdp(&row.config).and_then(|model| {
        let mdp = model.numeric::<f64>();
        let cfg = WelfareConfig::float();
        optimize(&mdp, &cfg)?;
        let t = Instant::now();
        let out = optimize(&mdp, &cfg)?;
        Ok((out, t.elapsed()))
    });
    match outcome {
        Ok((out, total)) => {
            row.kappa = Some(out.kappa.kappa);
            row.social_welfare = Some(out.report(start).social_welfare);
            row.wall_time_total = total.as_secs_f64();
            row.wall_time_longterm = out.timings.longterm.as_secs_f64();
            row.wall_time_unroll = out.timings.unroll.as_secs_f64();
            row.strategy = Some(out.strategy);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// `n` evenly spaced, rounded state counts from 2 to 2000.
pub fn rq1_default_states(n: usize) -> Vec<usize> {
    if n <= 1 {
        return vec![2; n];
    }
    (0..n).map(|k| (2.0 + k as f64 * 1998.0 / (n - 1) as f64).round() as usize).collect()
}

/// Varying state counts, 2 actions, discounts (0.9, 0.3).
pub fn run_rq1(states: &[usize], seeds: &[u64]) -> Vec<BenchRow> {
    let mut jobs: Vec<(usize, u64)> = states.iter().flat_map(|&s| seeds.iter().map(move |&seed| (s, seed))).collect();
    jobs.sort();
    jobs.into_par_iter()
        .map(|(n, seed)| {
            let scheme = DiscountScheme::Explicit(vec![rational(9, 10), rational(3, 10)]);
            run_row(RandomMdpConfig::new(n, 2, scheme, 2, seed), None, 0)
        })
        .collect()
}

/// Varying principal counts on 30 states with progression discounts.
pub fn run_rq2(principals: &[usize], seed: u64) -> Vec<BenchRow> {
    let mut rows: Vec<BenchRow> = principals
        .par_iter()
        .enumerate()
        .map(|(i, &p)| run_row(RandomMdpConfig::new(30, 2, DiscountScheme::progression(), p, seed + i as u64), None, 0))
        .collect();
    rows.sort_by_key(|r| (r.config.num_principals, r.config.seed));
    rows
}

/// Varying `λ0/λ1` with `λ0 = 0.9` on one 30-state instance per seed.
pub fn run_rq3(ratios: &[Rational], seeds: &[u64]) -> Vec<BenchRow> {
    let lambda0 = rational(9, 10);
    let jobs: Vec<(Rational, u64)> = seeds
        .iter()
        .flat_map(|&seed| ratios.iter().map(move |r| (r.clone(), seed)))
        .collect();
    jobs.into_par_iter()
        .map(|(ratio, seed)| {
            let lambda1 = &lambda0 / &ratio;
            let scheme = DiscountScheme::Explicit(vec![lambda0.clone(), lambda1.clone()]);
            let config = RandomMdpConfig::new(30, 2, scheme, 2, seed);
            if ratio <= int(1) || lambda1 >= int(1) {
                return BenchRow {
                    config,
                    ratio: Some(ratio.clone()),
                    kappa: None,
                    social_welfare: None,
                    wall_time_total: 0.0,
                    wall_time_longterm: 0.0,
                    wall_time_unroll: 0.0,
                    strategy: None,
                    error: Some(format!("ratio {} must exceed 1", format_rational(&ratio))),
                };
            }
            run_row(config, Some(ratio), 0)
        })
        .collect()
}

/// `n` ratios spaced geometrically from 1.32 to 16, rounded to 1/100.
pub fn rq3_default_ratios(n: usize) -> Vec<Rational> {
    if n <= 1 {
        return vec![rational(132, 100); n];
    }
    let (lo, hi) = (1.32f64, 16.0f64);
    (0..n)
        .map(|k| {
            let x = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
            rational((x * 100.0).round() as i64, 100)
        })
        .collect()
}

/// An inclusive arithmetic grid `start:end:step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub start: Rational,
    pub end: Rational,
    pub step: Rational,
}

impl Grid {
    pub fn values(&self) -> Vec<Rational> {
        let mut out = Vec::new();
        let mut x = self.start.clone();
        while x <= self.end {
            out.push(x.clone());
            x += &self.step;
        }
        out
    }
}

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected start:end:step, got `{s}`"));
        }
        let start = parse_rational(parts[0])?;
        let end = parse_rational(parts[1])?;
        let step = parse_rational(parts[2])?;
        if step <= int(0) {
            return Err("grid step must be positive".into());
        }
        Ok(Grid { start, end, step })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Solved {
        kappa: u64,
        waiting_time: usize,
        prefix_signature: String,
        social_welfare: f64,
        /// `enumerate_counting` optimum at the cross-check horizon.
        oracle_welfare: Option<f64>,
    },
    Empty,
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub alpha: Rational,
    pub beta: Rational,
    pub outcome: CellOutcome,
}

pub const SWEEP_HEADER: [&str; 8] = [
    "alpha",
    "beta",
    "kappa",
    "waiting_time",
    "prefix_signature",
    "social_welfare",
    "oracle_welfare",
    "status",
];

impl SweepCell {
    pub fn record(&self) -> Vec<String> {
        let mut r = vec![format_sig(self.alpha.to_f64(), 9), format_sig(self.beta.to_f64(), 9)];
        match &self.outcome {
            CellOutcome::Solved {
                kappa,
                waiting_time,
                prefix_signature,
                social_welfare,
                oracle_welfare,
            } => r.extend([
                kappa.to_string(),
                waiting_time.to_string(),
                prefix_signature.clone(),
                format_sig(*social_welfare, 9),
                oracle_welfare.map(|w| format_sig(w, 9)).unwrap_or_default(),
                "ok".into(),
            ]),
            CellOutcome::Empty => r.extend(["", "", "", "", ""].map(String::from).into_iter().chain(["empty".into()])),
            CellOutcome::Failed { error } => r.extend(["", "", "", "", ""].map(String::from).into_iter().chain([error.clone()])),
        }
        r
    }
}

pub fn write_sweep_csv(cells: &[SweepCell], out: impl Write) -> csv::Result<()> {
    write_csv(&SWEEP_HEADER, cells.iter().map(SweepCell::record), out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub start: usize,
    pub mode: NumericMode,
    pub max_kappa: u64,
    /// Horizon of the `enumerate_counting` cross-check; `None` skips it.
    pub oracle_horizon: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            start: 0,
            mode: NumericMode::float(),
            max_kappa: crate::welfare::DEFAULT_MAX_KAPPA,
            oracle_horizon: None,
        }
    }
}

fn solve_cell<T: Scalar>(model: &AsymMdp, cfg: &SweepConfig) -> Result<CellOutcome> {
    let mdp = model.numeric::<T>();
    let wcfg = WelfareConfig {
        max_kappa: cfg.max_kappa,
        ..WelfareConfig::new(cfg.mode)
    };
    let out = optimize(&mdp, &wcfg)?;
    let path = out.strategy.likely_path(model, cfg.start, out.strategy.kappa);
    let waiting_time = out.strategy.waiting_time(model, cfg.start);
    let prefix_signature = path[..waiting_time]
        .iter()
        .map(|&(s, a)| model.action_name(s, a))
        .collect::<Vec<_>>()
        .join(" ");
    let oracle_welfare = match cfg.oracle_horizon {
        Some(h) => Some(enumerate_counting(&mdp, cfg.start, h, DEFAULT_CAP)?.best_welfare.to_f64()),
        None => None,
    };
    Ok(CellOutcome::Solved {
        kappa: out.kappa.kappa,
        waiting_time,
        prefix_signature,
        social_welfare: out.report(cfg.start).social_welfare.to_f64(),
        oracle_welfare,
    })
}

/// Optimizes a two-principal model for every `(α, β)` grid cell with
/// `α > β`, recording κ, the waiting time (leading steps on the most
/// likely path that differ from the tail) and welfare. Cells are sorted
/// by `(α, β)`.
pub fn sweep_discounts(model: &AsymMdp, alpha: &Grid, beta: &Grid, cfg: &SweepConfig) -> Result<Vec<SweepCell>> {
    if model.num_principals() != 2 {
        return Err(Error::WrongArity {
            expected: 2,
            found: model.num_principals(),
        });
    }
    let cells: Vec<(Rational, Rational)> = alpha
        .values()
        .into_iter()
        .flat_map(|a| beta.values().into_iter().map(move |b| (a.clone(), b)))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(a, b)| {
            let zero = int(0);
            let one = int(1);
            let outcome = if a <= b || b <= zero || a >= one {
                CellOutcome::Empty
            } else {
                let run = model.with_discounts(&[a.clone(), b.clone()]).and_then(|m| {
                    if cfg.mode.is_exact() {
                        solve_cell::<Rational>(&m, cfg)
                    } else {
                        solve_cell::<f64>(&m, cfg)
                    }
                });
                run.unwrap_or_else(|e| CellOutcome::Failed { error: e.to_string() })
            };
            SweepCell {
                alpha: a,
                beta: b,
                outcome,
            }
        })
        .collect())
}
