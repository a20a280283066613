//! Command-line front end.
//!
//! Exit codes: 0 on success (including a negative threshold answer),
//! 1 on domain errors, 2 on usage errors.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bench::{
    rq1_default_states, rq3_default_ratios, run_rq1, run_rq2, run_rq3, sweep_discounts, write_bench_csv,
    write_sweep_csv, BenchRow, CellOutcome, Grid, SweepConfig,
};
use crate::error::Error;
use crate::eval::{eval_counting, eval_positional, eval_stationary_mixed, Payoffs};
use crate::gen::random::{random_mdp, DiscountScheme, RandomMdpConfig};
use crate::gen::sat::{decode_assignment, parse_dimacs, sat_reduction, zero_sum_variant, CnfFormula};
use crate::gen::{badly_spaced, builtin};
use crate::model::format::{self, Document};
use crate::model::{AsymMdp, NumericMdp};
use crate::numeric::{parse_rational, NumericMode, Rational, Scalar};
use crate::oracle::{counting_dp, enumerate_counting, enumerate_positional, threshold_decide_positional, DEFAULT_CAP};
use crate::solve::{solve_discounted, Method, SolveConfig};
use crate::strategy::{Strategy, StrategyRecord};
use crate::welfare::{optimize, WelfareConfig, WelfareReport, DEFAULT_MAX_KAPPA};

#[derive(Debug, Parser)]
#[command(name = "mdpwf", version, about = "Welfare-optimal strategies for asymmetrically discounted MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Exact rational arithmetic instead of binary64.
    #[arg(long)]
    exact: bool,
    /// Structured JSON output.
    #[arg(long)]
    json: bool,
}

impl Common {
    fn mode(&self) -> NumericMode {
        if self.exact {
            NumericMode::Exact
        } else {
            NumericMode::float()
        }
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model file for structural and probabilistic errors.
    Validate {
        /// Model file, or `-` for stdin.
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Report how far apart consecutive discount factors are.
    Spacing {
        file: PathBuf,
        #[arg(long)]
        bound: String,
        #[command(flatten)]
        common: Common,
    },
    /// Solve the MDP for one principal alone.
    Solve {
        file: PathBuf,
        /// Principal index or name.
        #[arg(long)]
        principal: String,
        #[arg(long, default_value = "pi")]
        method: Method,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compute a welfare-optimal counting strategy.
    Optimize {
        file: PathBuf,
        /// Report only this start state.
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        slack: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MAX_KAPPA)]
        max_kappa: u64,
        /// Write the strategy record here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-start report here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a positional, mixed or counting strategy.
    Eval {
        file: PathBuf,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long)]
        start: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Brute-force search over positional or counting strategies.
    Oracle {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "positional")]
        mode: OracleMode,
        /// Prefix length for counting search.
        #[arg(long, default_value_t = 4)]
        horizon: usize,
        #[arg(long)]
        start: Option<String>,
        /// A number, or `auto` to use the threshold stored with a reduction.
        #[arg(long)]
        threshold: Option<String>,
        /// Largest number of candidates to enumerate.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
        /// Counting search by per-tail dynamic programming.
        #[arg(long)]
        dp: bool,
        /// Force binary64 even when a threshold is given.
        #[arg(long, conflicts_with = "exact")]
        float: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Generate model files.
    Gen {
        #[command(subcommand)]
        what: GenCommand,
        /// Output file (stdout if omitted).
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Scaling studies.
    Bench {
        #[command(subcommand)]
        which: BenchCommand,
    },
    /// Optimize over a grid of two discount factors.
    Sweep {
        file: PathBuf,
        /// `start:end:step`
        #[arg(long)]
        alpha: Grid,
        #[arg(long)]
        beta: Grid,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        start: Option<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_KAPPA)]
        max_kappa: u64,
        /// Cross-check every cell against counting enumeration up to this horizon.
        #[arg(long)]
        oracle_horizon: Option<usize>,
        #[arg(long)]
        exact: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleMode {
    Positional,
    Counting,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeKind {
    /// Arithmetic progression between --hi and --lo.
    Ap,
    /// Explicit list given by --discounts.
    List,
}

#[derive(Debug, Subcommand)]
enum GenCommand {
    /// A hand-transcribed example.
    Builtin { name: String },
    /// A seeded random instance.
    Random {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long)]
        principals: usize,
        #[arg(long, value_enum, default_value = "ap")]
        scheme: SchemeKind,
        #[arg(long, value_delimiter = ',')]
        discounts: Vec<String>,
        #[arg(long, default_value = "0.99")]
        hi: String,
        #[arg(long, default_value = "0.05")]
        lo: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// The badly spaced family.
    B1 {
        #[arg(long)]
        n: u32,
    },
    /// Reduction from a 3-CNF formula in DIMACS format.
    Sat {
        /// DIMACS file, or `-` for stdin.
        file: PathBuf,
        #[arg(long)]
        zero_sum: bool,
    },
}

#[derive(Debug, Args)]
struct BenchOutput {
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// CSV destination (stdout if omitted).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Varying number of states.
    Rq1 {
        #[arg(long, value_delimiter = ',')]
        states: Vec<usize>,
        #[command(flatten)]
        out: BenchOutput,
    },
    /// Varying number of principals.
    Rq2 {
        #[arg(long, value_delimiter = ',')]
        principals: Vec<usize>,
        #[command(flatten)]
        out: BenchOutput,
    },
    /// Varying discount ratio.
    Rq3 {
        #[arg(long, value_delimiter = ',')]
        ratios: Vec<String>,
        #[command(flatten)]
        out: BenchOutput,
    },
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(Error::io("<output>", e))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Domain(Error::Parse(format!("csv: {e}")))
    }
}

type CmdResult = std::result::Result<(), Failure>;

struct Io<'a> {
    stdin: &'a mut dyn Read,
    out: &'a mut dyn Write,
}

impl Io<'_> {
    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        if path == Path::new("-") {
            let mut s = String::new();
            self.stdin.read_to_string(&mut s)?;
            Ok(s)
        } else {
            Ok(format::read_text(path)?)
        }
    }

    fn document(&mut self, path: &Path, mode: NumericMode) -> Result<Document, Failure> {
        let text = self.read(path)?;
        Ok(format::parse(&text, mode)?)
    }
}

/// Caps the global worker pool at `MDPWF_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("MDPWF_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(stderr, "{text}");
                    2
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    2
                }
            };
        }
    };
    let mut io = Io { stdin, out: stdout };
    match dispatch(cli.command, &mut io) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}\n\nUsage: mdpwf <COMMAND>\nFor more information, try '--help'.");
            2
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command, io: &mut Io) -> CmdResult {
    match cmd {
        Command::Validate { file, common } => validate(io, &file, &common),
        Command::Spacing { file, bound, common } => spacing(io, &file, &bound, &common),
        Command::Solve {
            file,
            principal,
            method,
            csv,
            common,
        } => {
            let doc = io.document(&file, common.mode())?;
            let i = principal_index(&doc.model, &principal)?;
            let cfg = SolveConfig {
                method,
                ..SolveConfig::default()
            };
            if common.exact {
                solve_cmd::<Rational>(io, &doc.model, i, &cfg, csv.as_deref(), common.json)
            } else {
                solve_cmd::<f64>(io, &doc.model, i, &cfg, csv.as_deref(), common.json)
            }
        }
        Command::Optimize {
            file,
            start,
            slack,
            max_kappa,
            out,
            csv,
            common,
        } => {
            let doc = io.document(&file, common.mode())?;
            let starts = start_states(&doc.model, start.as_deref())?;
            let cfg = WelfareConfig {
                slack,
                max_kappa,
                ..WelfareConfig::new(common.mode())
            };
            let opts = OptimizeOpts {
                starts,
                out,
                csv,
                json: common.json,
            };
            if common.exact {
                optimize_cmd::<Rational>(io, &doc.model, &cfg, &opts)
            } else {
                optimize_cmd::<f64>(io, &doc.model, &cfg, &opts)
            }
        }
        Command::Eval {
            file,
            strategy,
            start,
            common,
        } => {
            let doc = io.document(&file, common.mode())?;
            let starts = start_states(&doc.model, start.as_deref())?;
            let record = StrategyRecord::parse(&io.read(&strategy)?)?;
            let strat = record.resolve(&doc.model, common.mode())?;
            if common.exact {
                eval_cmd::<Rational>(io, &doc.model, &strat, &starts, common.json)
            } else {
                eval_cmd::<f64>(io, &doc.model, &strat, &starts, common.json)
            }
        }
        Command::Oracle {
            file,
            mode,
            horizon,
            start,
            threshold,
            cap,
            dp,
            float,
            common,
        } => {
            let exact = common.exact || (threshold.is_some() && !float);
            let nmode = if exact { NumericMode::Exact } else { NumericMode::float() };
            let doc = io.document(&file, nmode)?;
            let start = match start.as_deref() {
                Some(name) => doc.model.state_index(name)?,
                None => 0,
            };
            let threshold = match threshold.as_deref() {
                None => None,
                Some("auto") => match &doc.reduction {
                    Some(meta) => Some(meta.threshold.0.clone()),
                    None => return Err(Failure::Usage("`--threshold auto` needs a model produced by `gen sat`".into())),
                },
                Some(text) => Some(parse_rational(text).map_err(Failure::Usage)?),
            };
            let opts = OracleOpts {
                mode,
                horizon,
                start,
                threshold,
                cap,
                dp,
                json: common.json,
            };
            if exact {
                oracle_cmd::<Rational>(io, &doc, &opts)
            } else {
                oracle_cmd::<f64>(io, &doc, &opts)
            }
        }
        Command::Gen { what, out } => gen_cmd(io, what, out.as_deref()),
        Command::Bench { which } => bench_cmd(io, which),
        Command::Sweep {
            file,
            alpha,
            beta,
            csv,
            start,
            max_kappa,
            oracle_horizon,
            exact,
        } => {
            let mode = if exact { NumericMode::Exact } else { NumericMode::float() };
            let doc = io.document(&file, mode)?;
            let start = match start.as_deref() {
                Some(name) => doc.model.state_index(name)?,
                None => 0,
            };
            let cfg = SweepConfig {
                start,
                mode,
                max_kappa,
                oracle_horizon,
            };
            let cells = sweep_discounts(&doc.model, &alpha, &beta, &cfg)?;
            match csv {
                Some(path) => {
                    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                    write_sweep_csv(&cells, f)?;
                    let solved = cells.iter().filter(|c| matches!(c.outcome, CellOutcome::Solved { .. })).count();
                    let failed = cells.iter().filter(|c| matches!(c.outcome, CellOutcome::Failed { .. })).count();
                    writeln!(
                        io.out,
                        "wrote {} cells ({solved} solved, {failed} failed) to {}",
                        cells.len(),
                        path.display()
                    )?;
                }
                None => write_sweep_csv(&cells, &mut *io.out)?,
            }
            Ok(())
        }
    }
}

fn validate(io: &mut Io, file: &Path, common: &Common) -> CmdResult {
    let text = io.read(file)?;
    let doc = format::parse_unvalidated(&text)?;
    let violations = doc.model.validate(common.mode());
    if common.json {
        let v = json!({
            "valid": violations.is_empty(),
            "states": doc.model.num_states(),
            "principals": doc.model.num_principals(),
            "violations": violations.iter().map(ToString::to_string).collect::<Vec<_>>(),
        });
        writeln!(io.out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
    } else if violations.is_empty() {
        let actions: usize = doc.model.states().iter().map(|s| s.actions.len()).sum();
        writeln!(
            io.out,
            "ok: {} states, {actions} actions, {} principals",
            doc.model.num_states(),
            doc.model.num_principals()
        )?;
    } else {
        for v in &violations {
            writeln!(io.out, "{v}")?;
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(violations).into())
    }
}

fn spacing(io: &mut Io, file: &Path, bound: &str, common: &Common) -> CmdResult {
    let bound = parse_rational(bound).map_err(Failure::Usage)?;
    let doc = io.document(file, common.mode())?;
    let report = doc.model.spacing_report(&bound)?;
    let names: Vec<&str> = doc.model.principals().iter().map(|p| p.name.as_str()).collect();
    if common.json {
        let pairs: Vec<Value> = report
            .pairs
            .iter()
            .map(|p| {
                json!({
                    "higher": names[p.index],
                    "lower": names[p.index + 1],
                    "spacing": p.spacing.render(),
                    "ok": p.reasonably_spaced,
                })
            })
            .collect();
        let v = json!({"bound": report.bound.render(), "reasonably_spaced": report.all_spaced(), "pairs": pairs});
        writeln!(io.out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
        return Ok(());
    }
    let mut rows = vec![vec!["higher".to_string(), "lower".into(), "spacing".into(), "ok".into()]];
    for p in &report.pairs {
        rows.push(vec![
            names[p.index].to_string(),
            names[p.index + 1].to_string(),
            p.spacing.render(),
            if p.reasonably_spaced { "yes" } else { "no" }.into(),
        ]);
    }
    write!(io.out, "{}", table(&rows))?;
    writeln!(
        io.out,
        "{} for bound {}",
        if report.all_spaced() { "reasonably spaced" } else { "not reasonably spaced" },
        report.bound.render()
    )?;
    Ok(())
}

fn principal_index(model: &AsymMdp, key: &str) -> Result<usize, Failure> {
    if let Ok(i) = key.parse::<usize>() {
        if i < model.num_principals() {
            return Ok(i);
        }
    }
    model
        .principals()
        .iter()
        .position(|p| p.name == key)
        .ok_or_else(|| Failure::Usage(format!("unknown principal `{key}`")))
}

fn start_states(model: &AsymMdp, start: Option<&str>) -> Result<Vec<usize>, Failure> {
    match start {
        Some(name) => Ok(vec![model.state_index(name)?]),
        None => Ok((0..model.num_states()).collect()),
    }
}

fn num<T: Scalar>(x: &T) -> Value {
    if T::EXACT {
        Value::String(x.render())
    } else {
        serde_json::Number::from_f64(x.to_f64()).map(Value::Number).unwrap_or(Value::Null)
    }
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().enumerate().map(|(c, s)| format!("{s:<w$}", w = widths[c])).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn solve_cmd<T: Scalar>(io: &mut Io, model: &AsymMdp, i: usize, cfg: &SolveConfig, csv: Option<&Path>, json: bool) -> CmdResult {
    let mdp = model.numeric::<T>();
    let sol = solve_discounted(&mdp, &mdp.all_actions(), i, cfg)?;
    let rows: Vec<(String, &T, String)> = (0..model.num_states())
        .map(|s| {
            (
                model.state_name(s).to_string(),
                &sol.values.values[s],
                model.action_name(s, sol.policy[s]).to_string(),
            )
        })
        .collect();
    if let Some(path) = csv {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["state", "value", "action"])?;
        for (s, v, a) in &rows {
            w.write_record([s.as_str(), v.render().as_str(), a.as_str()])?;
        }
        w.flush()?;
    }
    if json {
        let v = json!({
            "principal": model.principals()[i].name,
            "discount": model.principals()[i].discount.render(),
            "values": rows.iter().map(|(s, v, a)| json!({"state": s, "value": num(*v), "action": a})).collect::<Vec<_>>(),
        });
        writeln!(io.out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
    } else {
        let mut t = vec![vec!["state".to_string(), "value".into(), "action".into()]];
        t.extend(rows.iter().map(|(s, v, a)| vec![s.clone(), v.render(), a.clone()]));
        write!(io.out, "{}", table(&t))?;
    }
    Ok(())
}

struct OptimizeOpts {
    starts: Vec<usize>,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    json: bool,
}

fn report_json<T: Scalar>(model: &AsymMdp, r: &WelfareReport<T>) -> Value {
    json!({
        "start": model.state_name(r.start),
        "per_principal": model
            .principals()
            .iter()
            .zip(&r.per_principal)
            .map(|(p, v)| json!({"principal": p.name, "value": num(v)}))
            .collect::<Vec<_>>(),
        "social_welfare": num(&r.social_welfare),
        "baseline": num(&r.baseline),
        "deviation_gain": num(&r.deviation_gain),
    })
}

fn optimize_cmd<T: Scalar>(io: &mut Io, model: &AsymMdp, cfg: &WelfareConfig, opts: &OptimizeOpts) -> CmdResult {
    let mdp = model.numeric::<T>();
    let out = optimize(&mdp, cfg)?;
    let reports: Vec<WelfareReport<T>> = opts.starts.iter().map(|&s| out.report(s)).collect();
    let report_value = Value::Array(reports.iter().map(|r| report_json(model, r)).collect());
    let record = StrategyRecord::counting(model, &out.strategy, Some(report_value));
    if let Some(path) = &opts.out {
        write_file(path, &record.to_json())?;
    }
    if let Some(path) = &opts.csv {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(f);
        let mut header = vec!["start".to_string()];
        header.extend(model.principals().iter().map(|p| p.name.clone()));
        header.extend(["social_welfare", "baseline", "deviation_gain", "kappa"].map(String::from));
        w.write_record(&header)?;
        for r in &reports {
            let mut row = vec![model.state_name(r.start).to_string()];
            row.extend(r.per_principal.iter().map(Scalar::render));
            row.extend([r.social_welfare.render(), r.baseline.render(), r.deviation_gain.render(), r.kappa.to_string()]);
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    if opts.json {
        write!(io.out, "{}", record.to_json())?;
        return Ok(());
    }
    let s = &out.strategy;
    writeln!(io.out, "kappa {}", s.kappa)?;
    let assign = |row: &[usize]| {
        row.iter()
            .enumerate()
            .map(|(st, &a)| format!("{}:{}", model.state_name(st), model.action_name(st, a)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    if s.kappa > 0 {
        writeln!(io.out, "prefix")?;
        for (j, row) in s.prefix.iter().enumerate() {
            writeln!(io.out, "  step {j}: {}", assign(row))?;
        }
    }
    writeln!(io.out, "tail {}", assign(&s.tail))?;
    let mut t = vec![vec!["start".to_string()]];
    t[0].extend(model.principals().iter().map(|p| p.name.clone()));
    t[0].extend(["SW", "baseline", "gain"].map(String::from));
    for r in &reports {
        let mut row = vec![model.state_name(r.start).to_string()];
        row.extend(r.per_principal.iter().map(Scalar::render));
        row.extend([r.social_welfare.render(), r.baseline.render(), r.deviation_gain.render()]);
        t.push(row);
    }
    write!(io.out, "{}", table(&t))?;
    Ok(())
}

fn eval_cmd<T: Scalar>(io: &mut Io, model: &AsymMdp, strat: &Strategy, starts: &[usize], json: bool) -> CmdResult {
    let mdp = model.numeric::<T>();
    let payoffs: Payoffs<T> = match strat {
        Strategy::Positional(p) => eval_positional(&mdp, p)?,
        Strategy::Mixed(m) => eval_stationary_mixed(&mdp, &m.probs)?,
        Strategy::Counting(c) => eval_counting(&mdp, c)?,
    };
    if json {
        let rows: Vec<Value> = starts
            .iter()
            .map(|&s| {
                json!({
                    "start": model.state_name(s),
                    "per_principal": model
                        .principals()
                        .iter()
                        .enumerate()
                        .map(|(i, p)| json!({"principal": p.name, "value": num(&payoffs.per_principal[i][s])}))
                        .collect::<Vec<_>>(),
                    "social_welfare": num(&payoffs.welfare[s]),
                })
            })
            .collect();
        writeln!(io.out, "{}", serde_json::to_string_pretty(&Value::Array(rows)).expect("json"))?;
        return Ok(());
    }
    let mut t = vec![vec!["start".to_string()]];
    t[0].extend(model.principals().iter().map(|p| p.name.clone()));
    t[0].push("SW".into());
    for &s in starts {
        let mut row = vec![model.state_name(s).to_string()];
        row.extend(payoffs.per_principal.iter().map(|v| v[s].render()));
        row.push(payoffs.welfare[s].render());
        t.push(row);
    }
    write!(io.out, "{}", table(&t))?;
    Ok(())
}

struct OracleOpts {
    mode: OracleMode,
    horizon: usize,
    start: usize,
    threshold: Option<Rational>,
    cap: u64,
    dp: bool,
    json: bool,
}

fn assignment_of(doc: &Document, policy: &[usize]) -> Option<(Vec<bool>, bool)> {
    let meta = doc.reduction.as_ref()?;
    let formula = CnfFormula::new(meta.num_vars, meta.clauses.clone()).ok()?;
    let assignment = decode_assignment(&doc.model, meta.num_vars, policy).ok()?;
    let sat = formula.satisfied_by(&assignment);
    Some((assignment, sat))
}

fn oracle_cmd<T: Scalar>(io: &mut Io, doc: &Document, opts: &OracleOpts) -> CmdResult {
    let model = &doc.model;
    let mdp: NumericMdp<T> = model.numeric();
    let threshold = opts.threshold.as_ref().map(T::from_rational);
    let mut v = serde_json::Map::new();
    let mut lines = Vec::new();
    match opts.mode {
        OracleMode::Positional => {
            let (answer, strategy, welfare) = match &threshold {
                Some(t) => {
                    let d = threshold_decide_positional(&mdp, opts.start, Some(t), opts.cap)?;
                    match d.witness {
                        Some((p, w)) => (Some(d.holds), Some(p), Some(w)),
                        None => (Some(d.holds), None, None),
                    }
                }
                None => {
                    let r = enumerate_positional(&mdp, opts.start, opts.cap, false)?;
                    (None, Some(r.strategy), Some(r.best_welfare))
                }
            };
            if let Some(holds) = answer {
                lines.push(if holds { "YES" } else { "NO" }.to_string());
                v.insert("holds".into(), Value::Bool(holds));
            }
            if let (Some(p), Some(w)) = (&strategy, &welfare) {
                let label = if answer.is_some() { "witness" } else { "best" };
                let cells = p
                    .iter()
                    .enumerate()
                    .map(|(s, &a)| format!("{}:{}", model.state_name(s), model.action_name(s, a)))
                    .collect::<Vec<_>>();
                lines.push(format!("{label} {}", cells.join(" ")));
                lines.push(format!("welfare {}", w.render()));
                v.insert("strategy".into(), serde_json::to_value(StrategyRecord::positional(model, p)).expect("json"));
                v.insert("welfare".into(), num(w));
                if let Some((assignment, sat)) = assignment_of(doc, p) {
                    let bits = assignment
                        .iter()
                        .enumerate()
                        .map(|(k, &b)| format!("x{}={}", k + 1, u8::from(b)))
                        .collect::<Vec<_>>();
                    lines.push(format!("assignment {}", bits.join(" ")));
                    lines.push(format!("satisfies {sat}"));
                    v.insert("assignment".into(), json!(assignment));
                    v.insert("satisfies".into(), Value::Bool(sat));
                }
            }
        }
        OracleMode::Counting => {
            let r = if opts.dp {
                counting_dp(&mdp, opts.start, opts.horizon, opts.cap)?
            } else {
                enumerate_counting(&mdp, opts.start, opts.horizon, opts.cap)?
            };
            if let Some(t) = &threshold {
                let holds = r.best_welfare >= *t;
                lines.push(if holds { "YES" } else { "NO" }.to_string());
                v.insert("holds".into(), Value::Bool(holds));
            }
            lines.push(format!("best welfare {} over {} candidates (horizon {})", r.best_welfare.render(), r.candidates, opts.horizon));
            v.insert("welfare".into(), num(&r.best_welfare));
            v.insert("candidates".into(), json!(r.candidates));
            v.insert(
                "strategy".into(),
                serde_json::to_value(StrategyRecord::counting(model, &r.strategy, None)).expect("json"),
            );
            for (j, row) in r.strategy.prefix.iter().enumerate() {
                let cells = row
                    .iter()
                    .enumerate()
                    .map(|(s, &a)| format!("{}:{}", model.state_name(s), model.action_name(s, a)))
                    .collect::<Vec<_>>();
                lines.push(format!("step {j}: {}", cells.join(" ")));
            }
            let tail = r
                .strategy
                .tail
                .iter()
                .enumerate()
                .map(|(s, &a)| format!("{}:{}", model.state_name(s), model.action_name(s, a)))
                .collect::<Vec<_>>();
            lines.push(format!("tail {}", tail.join(" ")));
        }
    }
    if opts.json {
        writeln!(io.out, "{}", serde_json::to_string_pretty(&Value::Object(v)).expect("json"))?;
    } else {
        for l in lines {
            writeln!(io.out, "{l}")?;
        }
    }
    Ok(())
}

fn parse_list(items: &[String]) -> Result<Vec<Rational>, Failure> {
    items.iter().map(|s| parse_rational(s).map_err(Failure::Usage)).collect()
}

fn gen_cmd(io: &mut Io, what: GenCommand, out: Option<&Path>) -> CmdResult {
    let doc: Document = match what {
        GenCommand::Builtin { name } => builtin(&name)?.into(),
        GenCommand::Random {
            states,
            actions,
            principals,
            scheme,
            discounts,
            hi,
            lo,
            seed,
        } => {
            let scheme = match scheme {
                SchemeKind::Ap => DiscountScheme::ArithmeticProgression {
                    hi: parse_rational(&hi).map_err(Failure::Usage)?,
                    lo: parse_rational(&lo).map_err(Failure::Usage)?,
                },
                SchemeKind::List => DiscountScheme::Explicit(parse_list(&discounts)?),
            };
            random_mdp(&RandomMdpConfig::new(states, actions, scheme, principals, seed))?.into()
        }
        GenCommand::B1 { n } => badly_spaced(n)?.into(),
        GenCommand::Sat { file, zero_sum } => {
            let formula = parse_dimacs(&io.read(&file)?)?;
            let reduction = sat_reduction(&formula);
            if zero_sum {
                zero_sum_variant(&reduction)?.document()
            } else {
                reduction.document()
            }
        }
    };
    let text = format::to_string(&doc);
    match out {
        Some(path) => write_file(path, &text),
        None => {
            io.out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn bench_cmd(io: &mut Io, which: BenchCommand) -> CmdResult {
    let (rows, out): (Vec<BenchRow>, BenchOutput) = match which {
        BenchCommand::Rq1 { states, out } => {
            let states = if states.is_empty() { rq1_default_states(100) } else { states };
            (run_rq1(&states, &out.seeds), out)
        }
        BenchCommand::Rq2 { principals, out } => {
            let principals = if principals.is_empty() { (2..=101).collect() } else { principals };
            let mut rows: Vec<BenchRow> = out.seeds.iter().flat_map(|&seed| run_rq2(&principals, seed)).collect();
            rows.sort_by_key(|r| (r.config.num_principals, r.config.seed));
            (rows, out)
        }
        BenchCommand::Rq3 { ratios, out } => {
            let ratios = if ratios.is_empty() { rq3_default_ratios(20) } else { parse_list(&ratios)? };
            (run_rq3(&ratios, &out.seeds), out)
        }
    };
    match &out.csv {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            write_bench_csv(&rows, f)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            writeln!(io.out, "wrote {} rows ({failed} failed) to {}", rows.len(), path.display())?;
        }
        None => write_bench_csv(&rows, &mut *io.out)?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str], stdin: &str) -> (i32, String, String) {
        let mut input = stdin.as_bytes();
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("mdpwf").chain(args.iter().copied());
        let code = run(argv, &mut input, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, err) = call(&["badflag"], "");
        assert_eq!(code, 2);
        assert!(err.contains("Usage"));
        assert_eq!(call(&[], "").0, 2);
        assert_eq!(call(&["--help"], "").0, 0);
    }

    #[test]
    fn optimize_from_stdin() {
        let (_, model, _) = call(&["gen", "builtin", "investment"], "");
        let (code, out, _) = call(&["optimize", "-", "--exact", "--start", "s0"], &model);
        assert_eq!(code, 0);
        assert!(out.contains("kappa 2"));
        assert!(out.contains("127/9"));
        assert!(out.contains("step 1: s0:a s1:b"));
    }

    #[test]
    fn validation_failure_exits_1() {
        let bad = r#"{"states":["s"],"principals":[{"name":"p","discount":"1/2"}],
            "actions":[{"state":"s","action":"a","reward":[0],"transitions":[{"to":"s","prob":"1/2"}]}]}"#;
        let (code, out, _) = call(&["validate", "-"], bad);
        assert_eq!(code, 1);
        assert!(out.contains("sum"));
    }

    #[test]
    fn auto_threshold_needs_metadata() {
        let (_, model, _) = call(&["gen", "builtin", "investment"], "");
        let (code, _, err) = call(&["oracle", "-", "--threshold", "auto"], &model);
        assert_eq!(code, 2);
        assert!(err.contains("gen sat"));
    }

    #[test]
    fn principal_lookup() {
        let (_, model, _) = call(&["gen", "builtin", "investment"], "");
        let (code, out, _) = call(&["solve", "-", "--principal", "Bob", "--exact"], &model);
        assert_eq!(code, 0);
        assert!(out.contains("s0     9/2"));
        assert_eq!(call(&["solve", "-", "--principal", "Carol"], &model).0, 2);
    }
}
