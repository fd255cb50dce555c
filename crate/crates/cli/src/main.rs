use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use covest::analysis::closed_form_counts;
use covest::baseline::{estimate_naive, executed_naive_ops};
use covest::engine::{estimate_combinations, time_combinations, ExecMode};
use covest::format::{parse_input_matrix, write_covariance, write_input_matrix};
use covest::schedsim::{self, Policy, TaskCost};
use covest::{CovarianceMatrix, InputMatrix, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Gen,
    Estimate,
    Verify,
    Count,
    Simsched,
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Naive,
    Seq,
    SeqOpt,
    Par,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Fifo,
    Longest,
}

/// Covariance-method estimation, operation counts and scheduling sweeps.
#[derive(Debug, Parser)]
#[command(name = "covest", version)]
struct RunConfig {
    #[arg(long = "cmd", value_enum)]
    command: Command,
    /// Input matrix file (estimate/verify/bench) or cost trace (simsched).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long = "out")]
    output: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Core counts for simsched, e.g. `1,2,4` or `1-128`.
    #[arg(long, default_value = "1-128")]
    cores: String,
    #[arg(long, value_enum, default_value = "longest")]
    policy: PolicyArg,
    /// bench: also write measured per-combination costs (ns) to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl RunConfig {
    fn need(&self, v: Option<usize>, name: &str) -> Result<usize> {
        match v {
            Some(0) => bail!("--{name} must be at least 1"),
            Some(x) => Ok(x),
            None => bail!("--{name} is required for --cmd {:?}", self.command),
        }
    }

    fn window(&self) -> Result<WindowSpec> {
        Ok(WindowSpec::new(
            self.need(self.p, "p")?,
            self.need(self.q, "q")?,
        )?)
    }

    fn threads(&self) -> Result<usize> {
        match self.threads {
            Some(0) => bail!("--threads must be at least 1"),
            Some(t) => Ok(t),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    /// `--in` when given, otherwise a seeded `n`x`m` matrix.
    fn matrix(&self) -> Result<InputMatrix> {
        match &self.input {
            Some(path) => read_matrix(path),
            None => Ok(InputMatrix::random(
                self.need(self.n, "n")?,
                self.need(self.m, "m")?,
                self.seed,
            )?),
        }
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.output {
            Some(path) => {
                fs::write(path, text).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn read_matrix(path: &Path) -> Result<InputMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_input_matrix(&text).with_context(|| format!("parsing {}", path.display()))
}

fn exec_mode(mode: Mode, threads: usize) -> Option<ExecMode> {
    match mode {
        Mode::Naive => None,
        Mode::Seq => Some(ExecMode::SeqDirect),
        Mode::SeqOpt => Some(ExecMode::SeqOptimized),
        Mode::Par => Some(ExecMode::Parallel { threads }),
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Naive => "naive",
        Mode::Seq => "seq",
        Mode::SeqOpt => "seq-opt",
        Mode::Par => "par",
    }
}

/// Runs one estimator, returning the result and executed `(mults, adds)`.
fn run_mode(
    a: &InputMatrix,
    w: WindowSpec,
    mode: Mode,
    threads: usize,
) -> Result<(CovarianceMatrix, u64, u64)> {
    match exec_mode(mode, threads) {
        None => {
            let c = estimate_naive(a, w)?;
            let (mults, adds) = executed_naive_ops(a.dims(), w)?;
            Ok((c, mults, adds))
        }
        Some(m) => {
            let (c, ops) = estimate_combinations(a, w, m)?;
            Ok((c, ops.multiplications, ops.additions))
        }
    }
}

fn parse_cores(spec: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = item.split_once('-') {
            let (lo, hi): (usize, usize) = (lo.trim().parse()?, hi.trim().parse()?);
            if lo == 0 || hi < lo {
                bail!("bad core range {item:?}");
            }
            out.extend(lo..=hi);
        } else {
            let c: usize = item.parse()?;
            if c == 0 {
                bail!("core count must be at least 1");
            }
            out.push(c);
        }
    }
    if out.is_empty() {
        bail!("empty --cores list");
    }
    Ok(out)
}

fn cmd_gen(cfg: &RunConfig) -> Result<ExitCode> {
    let a = InputMatrix::random(cfg.need(cfg.n, "n")?, cfg.need(cfg.m, "m")?, cfg.seed)?;
    cfg.emit(&write_input_matrix(&a))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_estimate(cfg: &RunConfig) -> Result<ExitCode> {
    let a = cfg.matrix()?;
    let w = cfg.window()?;
    let mode = cfg.mode.unwrap_or(Mode::SeqOpt);
    let (c, mults, adds) = run_mode(&a, w, mode, cfg.threads()?)?;
    eprintln!(
        "mode={} multiplications={mults} additions={adds}",
        mode_name(mode)
    );
    cfg.emit(&write_covariance(&c))?;
    Ok(ExitCode::SUCCESS)
}

const VERIFY_TOLERANCE: f64 = 1e-10;

fn cmd_verify(cfg: &RunConfig) -> Result<ExitCode> {
    let a = cfg.matrix()?;
    let w = cfg.window()?;
    let threads = cfg.threads()?;
    let naive = estimate_naive(&a, w)?;
    let mut report = format!(
        "verify N={} M={} P={} Q={} threads={threads} tolerance={VERIFY_TOLERANCE:e}\n",
        a.rows(),
        a.cols(),
        w.p(),
        w.q()
    );
    let mut all_ok = true;
    let mut optimized = None;
    for mode in [Mode::Seq, Mode::SeqOpt, Mode::Par] {
        let (c, ..) = run_mode(&a, w, mode, threads)?;
        let max_rel = c.max_relative_entry_difference(&naive)?;
        let frob = c.relative_frobenius_distance(&naive)?;
        let ok = max_rel <= VERIFY_TOLERANCE;
        all_ok &= ok;
        report += &format!(
            "{:<8} vs naive: max_rel_entry={max_rel:.3e} rel_frobenius={frob:.3e} {}\n",
            mode_name(mode),
            if ok { "PASS" } else { "FAIL" }
        );
        match mode {
            Mode::SeqOpt => optimized = Some(c),
            Mode::Par => {
                let ok = optimized.as_ref().is_some_and(|o| o.bitwise_eq(&c));
                all_ok &= ok;
                report += &format!(
                    "par      vs seq-opt: bitwise {}\n",
                    if ok { "PASS" } else { "FAIL" }
                );
            }
            _ => {}
        }
    }
    report += if all_ok {
        "result: PASS\n"
    } else {
        "result: FAIL\n"
    };
    cfg.emit(&report)?;
    Ok(if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_count(cfg: &RunConfig) -> Result<ExitCode> {
    let model = closed_form_counts(
        cfg.need(cfg.n, "n")?,
        cfg.need(cfg.m, "m")?,
        cfg.need(cfg.p, "p")?,
        cfg.need(cfg.q, "q")?,
    )?;
    cfg.emit(&format!(
        "{}\n{}\n",
        covest::analysis::CostModel::CSV_HEADER,
        model.csv_row()
    ))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simsched(cfg: &RunConfig) -> Result<ExitCode> {
    let w = cfg.window()?;
    let tasks: Vec<TaskCost> = match &cfg.input {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            schedsim::ingest_measured_costs(&text, w, cfg.batch)?
        }
        None => {
            schedsim::model_costs(w, (cfg.need(cfg.n, "n")?, cfg.need(cfg.m, "m")?), cfg.batch)?
        }
    };
    let policy = match cfg.policy {
        PolicyArg::Fifo => Policy::Fifo,
        PolicyArg::Longest => Policy::LongestFirst,
    };
    let points = schedsim::sweep(&tasks, &parse_cores(&cfg.cores)?, policy)?;
    cfg.emit(&schedsim::sweep_csv(&points))?;
    Ok(ExitCode::SUCCESS)
}

fn min_time<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(Duration, T)> {
    let mut best = Duration::MAX;
    let mut last = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let out = f()?;
        best = best.min(start.elapsed());
        last = Some(out);
    }
    Ok((best, last.expect("at least one repeat")))
}

fn cmd_bench(cfg: &RunConfig) -> Result<ExitCode> {
    let a = cfg.matrix()?;
    let w = cfg.window()?;
    let threads = cfg.threads()?;
    // Naive always runs first: it is the speedup baseline.
    let modes = match cfg.mode {
        None => vec![Mode::Naive, Mode::Seq, Mode::SeqOpt, Mode::Par],
        Some(Mode::Naive) => vec![Mode::Naive],
        Some(m) => vec![Mode::Naive, m],
    };
    let mut out = String::from("mode,threads,N,M,P,Q,seconds,speedup_vs_naive,mults,adds\n");
    let mut naive_secs = None;
    for mode in modes {
        let (elapsed, (_, mults, adds)) = min_time(cfg.repeats, || run_mode(&a, w, mode, threads))?;
        let secs = elapsed.as_secs_f64();
        let base = *naive_secs.get_or_insert(secs);
        let t = if mode == Mode::Par { threads } else { 1 };
        out += &format!(
            "{},{t},{},{},{},{},{secs:.9},{:.4},{mults},{adds}\n",
            mode_name(mode),
            a.rows(),
            a.cols(),
            w.p(),
            w.q(),
            base / secs.max(f64::MIN_POSITIVE),
        );
    }
    if let Some(path) = &cfg.trace {
        let timings = time_combinations(&a, w, cfg.repeats)?;
        let tasks: Vec<TaskCost> = timings
            .into_iter()
            .map(|(combination, d)| TaskCost {
                matrix: 0,
                combination,
                cost: d.as_nanos() as u64,
            })
            .collect();
        fs::write(path, schedsim::cost_trace_csv(&tasks))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    cfg.emit(&out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cfg = RunConfig::parse();
    let result = match cfg.command {
        Command::Gen => cmd_gen(&cfg),
        Command::Estimate => cmd_estimate(&cfg),
        Command::Verify => cmd_verify(&cfg),
        Command::Count => cmd_count(&cfg),
        Command::Simsched => cmd_simsched(&cfg),
        Command::Bench => cmd_bench(&cfg),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
