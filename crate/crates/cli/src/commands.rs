//! `captool` subcommands.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use log::{info, warn};

use qsdc_core::capacity::PointOptions;
use qsdc_core::fmt::{format_g10, format_opt};
use qsdc_core::sweep::CsvSink;
use qsdc_core::{
    find_zero_boundary, run_point, run_sweep, CapError, ChannelModel, Method, ObservationTable,
    OptimizerConfig, PointInput, PovmMode, ProtocolConfig, ProtocolKind, ProtocolSpec, Result,
    SweepRow,
};

use crate::config::RunConfig;
use crate::record::{write_atomic, write_json_atomic, RunRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_SWEEP_INCOMPLETE: i32 = 4;

/// Exit status for an error that aborted a command.
pub fn exit_code(e: &CapError) -> i32 {
    if e.is_infeasibility() {
        EXIT_INFEASIBLE
    } else if matches!(e, CapError::NumericalFailure { .. }) {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_CONFIG
    }
}

#[derive(Args, Debug, Clone)]
pub struct ProtocolArgs {
    #[arg(long, value_parser = parse_kind)]
    pub protocol: ProtocolKind,
    /// Key-basis weight.
    #[arg(long = "pz", default_value_t = 0.999)]
    pub p_z: f64,
    /// x-basis weight (six-state variant only).
    #[arg(long = "px")]
    pub p_x: Option<f64>,
    /// Weaker detector efficiency relative to the stronger one (mismatch only).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Stronger detector efficiency (mismatch only).
    #[arg(long = "eta-big")]
    pub eta_big: Option<f64>,
    #[arg(long = "povm-mode", value_parser = parse_povm_mode, default_value = "corrected")]
    pub povm_mode: PovmMode,
}

impl ProtocolArgs {
    fn build(&self) -> Result<ProtocolSpec> {
        let mismatch = self.protocol == ProtocolKind::Dl04Mismatch;
        if !mismatch && (self.eta.is_some() || self.eta_big.is_some()) {
            return Err(CapError::Config(format!(
                "--eta/--eta-big only apply to dl04-mismatch, not {}",
                self.protocol
            )));
        }
        let cfg = ProtocolConfig {
            name: self.protocol,
            p_z: self.p_z,
            p_x: self.p_x,
            povm_mode: self.povm_mode,
        };
        cfg.build(self.eta_big, self.eta)
    }
}

fn parse_kind(s: &str) -> std::result::Result<ProtocolKind, String> {
    s.parse().map_err(|e: CapError| e.to_string())
}

fn parse_povm_mode(s: &str) -> std::result::Result<PovmMode, String> {
    s.parse().map_err(|e: CapError| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: CapError| e.to_string())
}

#[derive(Args, Debug, Clone)]
pub struct PointArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Depolarizing strength in [0, 1].
    #[arg(long, required_unless_present = "table", conflicts_with = "table")]
    pub epsilon: Option<f64>,
    /// Observation table CSV (`i,j,pr`) to use instead of a simulated channel.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Backward-channel error rate; defaults to the forward one.
    #[arg(long = "q-b")]
    pub q_b: Option<f64>,
    #[arg(long, value_parser = parse_method, default_value = "comb")]
    pub method: Method,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Row destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Iteration trace CSV destination.
    #[arg(long = "emit-trace")]
    pub emit_trace: Option<PathBuf>,
    /// Fill the elapsed_ms column.
    #[arg(long)]
    pub timing: bool,
}

pub fn cmd_point(args: &PointArgs) -> Result<i32> {
    let spec = args.protocol.build()?;
    let mut cfg = OptimizerConfig::with_method(args.method);
    if let Some(t) = args.tol {
        cfg.tol = t;
    }
    if let Some(n) = args.max_iter {
        cfg.max_iter = n;
    }
    cfg.validate()?;
    let input = match (&args.table, args.epsilon) {
        (Some(path), _) => {
            let f = File::open(path)
                .map_err(|e| CapError::Config(format!("cannot open {}: {e}", path.display())))?;
            PointInput::Table(ObservationTable::read_csv(f)?)
        }
        (None, Some(eps)) => {
            if !(0.0..=1.0).contains(&eps) {
                return Err(CapError::Config(format!(
                    "schema violation: --epsilon {eps} outside [0, 1]"
                )));
            }
            PointInput::Channel(ChannelModel::for_protocol(spec.kind(), eps)?)
        }
        (None, None) => {
            return Err(CapError::Config(
                "one of --epsilon or --table is required".into(),
            ))
        }
    };
    let opts = PointOptions {
        q_b: args.q_b,
        ..PointOptions::default()
    };
    let res = run_point(&spec, &input, &opts, &cfg)?;
    let row = SweepRow::from_result(&res);
    let emit = |w: &mut dyn Write| -> Result<()> {
        let mut sink = CsvSink::new(w, args.timing)?;
        sink.write(&row)?;
        sink.into_inner()?;
        Ok(())
    };
    match &args.out {
        Some(path) => write_atomic(path, emit)?,
        None => emit(&mut io::stdout().lock())?,
    }
    if let Some(path) = &args.emit_trace {
        write_atomic(path, |w| res.trace.write_csv(w))?;
    }
    if !res.converged {
        warn!(
            "optimizer stopped after {} iterations without converging",
            res.iterations
        );
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(EXIT_OK)
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (overrides output.jobs).
    #[arg(long)]
    pub jobs: Option<usize>,
}

pub const RESULTS_FILE: &str = "results.csv";
pub const RECORD_FILE: &str = "run_record.json";

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let config = RunConfig::load(&args.config)?;
    let dir = match (&args.out, &config.output.dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => {
            return Err(CapError::Config(
                "no output directory: pass --out or set output.dir".into(),
            ))
        }
    };
    let jobs = args.jobs.unwrap_or(config.output.jobs);
    if jobs == 0 {
        return Err(CapError::Config("--jobs must be at least 1".into()));
    }
    std::fs::create_dir_all(&dir)?;
    let spec = config.sweep_spec();
    info!(
        "sweep {}: {} rows on {jobs} workers",
        config.digest(),
        spec.row_count()
    );

    // Rows stream into the .partial file; the final name only appears once
    // the sweep has finished.
    let partial = dir.join(format!("{RESULTS_FILE}.partial"));
    let mut sink = CsvSink::new(
        BufWriter::new(File::create(&partial)?),
        config.output.timing,
    )?;
    let result = run_sweep(&spec, jobs, |row| sink.write(row))?;
    let mut file = sink
        .into_inner()?
        .into_inner()
        .map_err(|e| CapError::Io(e.into_error()))?;
    file.flush()?;
    file.sync_all()?;
    drop(file);
    std::fs::rename(&partial, dir.join(RESULTS_FILE))?;

    if config.sweep.traces {
        let tdir = dir.join("traces");
        std::fs::create_dir_all(&tdir)?;
        for (i, (row, trace)) in result.rows.iter().zip(&result.traces).enumerate() {
            if let Some(t) = trace {
                let name = format!("row_{i:04}_{}.csv", row.method.as_str());
                write_atomic(&tdir.join(name), |w| t.write_csv(w))?;
            }
        }
    }
    write_json_atomic(&dir.join(RECORD_FILE), &RunRecord::new(&config, &result))?;
    if result.all_converged() {
        Ok(EXIT_OK)
    } else {
        let failed = result.rows.iter().filter(|r| !r.converged).count();
        warn!("{failed} of {} rows did not converge", result.rows.len());
        Ok(EXIT_SWEEP_INCOMPLETE)
    }
}

#[derive(Args, Debug, Clone)]
pub struct BoundaryArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Forward error rates as `start:stop:step` (inclusive).
    #[arg(long = "qf-grid", value_parser = parse_grid)]
    pub qf_grid: Grid,
    /// Bisection tolerance on q_b.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, value_parser = parse_method, default_value = "comb")]
    pub method: Method,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

pub fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("expected start:stop:step, got {s:?}"));
    };
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(format!("grid {s:?} needs step > 0 and stop >= start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if n > 100_000 {
        return Err(format!("grid {s:?} has {n} points"));
    }
    Ok(Grid((0..n).map(|k| start + k as f64 * step).collect()))
}

pub fn cmd_boundary(args: &BoundaryArgs) -> Result<i32> {
    let spec = args.protocol.build()?;
    let cfg = OptimizerConfig::with_method(args.method);
    let mut lines = vec!["q_f,q_b_star".to_string()];
    for &q_f in &args.qf_grid.0 {
        let star = match find_zero_boundary(&spec, q_f, &cfg, args.tol) {
            Ok(q) => Some(q),
            Err(CapError::NoBoundary(msg)) => {
                info!("q_f = {q_f}: {msg}");
                None
            }
            Err(e) => return Err(e),
        };
        lines.push(format!("{},{}", format_g10(q_f), format_opt(star)));
    }
    let emit = |w: &mut dyn Write| -> Result<()> {
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    };
    match &args.out {
        Some(path) => write_atomic(path, emit)?,
        None => emit(&mut io::stdout().lock())?,
    }
    Ok(EXIT_OK)
}
