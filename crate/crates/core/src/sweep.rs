//! Parameter sweeps: grid expansion, parallel evaluation in a fixed order,
//! and the results CSV.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::capacity::{epsilon_for_qber, run_point, CapacityResult, PointInput, PointOptions};
use crate::capopt::{IterationTrace, Method, OptimizerConfig};
use crate::channel::{ChannelKind, ChannelModel, QberMode};
use crate::error::{CapError, Result};
use crate::fmt::{format_g10, format_opt};
use crate::protocol::{ProtocolConfig, ProtocolKind};

pub const CSV_HEADER: [&str; 13] = [
    "protocol",
    "eps",
    "q_f",
    "q_b",
    "eta",
    "eta_big",
    "p_z",
    "g_bits",
    "cs_secure",
    "cs_reliable",
    "iterations",
    "elapsed_ms",
    "converged",
];

/// Noise grid: either depolarizing strengths, or forward error rates that
/// are converted to strengths by inverting the simulated QBER.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ChannelKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilon: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q_f: Vec<f64>,
    /// Backward error rates; empty means `q_b = q_f` at every point.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q_b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MismatchGrid {
    pub eta: Vec<f64>,
    pub eta_big: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub gamma: f64,
    pub qber_mode: QberMode,
    /// Methods to run at every grid point; empty means `optimizer.method`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub methods: Vec<Method>,
    /// Keep iteration traces for every point.
    pub traces: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            qber_mode: QberMode::Max,
            methods: Vec::new(),
            traces: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub protocol: ProtocolConfig,
    pub channel: ChannelGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<MismatchGrid>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub sweep: SweepOptions,
}

fn check_grid(name: &str, v: &[f64], ok: impl Fn(f64) -> bool) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !ok(**x)) {
        return Err(CapError::Config(format!("{name} value {x} out of range")));
    }
    Ok(())
}

/// One optimization (the `q_b` values share its `g`).
#[derive(Clone, Debug)]
struct Unit {
    method: Method,
    eta_big: Option<f64>,
    eta: Option<f64>,
    eps: Option<f64>,
    q_f: Option<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        let ch = &self.channel;
        match (ch.epsilon.is_empty(), ch.q_f.is_empty()) {
            (true, true) => return Err(CapError::Config("channel grid is empty".into())),
            (false, false) => {
                return Err(CapError::Config(
                    "give either channel.epsilon or channel.q_f, not both".into(),
                ))
            }
            _ => {}
        }
        check_grid("epsilon", &ch.epsilon, |x| (0.0..=1.0).contains(&x))?;
        check_grid("q_f", &ch.q_f, |x| (0.0..=0.5).contains(&x))?;
        check_grid("q_b", &ch.q_b, |x| (0.0..=0.5).contains(&x))?;
        if !(self.sweep.gamma > 0.0 && self.sweep.gamma <= 1.0) {
            return Err(CapError::Config(format!(
                "gamma = {} outside (0, 1]",
                self.sweep.gamma
            )));
        }
        let mismatch = self.protocol.name == ProtocolKind::Dl04Mismatch;
        match (&self.mismatch, mismatch) {
            (Some(m), true) => {
                if m.eta.is_empty() || m.eta_big.is_empty() {
                    return Err(CapError::Config("mismatch grids must be nonempty".into()));
                }
                check_grid("eta", &m.eta, |x| x > 0.0 && x <= 1.0)?;
                check_grid("eta_big", &m.eta_big, |x| x > 0.0 && x <= 1.0)?;
            }
            (Some(_), false) => {
                return Err(CapError::Config(format!(
                    "mismatch grid given for protocol {}",
                    self.protocol.name
                )))
            }
            (None, true) => {
                return Err(CapError::Config(
                    "dl04-mismatch needs a mismatch grid".into(),
                ))
            }
            (None, false) => {}
        }
        if let Some(kind) = self.channel.kind {
            if kind == ChannelKind::VacuumDepolarizing && !mismatch {
                return Err(CapError::Config(
                    "vacuum-depolarizing noise needs the mismatch protocol's vacuum level".into(),
                ));
            }
        }
        // Build every protocol instance once so invalid POVMs fail up front.
        for (eb, e) in self.mismatch_points() {
            self.protocol.build(eb, e)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical (sorted-key, compact) JSON form.
    pub fn digest(&self) -> String {
        canonical_digest(self)
    }

    fn channel_kind(&self) -> ChannelKind {
        self.channel.kind.unwrap_or_else(|| {
            ChannelModel::for_protocol(self.protocol.name, 0.0)
                .expect("valid epsilon")
                .kind
        })
    }

    fn methods(&self) -> Vec<Method> {
        if self.sweep.methods.is_empty() {
            vec![self.optimizer.method]
        } else {
            self.sweep.methods.clone()
        }
    }

    fn mismatch_points(&self) -> Vec<(Option<f64>, Option<f64>)> {
        match &self.mismatch {
            Some(m) => m
                .eta_big
                .iter()
                .flat_map(|eb| m.eta.iter().map(move |e| (Some(*eb), Some(*e))))
                .collect(),
            None => vec![(None, None)],
        }
    }

    /// Grid points in output order: method, η_big, η, noise, q_b.
    fn units(&self) -> Vec<Unit> {
        let mut out = Vec::new();
        for method in self.methods() {
            for (eta_big, eta) in self.mismatch_points() {
                if self.channel.epsilon.is_empty() {
                    for &q in &self.channel.q_f {
                        out.push(Unit {
                            method,
                            eta_big,
                            eta,
                            eps: None,
                            q_f: Some(q),
                        });
                    }
                } else {
                    for &e in &self.channel.epsilon {
                        out.push(Unit {
                            method,
                            eta_big,
                            eta,
                            eps: Some(e),
                            q_f: None,
                        });
                    }
                }
            }
        }
        out
    }

    /// Number of rows the sweep produces.
    pub fn row_count(&self) -> usize {
        self.units().len() * self.channel.q_b.len().max(1)
    }
}

/// SHA-256 hex digest of a value's canonical JSON (object keys sorted).
pub fn canonical_digest<T: Serialize>(v: &T) -> String {
    let value = serde_json::to_value(v).expect("serializable");
    let text = serde_json::to_string(&value).expect("serializable");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub protocol: ProtocolKind,
    pub method: Method,
    pub eps: Option<f64>,
    pub q_f: Option<f64>,
    pub q_b: Option<f64>,
    pub eta: Option<f64>,
    pub eta_big: Option<f64>,
    pub p_z: f64,
    pub g_bits: Option<f64>,
    pub cs_secure: Option<f64>,
    pub cs_reliable: Option<f64>,
    pub iterations: Option<usize>,
    pub elapsed_ms: Option<f64>,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepRow {
    pub fn from_result(r: &CapacityResult) -> Self {
        Self {
            protocol: r.protocol,
            method: r.method,
            eps: r.eps,
            q_f: Some(r.q_f),
            q_b: Some(r.q_b),
            eta: r.eta,
            eta_big: r.eta_big,
            p_z: r.p_z,
            g_bits: Some(r.g_bits),
            cs_secure: Some(r.cs_secure),
            cs_reliable: Some(r.cs_reliable),
            iterations: Some(r.iterations),
            elapsed_ms: Some(r.elapsed_ms),
            converged: r.converged,
            error: None,
        }
    }

    /// CSV fields; `elapsed_ms` is left empty unless `timing` so that reruns
    /// produce identical files.
    pub fn csv_record(&self, timing: bool) -> Vec<String> {
        vec![
            self.protocol.as_str().to_string(),
            format_opt(self.eps),
            format_opt(self.q_f),
            format_opt(self.q_b),
            format_opt(self.eta),
            format_opt(self.eta_big),
            format_g10(self.p_z),
            format_opt(self.g_bits),
            format_opt(self.cs_secure),
            format_opt(self.cs_reliable),
            self.iterations.map(|i| i.to_string()).unwrap_or_default(),
            if timing {
                format_opt(self.elapsed_ms)
            } else {
                String::new()
            },
            self.converged.to_string(),
        ]
    }
}

/// Streams rows to any writer as CSV.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    timing: bool,
}

impl<W: Write> CsvSink<W> {
    pub fn new(w: W, timing: bool) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(CSV_HEADER)?;
        Ok(Self { writer, timing })
    }

    pub fn write(&mut self, row: &SweepRow) -> Result<()> {
        self.writer.write_record(row.csv_record(self.timing))?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer
            .into_inner()
            .map_err(|e| CapError::Io(std::io::Error::other(e.to_string())))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub config_digest: String,
    pub started: String,
    pub finished: String,
    pub version: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Per-row traces, present when `sweep.traces` is set.
    #[serde(skip)]
    pub traces: Vec<Option<IterationTrace>>,
    pub provenance: Provenance,
}

impl SweepResult {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn eval_unit(spec: &SweepSpec, unit: &Unit) -> Vec<(SweepRow, Option<IterationTrace>)> {
    let q_bs: Vec<Option<f64>> = if spec.channel.q_b.is_empty() {
        vec![None]
    } else {
        spec.channel.q_b.iter().map(|q| Some(*q)).collect()
    };
    let kind = spec.channel_kind();
    let cfg = OptimizerConfig {
        method: unit.method,
        ..spec.optimizer.clone()
    };
    let attempt = || -> Result<CapacityResult> {
        let pspec = spec.protocol.build(unit.eta_big, unit.eta)?;
        let eps = match (unit.eps, unit.q_f) {
            (Some(e), _) => e,
            (None, Some(q)) => epsilon_for_qber(&pspec, kind, q, spec.sweep.qber_mode)?,
            (None, None) => unreachable!("grid unit without noise parameter"),
        };
        let opts = PointOptions {
            q_b: None,
            gamma: spec.sweep.gamma,
            qber_mode: spec.sweep.qber_mode,
        };
        run_point(
            &pspec,
            &PointInput::Channel(ChannelModel::new(kind, eps)?),
            &opts,
            &cfg,
        )
    };
    match attempt() {
        Ok(base) => q_bs
            .iter()
            .map(|qb| {
                let r = match qb {
                    Some(q) => base.with_q_b(*q),
                    None => Ok(base.clone()),
                };
                match r {
                    Ok(r) => {
                        let trace = spec.sweep.traces.then(|| r.trace.clone());
                        (SweepRow::from_result(&r), trace)
                    }
                    Err(e) => (error_row(spec, unit, *qb, &e), None),
                }
            })
            .collect(),
        Err(e) => q_bs
            .iter()
            .map(|qb| (error_row(spec, unit, *qb, &e), None))
            .collect(),
    }
}

fn error_row(spec: &SweepSpec, unit: &Unit, q_b: Option<f64>, e: &CapError) -> SweepRow {
    SweepRow {
        protocol: spec.protocol.name,
        method: unit.method,
        eps: unit.eps,
        q_f: unit.q_f,
        q_b,
        eta: unit.eta,
        eta_big: unit.eta_big,
        p_z: spec.protocol.p_z,
        g_bits: None,
        cs_secure: None,
        cs_reliable: None,
        iterations: None,
        elapsed_ms: None,
        converged: false,
        error: Some(e.to_string()),
    }
}

/// Evaluates the grid with `jobs` workers. Rows reach `sink` in grid order,
/// one chunk of `jobs` points at a time, so an interrupted sweep leaves a
/// valid prefix behind. Per-point failures become rows with an error message.
pub fn run_sweep(
    spec: &SweepSpec,
    jobs: usize,
    mut sink: impl FnMut(&SweepRow) -> Result<()>,
) -> Result<SweepResult> {
    spec.validate()?;
    let started = now();
    let units = spec.units();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CapError::Config(format!("worker pool: {e}")))?;
    let mut rows = Vec::with_capacity(spec.row_count());
    let mut traces = Vec::with_capacity(spec.row_count());
    for chunk in units.chunks(jobs.max(1)) {
        let done: Vec<Vec<(SweepRow, Option<IterationTrace>)>> =
            pool.install(|| chunk.par_iter().map(|u| eval_unit(spec, u)).collect());
        for (row, trace) in done.into_iter().flatten() {
            if let Some(e) = &row.error {
                log::warn!("grid point failed: {e}");
            }
            sink(&row)?;
            rows.push(row);
            traces.push(trace);
        }
    }
    Ok(SweepResult {
        rows,
        traces,
        provenance: Provenance {
            config_digest: spec.digest(),
            started,
            finished: now(),
            version: crate::VERSION.to_string(),
        },
    })
}
