//! Noise channels acting on the shared Bell pair, and the joint statistics
//! they generate.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CapError, Result};
use crate::fmt::format_g10;
use crate::linalg::{
    c, hs_inner_unchecked, kron, CMatrix, CVector, DensityOperator, HermitianOperator,
};
use crate::protocol::{Basis, Outcome, ProtocolKind, ProtocolSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    IsotropicDepolarizing,
    /// White noise restricted to the non-vacuum block of Alice's system.
    VacuumDepolarizing,
}

impl FromStr for ChannelKind {
    type Err = CapError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isotropic-depolarizing" | "isotropic" => Ok(Self::IsotropicDepolarizing),
            "vacuum-depolarizing" => Ok(Self::VacuumDepolarizing),
            other => Err(CapError::Config(format!("unknown channel kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    pub epsilon: f64,
}

impl ChannelModel {
    pub fn new(kind: ChannelKind, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(CapError::Config(format!(
                "epsilon = {epsilon} outside [0, 1]"
            )));
        }
        Ok(Self { kind, epsilon })
    }

    pub fn isotropic(epsilon: f64) -> Result<Self> {
        Self::new(ChannelKind::IsotropicDepolarizing, epsilon)
    }

    pub fn vacuum_depolarizing(epsilon: f64) -> Result<Self> {
        Self::new(ChannelKind::VacuumDepolarizing, epsilon)
    }

    /// The channel each protocol is studied under: vacuum-aware noise for the
    /// mismatch model, isotropic noise otherwise.
    pub fn for_protocol(kind: ProtocolKind, epsilon: f64) -> Result<Self> {
        match kind {
            ProtocolKind::Dl04Mismatch => Self::vacuum_depolarizing(epsilon),
            _ => Self::isotropic(epsilon),
        }
    }
}

/// `|Φ⁺⟩⟨Φ⁺|` on the qubit pair, with a zero vacuum level when `dim_a = 3`.
pub fn bell_state(dim_a: usize) -> Result<DensityOperator> {
    if dim_a != 2 && dim_a != 3 {
        return Err(CapError::Config(format!(
            "Bell state needs dim_A in {{2, 3}}, got {dim_a}"
        )));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = CVector::zeros(dim_a * 2);
    // |00⟩ and |11⟩ in A ⊗ B with B a qubit.
    v[0] = c(r, 0.0);
    v[3] = c(r, 0.0);
    DensityOperator::pure(&v)
}

pub fn apply_channel(
    ch: &ChannelModel,
    rho: &DensityOperator,
    dims: [usize; 2],
) -> Result<DensityOperator> {
    let [da, db] = dims;
    let n = da * db;
    if rho.dim() != n {
        return Err(CapError::Shape(format!(
            "state is {}-dim, channel expects {da}x{db}",
            rho.dim()
        )));
    }
    let eps = ch.epsilon;
    let noise = match ch.kind {
        ChannelKind::IsotropicDepolarizing => HermitianOperator::identity(n).scale(1.0 / n as f64),
        ChannelKind::VacuumDepolarizing => {
            if da < 3 {
                return Err(CapError::Config(
                    "vacuum-depolarizing noise needs a vacuum level (dim_A ≥ 3); use isotropic"
                        .into(),
                ));
            }
            // Alice's vacuum is her last level.
            let mut diag = vec![1.0; da];
            diag[da - 1] = 0.0;
            let ia = HermitianOperator::from_diagonal(&diag);
            kron(&ia, &HermitianOperator::identity(db)).scale(1.0 / (db * (da - 1)) as f64)
        }
    };
    let out = noise.lerp(rho, eps);
    if ch.kind == ChannelKind::VacuumDepolarizing {
        let tr = out.trace();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(CapError::Domain(format!(
                "vacuum-depolarizing output has trace {tr}; the input carries a vacuum component"
            )));
        }
    }
    Ok(DensityOperator::new_unchecked(out))
}

/// Joint outcome probabilities, indexed by (Alice outcome, Bob outcome).
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationTable {
    pr: Vec<Vec<f64>>,
}

impl ObservationTable {
    pub fn new(pr: Vec<Vec<f64>>) -> Result<Self> {
        let cols = pr.first().map(|r| r.len()).unwrap_or(0);
        if pr.is_empty() || cols == 0 || pr.iter().any(|r| r.len() != cols) {
            return Err(CapError::Shape(
                "observation table must be a non-empty rectangle".into(),
            ));
        }
        for (i, row) in pr.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                if !p.is_finite() || *p < -1e-12 {
                    return Err(CapError::Domain(format!("Pr[{i},{j}] = {p} is negative")));
                }
            }
        }
        Ok(Self { pr })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.pr.len(), self.pr[0].len())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pr[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.pr
    }

    pub fn total(&self) -> f64 {
        self.pr.iter().flatten().sum()
    }

    /// Entry-wise scaling, used to build deliberately unphysical tables.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.pr
                .iter()
                .map(|r| r.iter().map(|p| p * s).collect())
                .collect(),
        )
    }

    /// CSV with header `i,j,pr`, one row per outcome pair.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["i", "j", "pr"])?;
        for (i, row) in self.pr.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                wr.write_record([i.to_string(), j.to_string(), format_g10(*p)])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["i", "j", "pr"] {
            return Err(CapError::Parse(format!(
                "expected header i,j,pr, got {headers:?}"
            )));
        }
        let mut entries = Vec::new();
        let (mut ni, mut nj) = (0usize, 0usize);
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parse_idx = |k: usize| -> Result<usize> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| CapError::Parse(format!("row {}: bad index", line + 2)))
            };
            let i = parse_idx(0)?;
            let j = parse_idx(1)?;
            let p: f64 = rec
                .get(2)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| CapError::Parse(format!("row {}: bad probability", line + 2)))?;
            ni = ni.max(i + 1);
            nj = nj.max(j + 1);
            entries.push((i, j, p));
        }
        if entries.len() != ni * nj {
            return Err(CapError::Parse(format!(
                "expected {} rows for a {ni}x{nj} table, got {}",
                ni * nj,
                entries.len()
            )));
        }
        let mut pr = vec![vec![f64::NAN; nj]; ni];
        for (i, j, p) in entries {
            if !pr[i][j].is_nan() {
                return Err(CapError::Parse(format!("duplicate entry ({i},{j})")));
            }
            pr[i][j] = p;
        }
        Self::new(pr)
    }
}

/// `Pr_ij = tr(E(Φ⁺) F^A_i ⊗ F^B_j)`.
pub fn simulate_observations(spec: &ProtocolSpec, ch: &ChannelModel) -> Result<ObservationTable> {
    let rho = apply_channel(ch, &bell_state(spec.dim_a())?, [spec.dim_a(), spec.dim_b()])?;
    observations_of(spec, &rho)
}

/// Statistics generated by an arbitrary shared state.
pub fn observations_of(spec: &ProtocolSpec, rho: &HermitianOperator) -> Result<ObservationTable> {
    if rho.dim() != spec.dim() {
        return Err(CapError::Shape(format!(
            "state is {}-dim, protocol {}",
            rho.dim(),
            spec.dim()
        )));
    }
    let pr = spec
        .alice()
        .elements()
        .iter()
        .map(|fa| {
            spec.bob()
                .elements()
                .iter()
                .map(|fb| {
                    let m: CMatrix = kron(fa, fb).into_matrix();
                    hs_inner_unchecked(&m, rho.matrix())
                })
                .collect()
        })
        .collect();
    ObservationTable::new(pr)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QberMode {
    #[default]
    Max,
    Mean,
    ZOnly,
}

impl FromStr for QberMode {
    type Err = CapError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Self::Max),
            "mean" => Ok(Self::Mean),
            "z-only" => Ok(Self::ZOnly),
            other => Err(CapError::Config(format!("unknown QBER mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QberReport {
    pub q_z: f64,
    pub q_x: f64,
    pub q_y: Option<f64>,
    pub q_f: f64,
}

/// Error rate in one basis: joint weight of bit pairs whose parity differs
/// from the Bell-state parity, over the total matched-basis weight.
fn basis_qber(spec: &ProtocolSpec, pr: &ObservationTable, basis: Basis) -> Result<Option<f64>> {
    let mut matched = 0.0;
    let mut wrong = 0.0;
    let mut present = false;
    for (i, la) in spec.alice().labels().iter().enumerate() {
        let Outcome::Click { basis: ba, bit: a } = *la else {
            continue;
        };
        if ba != basis {
            continue;
        }
        for (j, lb) in spec.bob().labels().iter().enumerate() {
            let Outcome::Click { basis: bb, bit: b } = *lb else {
                continue;
            };
            if bb != basis {
                continue;
            }
            present = true;
            let p = pr.get(i, j);
            matched += p;
            if a ^ b != basis.bell_parity() {
                wrong += p;
            }
        }
    }
    if !present {
        return Ok(None);
    }
    if matched < 1e-12 {
        return Err(CapError::DegenerateStatistics(format!(
            "matched {basis:?}-basis probability {matched:.3e} is too small for an error rate"
        )));
    }
    Ok(Some(wrong / matched))
}

pub fn extract_qber(
    spec: &ProtocolSpec,
    pr: &ObservationTable,
    mode: QberMode,
) -> Result<QberReport> {
    if pr.shape() != (spec.alice().len(), spec.bob().len()) {
        return Err(CapError::Shape(format!(
            "table is {:?}, protocol has {}x{} outcomes",
            pr.shape(),
            spec.alice().len(),
            spec.bob().len()
        )));
    }
    let q_z = basis_qber(spec, pr, Basis::Z)?
        .ok_or_else(|| CapError::DegenerateStatistics("protocol has no z outcomes".into()))?;
    // An unweighted x basis (six-state with p_x = 0) reports the z value.
    let q_x = match basis_qber(spec, pr, Basis::X) {
        Ok(Some(q)) => q,
        Ok(None) => q_z,
        Err(CapError::DegenerateStatistics(_)) if spec.param("p_x") == Some(0.0) => q_z,
        Err(e) => return Err(e),
    };
    let q_y = basis_qber(spec, pr, Basis::Y)?;
    let q_f = match mode {
        QberMode::Max => q_z.max(q_x).max(q_y.unwrap_or(0.0)),
        QberMode::Mean => {
            let (s, n) = q_y.map_or((q_z + q_x, 2.0), |y| (q_z + q_x + y, 3.0));
            s / n
        }
        QberMode::ZOnly => q_z,
    };
    Ok(QberReport { q_z, q_x, q_y, q_f })
}
