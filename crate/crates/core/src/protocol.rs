//! Protocol models: measurements, post-selection maps, key-register pinching
//! and the linear constraints generated by observed statistics.
//!
//! Register order throughout is `A ⊗ B` for the shared state and
//! `K ⊗ A ⊗ B` for the post-selection output, where `K` is the two-level
//! key register.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::affine::orthonormalize;
use crate::channel::ObservationTable;
use crate::error::{CapError, Result};
use crate::linalg::{hermitian_eig, kron, pauli, CMatrix, DensityOperator, HermitianOperator};

const POVM_TOL: f64 = 1e-10;
const KRAUS_TOL: f64 = 1e-9;
const PINCH_TOL: f64 = 1e-10;
const DEPENDENCE_TOL: f64 = 1e-10;
const CONSISTENCY_TOL: f64 = 1e-8;

/// Measurement basis of a click outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    /// Bit parity `a ⊕ b` that Φ⁺ produces when both parties measure this basis.
    pub fn bell_parity(self) -> u8 {
        match self {
            Basis::Z | Basis::X => 0,
            Basis::Y => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Click { basis: Basis, bit: u8 },
    NoClick,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Click { basis, bit } => write!(f, "{basis:?}{bit}"),
            Outcome::NoClick => write!(f, "none"),
        }
    }
}

/// A complete measurement: PSD elements summing to the identity.
#[derive(Clone, Debug)]
pub struct PovmSet {
    elements: Vec<HermitianOperator>,
    labels: Vec<Outcome>,
}

impl PovmSet {
    pub fn new(elements: Vec<HermitianOperator>, labels: Vec<Outcome>) -> Result<Self> {
        if elements.is_empty() || elements.len() != labels.len() {
            return Err(CapError::Config("POVM needs one label per element".into()));
        }
        let dim = elements[0].dim();
        let mut sum = HermitianOperator::zeros(dim);
        for (k, e) in elements.iter().enumerate() {
            if e.dim() != dim {
                return Err(CapError::Shape(format!(
                    "POVM element {k} has dim {}",
                    e.dim()
                )));
            }
            let lmin = hermitian_eig(e)?.min_eigenvalue();
            if lmin < -POVM_TOL {
                return Err(CapError::Config(format!(
                    "POVM element {k} ({}) is not PSD (eigenvalue {lmin:.3e})",
                    labels[k]
                )));
            }
            sum = &sum + e;
        }
        let defect = sum.max_diff(&HermitianOperator::identity(dim));
        if defect > POVM_TOL {
            return Err(CapError::Config(format!(
                "POVM elements do not sum to identity (defect {defect:.3e})"
            )));
        }
        Ok(Self { elements, labels })
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn labels(&self) -> &[Outcome] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }
}

/// Completely positive trace-nonincreasing map `X ↦ Σ_m K_m X K_m†`.
#[derive(Clone, Debug)]
pub struct KrausMap {
    operators: Vec<CMatrix>,
    input_dim: usize,
    output_dim: usize,
    trace_preserving: bool,
}

impl KrausMap {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| CapError::Config("Kraus map needs at least one operator".into()))?;
        let (output_dim, input_dim) = first.shape();
        let mut gram = CMatrix::zeros(input_dim, input_dim);
        for k in &operators {
            if k.shape() != (output_dim, input_dim) {
                return Err(CapError::Shape("Kraus operators differ in shape".into()));
            }
            gram += k.adjoint() * k;
        }
        let gram = HermitianOperator::hermitize(gram);
        let lmax = hermitian_eig(&gram)?.max_eigenvalue();
        if lmax > 1.0 + KRAUS_TOL {
            return Err(CapError::Config(format!(
                "Kraus map increases trace (Σ K†K has eigenvalue {lmax})"
            )));
        }
        let trace_preserving = gram.max_diff(&HermitianOperator::identity(input_dim)) <= KRAUS_TOL;
        Ok(Self {
            operators,
            input_dim,
            output_dim,
            trace_preserving,
        })
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    pub fn apply(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        if x.dim() != self.input_dim {
            return Err(CapError::Shape(format!(
                "Kraus map takes {}-dim input, got {}",
                self.input_dim,
                x.dim()
            )));
        }
        let mut out = CMatrix::zeros(self.output_dim, self.output_dim);
        for k in &self.operators {
            out += k * x.matrix() * k.adjoint();
        }
        Ok(HermitianOperator::hermitize(out))
    }

    /// Adjoint map `Y ↦ Σ_m K_m† Y K_m`.
    pub fn adjoint(&self, y: &HermitianOperator) -> Result<HermitianOperator> {
        if y.dim() != self.output_dim {
            return Err(CapError::Shape(format!(
                "adjoint Kraus map takes {}-dim input, got {}",
                self.output_dim,
                y.dim()
            )));
        }
        let mut out = CMatrix::zeros(self.input_dim, self.input_dim);
        for k in &self.operators {
            out += k.adjoint() * y.matrix() * k;
        }
        Ok(HermitianOperator::hermitize(out))
    }
}

/// Orthogonal projectors summing to the identity; `Z(X) = Σ κ X κ`.
#[derive(Clone, Debug)]
pub struct PinchingSet {
    projectors: Vec<HermitianOperator>,
}

impl PinchingSet {
    pub fn new(projectors: Vec<HermitianOperator>) -> Result<Self> {
        let dim = projectors
            .first()
            .ok_or_else(|| CapError::Config("pinching needs at least one projector".into()))?
            .dim();
        let mut sum = HermitianOperator::zeros(dim);
        for (a, pa) in projectors.iter().enumerate() {
            if pa.dim() != dim {
                return Err(CapError::Shape(
                    "pinching projectors differ in dimension".into(),
                ));
            }
            let sq = HermitianOperator::hermitize(pa.matrix() * pa.matrix());
            if sq.max_diff(pa) > PINCH_TOL {
                return Err(CapError::Config(format!(
                    "pinching element {a} is not idempotent"
                )));
            }
            for pb in projectors.iter().skip(a + 1) {
                let prod = pa.matrix() * pb.matrix();
                if prod.iter().any(|z| z.norm() > PINCH_TOL) {
                    return Err(CapError::Config(
                        "pinching projectors are not orthogonal".into(),
                    ));
                }
            }
            sum = &sum + pa;
        }
        if sum.max_diff(&HermitianOperator::identity(dim)) > PINCH_TOL {
            return Err(CapError::Config(
                "pinching projectors do not sum to identity".into(),
            ));
        }
        Ok(Self { projectors })
    }

    pub fn projectors(&self) -> &[HermitianOperator] {
        &self.projectors
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn apply(&self, x: &HermitianOperator) -> HermitianOperator {
        let mut out = CMatrix::zeros(x.dim(), x.dim());
        for p in &self.projectors {
            out += p.matrix() * x.matrix() * p.matrix();
        }
        HermitianOperator::hermitize(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolKind {
    #[serde(rename = "dl04")]
    Dl04,
    #[serde(rename = "dl04-6state")]
    Dl04SixState,
    #[serde(rename = "dl04-mismatch")]
    Dl04Mismatch,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Dl04 => "dl04",
            ProtocolKind::Dl04SixState => "dl04-6state",
            ProtocolKind::Dl04Mismatch => "dl04-mismatch",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = CapError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dl04" => Ok(ProtocolKind::Dl04),
            "dl04-6state" => Ok(ProtocolKind::Dl04SixState),
            "dl04-mismatch" => Ok(ProtocolKind::Dl04Mismatch),
            other => Err(CapError::Config(format!("unknown protocol '{other}'"))),
        }
    }
}

/// How the mismatch model assigns detectors to outcomes.
///
/// `Corrected` uses one detector per bit value: bit 0 (`|0⟩`, `|+⟩`) sees the
/// high efficiency `η_big`, bit 1 (`|1⟩`, `|−⟩`) sees `η·η_big`. `Verbatim`
/// reproduces the printed operator list, where the second z element sits on
/// `|0⟩` and both x elements carry `η·η_big`; it is kept for auditing and is
/// rejected whenever it fails to be a valid POVM.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PovmMode {
    #[default]
    Corrected,
    Verbatim,
}

impl FromStr for PovmMode {
    type Err = CapError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(PovmMode::Corrected),
            "verbatim" => Ok(PovmMode::Verbatim),
            other => Err(CapError::Config(format!("unknown POVM mode '{other}'"))),
        }
    }
}

/// Everything the optimizer needs to know about a protocol.
#[derive(Clone, Debug)]
pub struct ProtocolSpec {
    name: String,
    kind: ProtocolKind,
    dim_a: usize,
    dim_b: usize,
    alice: PovmSet,
    bob: PovmSet,
    post_selection: KrausMap,
    pinching: PinchingSet,
    params: BTreeMap<String, f64>,
}

impl ProtocolSpec {
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }
    pub fn dim_a(&self) -> usize {
        self.dim_a
    }
    pub fn dim_b(&self) -> usize {
        self.dim_b
    }
    /// Dimension of the shared state `ρ_AB`.
    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }
    pub fn alice(&self) -> &PovmSet {
        &self.alice
    }
    pub fn bob(&self) -> &PovmSet {
        &self.bob
    }
    pub fn post_selection(&self) -> &KrausMap {
        &self.post_selection
    }
    pub fn pinching(&self) -> &PinchingSet {
        &self.pinching
    }
    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }
    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }
}

fn psd_sqrt(m: &HermitianOperator) -> Result<CMatrix> {
    Ok(hermitian_eig(m)?.map(|l| l.max(0.0).sqrt()).into_matrix())
}

/// Embeds a qubit operator into the qubit block of `qubit ⊕ vacuum`.
fn embed_with_vacuum(q: &HermitianOperator) -> HermitianOperator {
    let mut m = CMatrix::zeros(3, 3);
    m.view_mut((0, 0), (2, 2)).copy_from(q.matrix());
    HermitianOperator::hermitize(m)
}

/// One key-generating basis: Alice's two bit elements and Bob's basis
/// marginal `F^B_{b,0} + F^B_{b,1}`.
struct KeyBranch<'a> {
    alice_bit0: &'a HermitianOperator,
    alice_bit1: &'a HermitianOperator,
    bob_marginal: HermitianOperator,
}

/// `K_b = (|0⟩_K ⊗ √F^A_{b,0} + |1⟩_K ⊗ √F^A_{b,1}) ⊗ √(F^B_{b,0}+F^B_{b,1}) / √norm`.
fn key_kraus(branches: &[KeyBranch<'_>], norm: f64) -> Result<KrausMap> {
    let s = 1.0 / norm.sqrt();
    let mut ops = Vec::with_capacity(branches.len());
    for br in branches {
        let a0 = psd_sqrt(br.alice_bit0)?;
        let a1 = psd_sqrt(br.alice_bit1)?;
        let da = a0.nrows();
        let mut stacked = CMatrix::zeros(2 * da, da);
        stacked.view_mut((0, 0), (da, da)).copy_from(&a0);
        stacked.view_mut((da, 0), (da, da)).copy_from(&a1);
        let b = psd_sqrt(&br.bob_marginal)?;
        ops.push(stacked.kronecker(&b).scale(s));
    }
    KrausMap::new(ops)
}

fn key_pinching(dim_ab: usize) -> Result<PinchingSet> {
    let projectors = (0..2)
        .map(|l| {
            let kl =
                HermitianOperator::from_diagonal(&[(l == 0) as u8 as f64, (l == 1) as u8 as f64]);
            kron(&kl, &HermitianOperator::identity(dim_ab))
        })
        .collect();
    PinchingSet::new(projectors)
}

fn weighted_basis(basis: Basis, weight: f64) -> [(HermitianOperator, Outcome); 2] {
    [0u8, 1].map(|bit| {
        (
            pauli::basis_projector(basis, bit).scale(weight),
            Outcome::Click { basis, bit },
        )
    })
}

fn povm_from(pairs: Vec<(HermitianOperator, Outcome)>) -> Result<PovmSet> {
    let (e, l) = pairs.into_iter().unzip();
    PovmSet::new(e, l)
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(CapError::Config(format!("{name} = {v} must lie in (0, 1)")));
    }
    Ok(())
}

fn half_open_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(CapError::Config(format!("{name} = {v} must lie in (0, 1]")));
    }
    Ok(())
}

/// Entanglement-based DL04 with z/x checking weighted `p_z` / `1 − p_z`.
pub fn build_dl04(p_z: f64) -> Result<ProtocolSpec> {
    open_unit("p_z", p_z)?;
    let p_x = 1.0 - p_z;
    let mut pairs = weighted_basis(Basis::Z, p_z).to_vec();
    pairs.extend(weighted_basis(Basis::X, p_x));
    let alice = povm_from(pairs.clone())?;
    let bob = povm_from(pairs)?;
    let e = alice.elements();
    let branches = [
        KeyBranch {
            alice_bit0: &e[0],
            alice_bit1: &e[1],
            bob_marginal: &bob.elements()[0] + &bob.elements()[1],
        },
        KeyBranch {
            alice_bit0: &e[2],
            alice_bit1: &e[3],
            bob_marginal: &bob.elements()[2] + &bob.elements()[3],
        },
    ];
    let post_selection = key_kraus(&branches, p_z * p_z + p_x * p_x)?;
    Ok(ProtocolSpec {
        name: ProtocolKind::Dl04.as_str().into(),
        kind: ProtocolKind::Dl04,
        dim_a: 2,
        dim_b: 2,
        pinching: key_pinching(4)?,
        alice,
        bob,
        post_selection,
        params: BTreeMap::from([("p_z".into(), p_z), ("p_x".into(), p_x)]),
    })
}

/// DL04 with an additional check-only σ_y basis of weight `1 − p_z − p_x`.
pub fn build_dl04_six_state(p_z: f64, p_x: f64) -> Result<ProtocolSpec> {
    open_unit("p_z", p_z)?;
    let p_y = 1.0 - p_z - p_x;
    if !(0.0..1.0).contains(&p_x) || !(p_y > 0.0) || p_z + 2.0 * p_x > 1.0 + 1e-15 {
        return Err(CapError::Config(format!(
            "six-state weights p_z={p_z}, p_x={p_x} need p_x ≥ 0, p_y > 0 and p_z + 2 p_x ≤ 1"
        )));
    }
    let mut pairs = weighted_basis(Basis::Z, p_z).to_vec();
    pairs.extend(weighted_basis(Basis::X, p_x));
    pairs.extend(weighted_basis(Basis::Y, p_y));
    let alice = povm_from(pairs.clone())?;
    let bob = povm_from(pairs)?;
    let e = alice.elements();
    let mut branches = vec![KeyBranch {
        alice_bit0: &e[0],
        alice_bit1: &e[1],
        bob_marginal: &bob.elements()[0] + &bob.elements()[1],
    }];
    if p_x > 0.0 {
        branches.push(KeyBranch {
            alice_bit0: &e[2],
            alice_bit1: &e[3],
            bob_marginal: &bob.elements()[2] + &bob.elements()[3],
        });
    }
    let post_selection = key_kraus(&branches, p_z * p_z + p_x * p_x)?;
    Ok(ProtocolSpec {
        name: ProtocolKind::Dl04SixState.as_str().into(),
        kind: ProtocolKind::Dl04SixState,
        dim_a: 2,
        dim_b: 2,
        pinching: key_pinching(4)?,
        alice,
        bob,
        post_selection,
        params: BTreeMap::from([
            ("p_z".into(), p_z),
            ("p_x".into(), p_x),
            ("p_y".into(), p_y),
        ]),
    })
}

/// DL04 with lossy, mismatched detectors on Alice's side.
///
/// Alice's system is `qubit ⊕ vacuum` (dimension 3, vacuum last); Bob's
/// detectors are ideal.
pub fn build_dl04_mismatch(
    p_z: f64,
    eta_big: f64,
    eta: f64,
    mode: PovmMode,
) -> Result<ProtocolSpec> {
    open_unit("p_z", p_z)?;
    half_open_unit("eta_big", eta_big)?;
    half_open_unit("eta", eta)?;
    let p_x = 1.0 - p_z;
    let proj = pauli::basis_projector;
    let (f1, f2, f3, f4) = match mode {
        PovmMode::Corrected => (
            proj(Basis::Z, 0).scale(p_z * eta_big),
            proj(Basis::Z, 1).scale(p_z * eta_big * eta),
            proj(Basis::X, 0).scale(p_x * eta_big),
            proj(Basis::X, 1).scale(p_x * eta_big * eta),
        ),
        PovmMode::Verbatim => (
            proj(Basis::Z, 0).scale(p_z * eta_big),
            proj(Basis::Z, 0).scale(p_z * eta_big * eta),
            proj(Basis::X, 0).scale(p_x * eta_big * eta),
            proj(Basis::X, 1).scale(p_x * eta_big * eta),
        ),
    };
    let clicks: Vec<HermitianOperator> = [f1, f2, f3, f4].iter().map(embed_with_vacuum).collect();
    let mut f5 = HermitianOperator::identity(3);
    for f in &clicks {
        f5 = &f5 - f;
    }
    let mut elements = clicks;
    elements.push(f5);
    let labels = vec![
        Outcome::Click {
            basis: Basis::Z,
            bit: 0,
        },
        Outcome::Click {
            basis: Basis::Z,
            bit: 1,
        },
        Outcome::Click {
            basis: Basis::X,
            bit: 0,
        },
        Outcome::Click {
            basis: Basis::X,
            bit: 1,
        },
        Outcome::NoClick,
    ];
    let alice = PovmSet::new(elements, labels)?;

    let mut bob_pairs = weighted_basis(Basis::Z, p_z).to_vec();
    bob_pairs.extend(weighted_basis(Basis::X, p_x));
    let bob = povm_from(bob_pairs)?;

    let e = alice.elements();
    let b = bob.elements();
    let branches = [
        KeyBranch {
            alice_bit0: &e[0],
            alice_bit1: &e[1],
            bob_marginal: &b[0] + &b[1],
        },
        KeyBranch {
            alice_bit0: &e[2],
            alice_bit1: &e[3],
            bob_marginal: &b[2] + &b[3],
        },
    ];
    let post_selection = key_kraus(&branches, p_z * p_z + p_x * p_x)?;
    let mode_flag = match mode {
        PovmMode::Corrected => 0.0,
        PovmMode::Verbatim => 1.0,
    };
    Ok(ProtocolSpec {
        name: ProtocolKind::Dl04Mismatch.as_str().into(),
        kind: ProtocolKind::Dl04Mismatch,
        dim_a: 3,
        dim_b: 2,
        pinching: key_pinching(6)?,
        alice,
        bob,
        post_selection,
        params: BTreeMap::from([
            ("p_z".into(), p_z),
            ("eta_big".into(), eta_big),
            ("eta".into(), eta),
            ("verbatim".into(), mode_flag),
        ]),
    })
}

/// Serializable protocol selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub name: ProtocolKind,
    #[serde(default = "default_p_z")]
    pub p_z: f64,
    /// x-basis weight for the six-state variant (default 0.0005).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_x: Option<f64>,
    #[serde(default)]
    pub povm_mode: PovmMode,
}

pub fn default_p_z() -> f64 {
    0.999
}

pub const DEFAULT_SIX_STATE_P_X: f64 = 0.0005;

impl ProtocolConfig {
    pub fn new(name: ProtocolKind) -> Self {
        Self {
            name,
            p_z: default_p_z(),
            p_x: None,
            povm_mode: PovmMode::Corrected,
        }
    }

    /// Builds the protocol model; `eta_big`/`eta` are only read by the mismatch model.
    pub fn build(&self, eta_big: Option<f64>, eta: Option<f64>) -> Result<ProtocolSpec> {
        match self.name {
            ProtocolKind::Dl04 => build_dl04(self.p_z),
            ProtocolKind::Dl04SixState => {
                build_dl04_six_state(self.p_z, self.p_x.unwrap_or(DEFAULT_SIX_STATE_P_X))
            }
            ProtocolKind::Dl04Mismatch => build_dl04_mismatch(
                self.p_z,
                eta_big.unwrap_or(1.0),
                eta.unwrap_or(1.0),
                self.povm_mode,
            ),
        }
    }
}

/// Linear constraints `tr(Γ_k ρ) = p_k` on the shared state.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    observables: Vec<HermitianOperator>,
    values: Vec<f64>,
    includes_trace_constraint: bool,
}

impl ConstraintSet {
    /// Raw constructor; no pruning or consistency checks.
    pub fn new(
        observables: Vec<HermitianOperator>,
        values: Vec<f64>,
        includes_trace_constraint: bool,
    ) -> Result<Self> {
        if observables.len() != values.len() {
            return Err(CapError::Shape("one value per observable required".into()));
        }
        if let Some(first) = observables.first() {
            if observables.iter().any(|o| o.dim() != first.dim()) {
                return Err(CapError::Shape(
                    "constraint observables differ in dimension".into(),
                ));
            }
        }
        Ok(Self {
            observables,
            values,
            includes_trace_constraint,
        })
    }

    /// Only the trace-one constraint.
    pub fn trace_only(dim: usize) -> Self {
        Self {
            observables: vec![HermitianOperator::identity(dim)],
            values: vec![1.0],
            includes_trace_constraint: true,
        }
    }

    pub fn observables(&self) -> &[HermitianOperator] {
        &self.observables
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn includes_trace_constraint(&self) -> bool {
        self.includes_trace_constraint
    }

    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.observables.first().map(|o| o.dim())
    }

    /// `max_k |tr(Γ_k ρ) − p_k|`.
    pub fn residual(&self, rho: &HermitianOperator) -> f64 {
        self.observables
            .iter()
            .zip(&self.values)
            .map(|(g, p)| (crate::linalg::hs_inner_unchecked(g.matrix(), rho.matrix()) - p).abs())
            .fold(0.0, f64::max)
    }
}

/// One constraint per POVM pair plus trace one, pruned of linear dependencies.
pub fn constraints_from_observations(
    spec: &ProtocolSpec,
    table: &ObservationTable,
) -> Result<ConstraintSet> {
    let (na, nb) = (spec.alice.len(), spec.bob.len());
    if table.shape() != (na, nb) {
        return Err(CapError::Shape(format!(
            "observation table is {:?}, protocol has {na}x{nb} outcomes",
            table.shape()
        )));
    }
    let mut observables = vec![HermitianOperator::identity(spec.dim())];
    let mut values = vec![1.0];
    for (i, fa) in spec.alice.elements.iter().enumerate() {
        for (j, fb) in spec.bob.elements.iter().enumerate() {
            let p = table.get(i, j);
            if !(-1e-12..=1.0 + 1e-12).contains(&p) || p.is_nan() {
                return Err(CapError::InconsistentObservations(format!(
                    "Pr[{i},{j}] = {p} is not a probability"
                )));
            }
            observables.push(kron(fa, fb));
            values.push(p);
        }
    }
    let refs: Vec<&CMatrix> = observables.iter().map(|o| o.matrix()).collect();
    let ortho = orthonormalize(&refs, &values, DEPENDENCE_TOL);
    if ortho.max_inconsistency > CONSISTENCY_TOL {
        let row = ortho.worst_row.unwrap_or(0);
        return Err(CapError::InconsistentObservations(format!(
            "constraint {row} is implied by the others to within {:.3e} of its observed value",
            ortho.max_inconsistency
        )));
    }
    let mut keep_obs = Vec::with_capacity(ortho.retained.len());
    let mut keep_val = Vec::with_capacity(ortho.retained.len());
    for &k in &ortho.retained {
        keep_obs.push(observables[k].clone());
        keep_val.push(values[k]);
    }
    ConstraintSet::new(keep_obs, keep_val, true)
}

/// `G(ρ) = Σ_m K_m ρ K_m†`.
pub fn apply_post_selection(
    spec: &ProtocolSpec,
    rho: &DensityOperator,
) -> Result<HermitianOperator> {
    spec.post_selection.apply(rho)
}
