//! The spectrahedron `D = {ρ ⪰ 0 : tr(Γ_k ρ) = p_k}` and Euclidean projection onto it.
//!
//! Observed statistics often force `D` onto a proper face of the PSD cone
//! (a Bell state at zero noise, an unpopulated vacuum level). Alternating
//! projections converge sublinearly on such sets, so the set is first reduced
//! to its minimal face: an operator `X₀ ⪰ 0` in the constraint span whose
//! value on every feasible point is zero proves that `D` lives on `ker X₀`.
//! The projection then runs in the reduced coordinates `ρ = V ρ̃ V†`.
//! It is computed by a semismooth Newton method on the dual, with Dykstra's
//! alternation as a fallback that also detects empty sets.

use log::{debug, warn};
use nalgebra::DMatrix;

use crate::affine::{orthonormalize, AffineConstraints};
use crate::error::{CapError, Result};
use crate::linalg::{
    hermitian_eig, hs_inner_unchecked, CMatrix, DensityOperator, HermitianOperator,
};
use crate::protocol::ConstraintSet;

pub const DEFAULT_FEAS_TOL: f64 = 1e-9;

const DEPENDENCE_TOL: f64 = 1e-10;
const CONSISTENCY_TOL: f64 = 1e-8;
const MAX_ALTERNATIONS: usize = 10_000;
const PLATEAU_CHECK_EVERY: usize = 1_000;
const PLATEAU_RESIDUAL: f64 = 1e-7;
const ROUGH_ALTERNATIONS: usize = 3_000;
const HINT_KERNEL_REL: f64 = 1e-10;
const ROUGH_KERNEL_REL: [f64; 5] = [1e-10, 1e-8, 1e-6, 1e-4, 1e-3];
const NULLSPACE_REL: f64 = 1e-10;
const CERT_REL: f64 = 1e-10;
const FACE_KERNEL_REL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 200;

#[derive(Clone, Debug)]
pub struct FeasibleSet {
    constraints: ConstraintSet,
    dim: usize,
    feas_tol: f64,
    /// Isometry onto the minimal face; `None` means the full space.
    face: Option<CMatrix>,
    reduced: AffineConstraints,
}

fn lift(v: &Option<CMatrix>, x: &CMatrix) -> CMatrix {
    match v {
        Some(v) => v * x * v.adjoint(),
        None => x.clone(),
    }
}

fn compress(v: &Option<CMatrix>, x: &CMatrix) -> CMatrix {
    match v {
        Some(v) => v.adjoint() * x * v,
        None => x.clone(),
    }
}

fn hermitian(x: CMatrix) -> HermitianOperator {
    HermitianOperator::hermitize(x)
}

fn affine_from(constraints: &ConstraintSet, v: &Option<CMatrix>) -> Result<AffineConstraints> {
    let mats: Vec<CMatrix> = constraints
        .observables()
        .iter()
        .map(|g| compress(v, g.matrix()))
        .collect();
    let refs: Vec<&CMatrix> = mats.iter().collect();
    let o = orthonormalize(&refs, constraints.values(), DEPENDENCE_TOL);
    if o.max_inconsistency > CONSISTENCY_TOL {
        return Err(CapError::ConstraintInfeasible {
            residual: o.max_inconsistency,
            iterations: 0,
        });
    }
    Ok(o.affine)
}

enum DykstraOutcome {
    Converged(CMatrix),
    Stalled {
        best: CMatrix,
        residual: f64,
        iterations: usize,
        plateau: bool,
    },
}

/// Dykstra alternation between an affine set and the PSD cone. Returns the
/// last affine iterate once its most negative eigenvalue is above `-tol`.
fn dykstra(
    affine: &AffineConstraints,
    start: &CMatrix,
    tol: f64,
    budget: usize,
    detect_plateau: bool,
) -> Result<DykstraOutcome> {
    let n = start.nrows();
    let mut x = start.clone();
    let mut q = CMatrix::zeros(n, n);
    let mut best: Option<(f64, CMatrix)> = None;
    let mut checkpoint = f64::INFINITY;
    for it in 0..budget {
        let y = hermitian(affine.project(&x)).into_matrix();
        let ey = hermitian_eig(&hermitian(y.clone()))?;
        let lmin_y = ey.min_eigenvalue();
        let residual = (-lmin_y).max(0.0);
        if residual <= tol {
            return Ok(DykstraOutcome::Converged(y));
        }
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, y.clone()));
        }
        if detect_plateau && (it + 1) % PLATEAU_CHECK_EVERY == 0 {
            let r = best.as_ref().map(|b| b.0).unwrap_or(f64::INFINITY);
            if r > PLATEAU_RESIDUAL && r > 0.99 * checkpoint {
                return Ok(DykstraOutcome::Stalled {
                    best: best.map(|b| b.1).unwrap_or(y),
                    residual: r,
                    iterations: it + 1,
                    plateau: true,
                });
            }
            checkpoint = r;
        }
        let yq = &y + &q;
        let eig = if q.iter().all(|z| z.norm() == 0.0) {
            ey
        } else {
            hermitian_eig(&hermitian(yq.clone()))?
        };
        let z = eig.map(|l| l.max(0.0)).into_matrix();
        q = yq - &z;
        x = z;
    }
    let (residual, best) = best.expect("at least one alternation");
    Ok(DykstraOutcome::Stalled {
        best,
        residual,
        iterations: budget,
        plateau: false,
    })
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Semismooth Newton on the dual of `min ½‖X − M‖²` over `D`:
/// `θ(y) = ½‖Π₊(M + Σ y_k E_k)‖² − b·y`, whose gradient is the constraint
/// residual of `X(y) = Π₊(M + Σ y_k E_k)`. Every iterate is PSD, so only the
/// affine residual has to be driven down. Returns `None` when the iteration
/// does not reach `tol` (for instance on a set without interior).
fn dual_newton(affine: &AffineConstraints, start: &CMatrix, tol: f64) -> Result<Option<CMatrix>> {
    let basis = affine.basis();
    let b = affine.targets();
    let m = basis.len();
    let n = start.nrows();
    let shifted = |y: &[f64]| -> CMatrix {
        let mut x = start.clone();
        for (e, yk) in basis.iter().zip(y) {
            x += e.scale(*yk);
        }
        x
    };
    // Evaluates θ, the gradient and the spectral data at `y`.
    let eval =
        |y: &[f64]| -> Result<(f64, Vec<f64>, CMatrix, crate::linalg::SpectralDecomposition)> {
            let eig = hermitian_eig(&hermitian(shifted(y)))?;
            let xp = eig.map(|l| l.max(0.0)).into_matrix();
            let norm2: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).powi(2)).sum();
            let grad: Vec<f64> = basis
                .iter()
                .zip(b)
                .map(|(e, bk)| hs_inner_unchecked(e, &xp) - bk)
                .collect();
            let by: f64 = b.iter().zip(y).map(|(bk, yk)| bk * yk).sum();
            Ok((0.5 * norm2 - by, grad, xp, eig))
        };
    // Start where the first iterate is the affine projection of `start`.
    let mut y: Vec<f64> = basis
        .iter()
        .zip(b)
        .map(|(e, bk)| bk - hs_inner_unchecked(e, start))
        .collect();
    let (mut theta, mut grad, mut xp, mut eig) = eval(&y)?;
    for _ in 0..NEWTON_MAX_ITER {
        let gnorm = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
        if gnorm <= tol {
            return Ok(Some(xp));
        }
        // Generalized Jacobian of Π₊ in the eigenbasis: H ↦ Q(Ω ∘ Q†HQ)Q†.
        let lam = &eig.eigenvalues;
        let q = &eig.eigenvectors;
        let omega = DMatrix::from_fn(n, n, |i, j| {
            let (li, lj) = (lam[i], lam[j]);
            if li > 0.0 && lj > 0.0 {
                1.0
            } else if li <= 0.0 && lj <= 0.0 {
                0.0
            } else {
                (li.max(0.0) - lj.max(0.0)) / (li - lj)
            }
        });
        let rotated: Vec<CMatrix> = basis.iter().map(|e| q.adjoint() * e * q).collect();
        let mut v = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            for l in k..m {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += omega[(i, j)] * (rotated[k][(i, j)].conj() * rotated[l][(i, j)]).re;
                    }
                }
                v[(k, l)] = acc;
                v[(l, k)] = acc;
            }
        }
        let reg = gnorm.min(1e-2) * 1e-2;
        for k in 0..m {
            v[(k, k)] += reg;
        }
        let Some(chol) = v.cholesky() else {
            return Ok(None);
        };
        let g = nalgebra::DVector::from_vec(grad.clone());
        let d = -chol.solve(&g);
        let slope = g.dot(&d);
        if !(slope < 0.0) {
            return Ok(None);
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = y
                .iter()
                .zip(d.iter())
                .map(|(yk, dk)| yk + alpha * dk)
                .collect();
            let next = eval(&trial)?;
            // Close to the solution the decrease of θ is below its round-off;
            // the residual norm then decides.
            let within_roundoff = (next.0 - theta).abs() <= 1e-13 * (1.0 + theta.abs());
            let armijo = next.0 <= theta + 1e-4 * alpha * slope && !within_roundoff;
            let residual_drop = within_roundoff && l2(&next.1) <= (1.0 - 1e-4 * alpha) * l2(&grad);
            if armijo || residual_drop {
                y = trial;
                (theta, grad, xp, eig) = next;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // θ is flat to round-off; accept the point if it is good enough.
            let gnorm = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
            return Ok((gnorm <= tol).then_some(xp));
        }
    }
    Ok(None)
}

/// Orthonormal basis (columns) of the real null space of `a`.
fn real_null_space(a: DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let m = a.ncols();
    let a = if a.nrows() < m {
        let mut padded = DMatrix::zeros(m, m);
        padded.view_mut((0, 0), (a.nrows(), m)).copy_from(&a);
        padded
    } else {
        a
    };
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max().max(1.0);
    let cols: Vec<usize> = (0..m)
        .filter(|&k| svd.singular_values[k] <= rel_tol * smax)
        .collect();
    DMatrix::from_fn(m, cols.len(), |r, c| vt[(cols[c], r)])
}

enum Reduction {
    None,
    Face(CMatrix),
}

/// Looks for an exposing operator supported on `span(kernel)`.
fn expose(affine: &AffineConstraints, kernel: &CMatrix, range: &CMatrix) -> Result<Reduction> {
    let n = kernel.nrows();
    let basis = affine.basis();
    let m = basis.len();
    if kernel.ncols() == 0 || m == 0 {
        return Ok(Reduction::None);
    }
    // X = Σ x_k E_k is supported on the kernel iff X·range = 0.
    let rows = 2 * n * range.ncols();
    let mut a = DMatrix::zeros(rows.max(1), m);
    for (k, e) in basis.iter().enumerate() {
        let er = e * range;
        for (idx, z) in er.iter().enumerate() {
            a[(2 * idx, k)] = z.re;
            a[(2 * idx + 1, k)] = z.im;
        }
    }
    let null = real_null_space(a, NULLSPACE_REL);
    if null.ncols() == 0 {
        return Ok(Reduction::None);
    }
    let pk = kernel * kernel.adjoint();
    let mut x0 = CMatrix::zeros(n, n);
    for j in 0..null.ncols() {
        let mut w = CMatrix::zeros(n, n);
        for (k, e) in basis.iter().enumerate() {
            w += e.scale(null[(k, j)]);
        }
        let cf = hs_inner_unchecked(&w, &pk);
        x0 += w.scale(cf);
    }
    let x0 = hermitian(x0);
    let eig = hermitian_eig(&x0)?;
    let lmax = eig.max_eigenvalue();
    if lmax <= 0.0 {
        return Ok(Reduction::None);
    }
    let value = affine.value_of(x0.matrix()) / lmax;
    if eig.min_eigenvalue() < -CERT_REL * lmax {
        return Ok(Reduction::None);
    }
    if value < -CONSISTENCY_TOL {
        // A PSD operator with negative value on every feasible point.
        return Err(CapError::ConstraintInfeasible {
            residual: -value,
            iterations: 0,
        });
    }
    if value > CERT_REL {
        return Ok(Reduction::None);
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&k| eig.eigenvalues[k] <= FACE_KERNEL_REL * lmax)
        .collect();
    if keep.is_empty() {
        return Err(CapError::ConstraintInfeasible {
            residual: value.abs().max(f64::MIN_POSITIVE),
            iterations: 0,
        });
    }
    if keep.len() == n {
        return Ok(Reduction::None);
    }
    Ok(Reduction::Face(CMatrix::from_fn(n, keep.len(), |r, c| {
        eig.eigenvectors[(r, keep[c])]
    })))
}

/// Splits the eigenvectors of `tau` into (small-eigenvalue kernel, range).
fn split(tau: &HermitianOperator, rel: f64) -> Result<(CMatrix, CMatrix)> {
    let eig = hermitian_eig(tau)?;
    let n = tau.dim();
    let lmax = eig.max_eigenvalue().max(f64::MIN_POSITIVE);
    let ker: Vec<usize> = (0..n)
        .filter(|&k| eig.eigenvalues[k] <= rel * lmax)
        .collect();
    let ran: Vec<usize> = (0..n)
        .filter(|&k| eig.eigenvalues[k] > rel * lmax)
        .collect();
    let pick = |idx: &[usize]| CMatrix::from_fn(n, idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    Ok((pick(&ker), pick(&ran)))
}

impl FeasibleSet {
    /// Builds the set, reducing to its minimal face using a rough interior estimate.
    pub fn new(constraints: ConstraintSet, feas_tol: f64) -> Result<Self> {
        Self::build(constraints, feas_tol, None)
    }

    /// Like [`FeasibleSet::new`], with a known (possibly boundary) feasible
    /// state whose kernel suggests where the face lies. The hint is only a
    /// search direction: every reduction is certified from the constraints.
    pub fn with_hint(
        constraints: ConstraintSet,
        feas_tol: f64,
        hint: &HermitianOperator,
    ) -> Result<Self> {
        Self::build(constraints, feas_tol, Some(hint))
    }

    pub fn trace_only(dim: usize) -> Result<Self> {
        Self::new(ConstraintSet::trace_only(dim), DEFAULT_FEAS_TOL)
    }

    fn build(
        constraints: ConstraintSet,
        feas_tol: f64,
        hint: Option<&HermitianOperator>,
    ) -> Result<Self> {
        if !(feas_tol > 0.0) {
            return Err(CapError::Config(format!(
                "feasibility tolerance {feas_tol} must be positive"
            )));
        }
        let dim = constraints
            .dim()
            .ok_or_else(|| CapError::Config("feasible set needs at least one constraint".into()))?;
        if !constraints.includes_trace_constraint() {
            return Err(CapError::Config(
                "constraint set lacks the trace-one constraint".into(),
            ));
        }
        if let Some(h) = hint {
            if h.dim() != dim {
                return Err(CapError::Shape(format!(
                    "hint is {}-dim, constraints {dim}-dim",
                    h.dim()
                )));
            }
        }
        let mut face: Option<CMatrix> = None;
        let mut reduced = affine_from(&constraints, &None)?;
        loop {
            let n = face.as_ref().map_or(dim, |v| v.ncols());
            if n <= 1 {
                break;
            }
            let candidates: Vec<(CMatrix, CMatrix)> = match hint {
                Some(h) => vec![split(
                    &hermitian(compress(&face, h.matrix())),
                    HINT_KERNEL_REL,
                )?],
                None => {
                    let start = CMatrix::identity(n, n).unscale(n as f64);
                    let rough = match dykstra(&reduced, &start, 0.0, ROUGH_ALTERNATIONS, false)? {
                        DykstraOutcome::Converged(y) => y,
                        DykstraOutcome::Stalled { best, .. } => best,
                    };
                    let rough = crate::linalg::project_psd(&hermitian(rough))?;
                    ROUGH_KERNEL_REL
                        .iter()
                        .map(|&r| split(&rough, r))
                        .collect::<Result<_>>()?
                }
            };
            let mut best: Option<CMatrix> = None;
            for (ker, ran) in &candidates {
                if let Reduction::Face(w) = expose(&reduced, ker, ran)? {
                    if best.as_ref().is_none_or(|b| w.ncols() < b.ncols()) {
                        best = Some(w);
                    }
                }
            }
            let Some(w) = best else { break };
            debug!("facial reduction: {n} -> {}", w.ncols());
            face = Some(match face {
                Some(v) => v * w,
                None => w,
            });
            reduced = affine_from(&constraints, &face)?;
        }
        Ok(Self {
            constraints,
            dim,
            feas_tol,
            face,
            reduced,
        })
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the minimal face the projection works in.
    pub fn face_dim(&self) -> usize {
        self.face.as_ref().map_or(self.dim, |v| v.ncols())
    }

    pub fn feas_tol(&self) -> f64 {
        self.feas_tol
    }

    /// Worst violation of the membership test: constraint residuals, trace
    /// error and negative eigenvalue.
    pub fn residual(&self, rho: &HermitianOperator) -> Result<f64> {
        if rho.dim() != self.dim {
            return Err(CapError::Shape(format!(
                "state is {}-dim, set {}-dim",
                rho.dim(),
                self.dim
            )));
        }
        let lin = self
            .constraints
            .residual(rho)
            .max((rho.trace() - 1.0).abs());
        let lmin = hermitian_eig(rho)?.min_eigenvalue();
        Ok(lin.max(-lmin).max(0.0))
    }

    pub fn contains(&self, rho: &HermitianOperator) -> Result<bool> {
        Ok(self.residual(rho)? <= self.feas_tol)
    }

    /// Euclidean projection onto `D`.
    pub fn project(&self, m: &HermitianOperator) -> Result<DensityOperator> {
        if m.dim() != self.dim {
            return Err(CapError::Shape(format!(
                "operator is {}-dim, set {}-dim",
                m.dim(),
                self.dim
            )));
        }
        let start = compress(&self.face, m.matrix());
        let reduced = self.project_reduced(&start)?;
        Ok(DensityOperator::new_unchecked(hermitian(lift(
            &self.face, &reduced,
        ))))
    }

    pub(crate) fn project_reduced(&self, start: &CMatrix) -> Result<CMatrix> {
        let tol = 1e-3 * self.feas_tol;
        if let Some(x) = dual_newton(&self.reduced, start, tol)? {
            return Ok(x);
        }
        debug!("dual Newton projection did not converge; falling back to alternating projections");
        match dykstra(&self.reduced, start, tol, MAX_ALTERNATIONS, true)? {
            DykstraOutcome::Converged(y) => Ok(y),
            DykstraOutcome::Stalled {
                best,
                residual,
                iterations,
                plateau,
            } => {
                if residual <= PLATEAU_RESIDUAL && !plateau {
                    warn!("projection stopped at residual {residual:.3e} after {iterations} alternations");
                    Ok(best)
                } else if residual <= PLATEAU_RESIDUAL {
                    Ok(best)
                } else {
                    Err(CapError::ConstraintInfeasible {
                        residual,
                        iterations,
                    })
                }
            }
        }
    }

    /// Projection of `I/dim`.
    pub fn initial_point(&self) -> Result<DensityOperator> {
        self.project(&HermitianOperator::identity(self.dim).scale(1.0 / self.dim as f64))
    }

    /// Component of `x` along the directions that keep a point inside the
    /// face's affine hull.
    pub fn tangent_project(&self, x: &HermitianOperator) -> HermitianOperator {
        let xr = compress(&self.face, x.matrix());
        hermitian(lift(&self.face, &self.reduced.tangent_project(&xr)))
    }

    pub(crate) fn reduced_affine(&self) -> &AffineConstraints {
        &self.reduced
    }

    pub(crate) fn compress(&self, x: &CMatrix) -> CMatrix {
        compress(&self.face, x)
    }

    pub(crate) fn lift(&self, x: &CMatrix) -> CMatrix {
        lift(&self.face, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, bell_state, simulate_observations, ChannelModel};
    use crate::linalg::kron;
    use crate::protocol::{
        build_dl04, build_dl04_mismatch, constraints_from_observations, PovmMode, ProtocolSpec,
    };

    fn fs_for(spec: &ProtocolSpec, eps: f64) -> FeasibleSet {
        let ch = ChannelModel::for_protocol(spec.kind(), eps).unwrap();
        let t = simulate_observations(spec, &ch).unwrap();
        FeasibleSet::new(
            constraints_from_observations(spec, &t).unwrap(),
            DEFAULT_FEAS_TOL,
        )
        .unwrap()
    }

    #[test]
    fn bell_face_is_a_point() {
        let s = build_dl04(0.999).unwrap();
        let fs = fs_for(&s, 0.0);
        assert_eq!(fs.face_dim(), 1);
        let p = fs.initial_point().unwrap();
        assert!(p.max_diff(&bell_state(2).unwrap()) < 1e-10);
    }

    #[test]
    fn noisy_set_is_full_dimensional() {
        let s = build_dl04(0.999).unwrap();
        let fs = fs_for(&s, 0.1);
        assert_eq!(fs.face_dim(), 4);
        let p = fs.initial_point().unwrap();
        assert!(fs.residual(&p).unwrap() < 1e-9);
        let again = fs.project(&p).unwrap();
        assert!(again.max_diff(&p) < 2e-9);
    }

    #[test]
    fn vacuum_block_is_removed() {
        let s = build_dl04_mismatch(0.999, 0.75, 0.6, PovmMode::Corrected).unwrap();
        for hinted in [false, true] {
            let ch = ChannelModel::vacuum_depolarizing(0.05).unwrap();
            let t = simulate_observations(&s, &ch).unwrap();
            let cs = constraints_from_observations(&s, &t).unwrap();
            let fs = if hinted {
                let tau = apply_channel(&ch, &bell_state(3).unwrap(), [3, 2]).unwrap();
                FeasibleSet::with_hint(cs, DEFAULT_FEAS_TOL, &tau).unwrap()
            } else {
                FeasibleSet::new(cs, DEFAULT_FEAS_TOL).unwrap()
            };
            assert_eq!(fs.face_dim(), 4, "hinted = {hinted}");
            let p = fs.initial_point().unwrap();
            assert!(fs.residual(&p).unwrap() < 1e-9);
        }
    }

    #[test]
    fn trace_only_set() {
        let fs = FeasibleSet::trace_only(4).unwrap();
        let p = fs.initial_point().unwrap();
        assert!(p.max_diff(&DensityOperator::maximally_mixed(4)) < 1e-15);
        let m = HermitianOperator::from_diagonal(&[2.0, -1.0]);
        let fs2 = FeasibleSet::trace_only(2).unwrap();
        let p = fs2.project(&m).unwrap();
        assert!(p.max_diff(&HermitianOperator::from_diagonal(&[1.0, 0.0])) < 1e-12);
    }

    #[test]
    fn scaled_statistics_are_infeasible() {
        let s = build_dl04(0.999).unwrap();
        let t = simulate_observations(&s, &ChannelModel::isotropic(0.1).unwrap()).unwrap();
        let t = t.scaled(1.2).unwrap();
        let mut obs = vec![HermitianOperator::identity(4)];
        let mut vals = vec![1.0];
        for (i, fa) in s.alice().elements().iter().enumerate() {
            for (j, fb) in s.bob().elements().iter().enumerate() {
                obs.push(kron(fa, fb));
                vals.push(t.get(i, j));
            }
        }
        let cs = ConstraintSet::new(obs, vals, true).unwrap();
        assert!(matches!(
            FeasibleSet::new(cs, DEFAULT_FEAS_TOL),
            Err(CapError::ConstraintInfeasible { .. })
        ));
    }

    #[test]
    fn psd_violation_is_infeasible() {
        // ⟨Z⟩ = 1.5 is affine-consistent but no qubit state reaches it.
        let cs = ConstraintSet::new(
            vec![
                HermitianOperator::identity(2),
                HermitianOperator::from_diagonal(&[1.0, -1.0]),
            ],
            vec![1.0, 1.5],
            true,
        )
        .unwrap();
        let r = FeasibleSet::new(cs, DEFAULT_FEAS_TOL).and_then(|fs| fs.initial_point());
        assert!(
            matches!(r, Err(CapError::ConstraintInfeasible { .. })),
            "{r:?}"
        );
    }
}
