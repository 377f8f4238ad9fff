//! Linear minimization over the feasible set: `argmin_{σ ∈ D} ⟨w, σ⟩`.

use nalgebra::DMatrix;

use super::feasible::FeasibleSet;
use super::LmoKind;
use crate::error::Result;
use crate::linalg::{
    hermitian_eig, hs_inner_unchecked, CMatrix, DensityOperator, HermitianOperator,
};

const PG_MAX_ITER: usize = 500;
const PG_REL_CHANGE: f64 = 1e-8;
const BARRIER_GAP: f64 = 1e-9;
const BARRIER_SHRINK: f64 = 0.1;
const NEWTON_MAX: usize = 60;
const NEWTON_DECREMENT: f64 = 1e-12;
const BARRIER_RESID: f64 = 1e-9;
const TANGENT_ZERO: f64 = 1e-13;

/// Minimizer of `⟨w, σ⟩` over `D`, started (and tie-broken) at `initial_point`.
pub fn linear_subproblem(fs: &FeasibleSet, w: &HermitianOperator) -> Result<DensityOperator> {
    let start = fs.initial_point()?;
    linear_subproblem_from(fs, w, &start, LmoKind::ProjectedGradient)
}

pub fn linear_subproblem_from(
    fs: &FeasibleSet,
    w: &HermitianOperator,
    start: &DensityOperator,
    kind: LmoKind,
) -> Result<DensityOperator> {
    // Only the component of w along the face's affine hull matters.
    let t = fs.tangent_project(w);
    if t.max_abs() <= TANGENT_ZERO * (1.0 + w.max_abs()) {
        return Ok(start.clone());
    }
    match kind {
        LmoKind::ProjectedGradient => projected_gradient(fs, w, start),
        LmoKind::Barrier => match barrier(fs, w)? {
            Some(sigma) => {
                // Never return something worse than the start.
                let (vs, v0) = (
                    hs_inner_unchecked(w.matrix(), sigma.matrix()),
                    hs_inner_unchecked(w.matrix(), start.matrix()),
                );
                Ok(if vs <= v0 { sigma } else { start.clone() })
            }
            None => projected_gradient(fs, w, start),
        },
    }
}

fn projected_gradient(
    fs: &FeasibleSet,
    w: &HermitianOperator,
    start: &DensityOperator,
) -> Result<DensityOperator> {
    let alpha = 1.0 / (1.0 + w.max_abs());
    let mut sigma = start.clone();
    let mut val = hs_inner_unchecked(w.matrix(), sigma.matrix());
    for _ in 0..PG_MAX_ITER {
        let next = fs.project(&(&*sigma - &w.scale(alpha)))?;
        let nv = hs_inner_unchecked(w.matrix(), next.matrix());
        let change = (val - nv).abs() / val.abs().max(1e-300);
        sigma = next;
        val = nv;
        if change < PG_REL_CHANGE {
            break;
        }
    }
    Ok(sigma)
}

/// `log det S` and `S⁻¹` for Hermitian positive definite `S`; `None` otherwise.
fn logdet_inverse(s: &CMatrix) -> Option<(f64, CMatrix)> {
    let eig = hermitian_eig(&HermitianOperator::hermitize(s.clone())).ok()?;
    let lmin = eig.min_eigenvalue();
    if !(lmin > 0.0) || lmin < 1e-14 * eig.max_eigenvalue() {
        return None;
    }
    let logdet = eig.eigenvalues.iter().map(|l| l.ln()).sum();
    Some((logdet, eig.map(|l| 1.0 / l).into_matrix()))
}

/// Dual path following on `max b·y + t log det(w̃ − Σ y_k E_k)`; the primal
/// point on the central path is `σ = t S⁻¹`. Returns `None` if the Newton
/// systems become too ill-conditioned before any usable point is found.
fn barrier(fs: &FeasibleSet, w: &HermitianOperator) -> Result<Option<DensityOperator>> {
    let wr = fs.compress(w.matrix());
    let affine = fs.reduced_affine();
    let basis = affine.basis();
    let b = affine.targets();
    let r = wr.nrows();
    let m = basis.len();
    let rf = r as f64;

    let build_s = |y: &[f64]| -> CMatrix {
        let mut s = wr.clone();
        for (e, yk) in basis.iter().zip(y) {
            s -= e.scale(*yk);
        }
        (&s + s.adjoint()).scale(0.5)
    };

    let wh = HermitianOperator::hermitize(wr.clone());
    let lmin = hermitian_eig(&wh)?.min_eigenvalue();
    let scale = 1.0 + wh.max_abs();
    // basis[0] is I/√r (the trace row is orthonormalized first).
    let mut y = vec![0.0; m];
    y[0] = rf.sqrt() * (lmin - scale);
    let mut t = scale;
    let mut sigma: Option<CMatrix> = None;

    let f_of = |y: &[f64], t: f64| -> Option<(f64, CMatrix)> {
        let s = build_s(y);
        let (logdet, sinv) = logdet_inverse(&s)?;
        let by: f64 = b.iter().zip(y).map(|(bk, yk)| bk * yk).sum();
        Some((by + t * logdet, sinv))
    };

    loop {
        let mut centered = false;
        for _ in 0..NEWTON_MAX {
            let Some((fval, sinv)) = f_of(&y, t) else {
                break;
            };
            let se: Vec<CMatrix> = basis.iter().map(|e| &sinv * e).collect();
            let mut grad = vec![0.0; m];
            let mut hess = DMatrix::<f64>::zeros(m, m);
            for k in 0..m {
                grad[k] = b[k] - t * hs_inner_unchecked(&basis[k], &sinv);
                for l in k..m {
                    // tr(S⁻¹E_k S⁻¹E_l), real for Hermitian arguments.
                    let v = t * trace_product(&se[k], &se[l]);
                    hess[(k, l)] = v;
                    hess[(l, k)] = v;
                }
            }
            // Newton direction for the concave dual: (t·H) Δ = grad.
            let Some(chol) = hess.clone().cholesky() else {
                break;
            };
            let g = nalgebra::DVector::from_vec(grad.clone());
            let delta = chol.solve(&g);
            let decrement = g.dot(&delta);
            // grad/t is the constraint residual of t·S⁻¹.
            let resid = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if decrement.abs() <= NEWTON_DECREMENT || resid <= BARRIER_RESID {
                centered = resid <= BARRIER_RESID;
                break;
            }
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..50 {
                let trial: Vec<f64> = y
                    .iter()
                    .zip(delta.iter())
                    .map(|(yk, dk)| yk + alpha * dk)
                    .collect();
                if let Some((ft, _)) = f_of(&trial, t) {
                    if ft >= fval + 0.25 * alpha * decrement {
                        y = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        // An uncentered point can be badly infeasible; keep the last good one.
        if !centered {
            break;
        }
        if let Some((_, sinv)) = f_of(&y, t) {
            sigma = Some(sinv.scale(t));
        }
        if rf * t <= BARRIER_GAP * scale {
            break;
        }
        t *= BARRIER_SHRINK;
    }
    sigma.map(|s| finish(fs, s)).transpose()
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    // Re tr(A B) = Σ_ij Re(A_ij B_ji)
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (a[(i, j)], b[(j, i)]);
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// Restores exact feasibility of the reduced central-path point and lifts it.
fn finish(fs: &FeasibleSet, sigma: CMatrix) -> Result<DensityOperator> {
    let exact = fs.project_reduced(&sigma)?;
    Ok(DensityOperator::new_unchecked(
        HermitianOperator::hermitize(fs.lift(&exact)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{simulate_observations, ChannelModel};
    use crate::protocol::{build_dl04, constraints_from_observations};

    #[test]
    fn trace_only_picks_lowest_eigenvector() {
        let fs = FeasibleSet::trace_only(2).unwrap();
        let w = HermitianOperator::from_diagonal(&[1.0, -1.0]);
        let s = linear_subproblem(&fs, &w).unwrap();
        assert!(
            s.max_diff(&HermitianOperator::from_diagonal(&[0.0, 1.0])) < 1e-6,
            "{s:?}"
        );
        let start = fs.initial_point().unwrap();
        let pg = linear_subproblem_from(&fs, &w, &start, LmoKind::ProjectedGradient).unwrap();
        assert!(pg.max_diff(&HermitianOperator::from_diagonal(&[0.0, 1.0])) < 1e-6);
    }

    #[test]
    fn flat_objectives_return_start() {
        let s = build_dl04(0.999).unwrap();
        let t = simulate_observations(&s, &ChannelModel::isotropic(0.1).unwrap()).unwrap();
        let fs = FeasibleSet::new(constraints_from_observations(&s, &t).unwrap(), 1e-9).unwrap();
        let start = fs.initial_point().unwrap();
        let zero = linear_subproblem(&fs, &HermitianOperator::zeros(4)).unwrap();
        assert!(zero.max_diff(&start) < 1e-15);
        let id = linear_subproblem(&fs, &HermitianOperator::identity(4)).unwrap();
        assert!(fs.contains(&id).unwrap());
        assert!(
            (hs_inner_unchecked(HermitianOperator::identity(4).matrix(), id.matrix()) - 1.0).abs()
                < 1e-9
        );
    }

    #[test]
    fn barrier_matches_projected_gradient_value() {
        let s = build_dl04(0.999).unwrap();
        let t = simulate_observations(&s, &ChannelModel::isotropic(0.1).unwrap()).unwrap();
        let fs = FeasibleSet::new(constraints_from_observations(&s, &t).unwrap(), 1e-9).unwrap();
        let start = fs.initial_point().unwrap();
        let y = crate::linalg::pauli::y();
        let w = crate::linalg::kron(&y, &y);
        let a = linear_subproblem_from(&fs, &w, &start, LmoKind::Barrier).unwrap();
        let b = linear_subproblem_from(&fs, &w, &start, LmoKind::ProjectedGradient).unwrap();
        let va = hs_inner_unchecked(w.matrix(), a.matrix());
        let vb = hs_inner_unchecked(w.matrix(), b.matrix());
        assert!(fs.contains(&a).unwrap());
        assert!(va <= vb + 1e-6, "{va} vs {vb}");
    }
}
