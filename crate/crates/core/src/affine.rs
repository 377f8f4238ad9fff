//! Orthonormalized affine constraint systems `⟨Γ_k, ρ⟩ = p_k`.
//!
//! Constraints are orthonormalized in the Hilbert–Schmidt inner product by
//! modified Gram–Schmidt with one reorthogonalization pass. Linearly dependent
//! rows are dropped, and the value they imply is compared to the value given.

use crate::linalg::{hs_inner_unchecked, CMatrix};

#[derive(Clone, Debug)]
pub(crate) struct AffineConstraints {
    basis: Vec<CMatrix>,
    targets: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct Orthonormalized {
    pub affine: AffineConstraints,
    /// Indices of the input rows that survived pruning.
    pub retained: Vec<usize>,
    /// Largest `|implied − given|` over dropped rows.
    pub max_inconsistency: f64,
    pub worst_row: Option<usize>,
}

pub(crate) fn orthonormalize(
    observables: &[&CMatrix],
    values: &[f64],
    rel_tol: f64,
) -> Orthonormalized {
    let mut basis: Vec<CMatrix> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let mut retained = Vec::new();
    let mut max_inconsistency: f64 = 0.0;
    let mut worst_row = None;

    for (k, (gamma, &p)) in observables.iter().zip(values).enumerate() {
        let norm = hs_inner_unchecked(gamma, gamma).sqrt();
        let mut r = (*gamma).clone();
        let mut implied = 0.0;
        for _pass in 0..2 {
            for (e, b) in basis.iter().zip(&targets) {
                let cf = hs_inner_unchecked(e, &r);
                r -= e.scale(cf);
                implied += cf * b;
            }
        }
        let rn = hs_inner_unchecked(&r, &r).sqrt();
        if norm == 0.0 || rn <= rel_tol * norm {
            let gap = (implied - p).abs();
            if gap > max_inconsistency {
                max_inconsistency = gap;
                worst_row = Some(k);
            }
            continue;
        }
        basis.push(r.unscale(rn));
        targets.push((p - implied) / rn);
        retained.push(k);
    }

    Orthonormalized {
        affine: AffineConstraints { basis, targets },
        retained,
        max_inconsistency,
        worst_row,
    }
}

impl AffineConstraints {
    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Orthogonal projection onto `{X : ⟨E_k, X⟩ = b_k}`.
    pub fn project(&self, x: &CMatrix) -> CMatrix {
        let mut out = x.clone();
        for (e, b) in self.basis.iter().zip(&self.targets) {
            let cf = hs_inner_unchecked(e, x) - b;
            out -= e.scale(cf);
        }
        out
    }

    /// Projection onto the direction space of the affine set.
    pub fn tangent_project(&self, x: &CMatrix) -> CMatrix {
        let mut out = x.clone();
        for e in &self.basis {
            let cf = hs_inner_unchecked(e, x);
            out -= e.scale(cf);
        }
        out
    }

    #[cfg(test)]
    pub fn residual(&self, x: &CMatrix) -> f64 {
        self.basis
            .iter()
            .zip(&self.targets)
            .map(|(e, b)| (hs_inner_unchecked(e, x) - b).abs())
            .fold(0.0, f64::max)
    }

    /// `ℓ(X) = Σ_k ⟨E_k, X⟩ b_k`, the value every feasible point assigns to
    /// the span component of `X`.
    pub fn value_of(&self, x: &CMatrix) -> f64 {
        self.basis
            .iter()
            .zip(&self.targets)
            .map(|(e, b)| hs_inner_unchecked(e, x) * b)
            .sum()
    }
}
