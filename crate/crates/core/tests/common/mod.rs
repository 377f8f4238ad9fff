//! Shared helpers for the integration suites, including a brute-force
//! reference minimizer that shares no code with the library solvers.
#![allow(dead_code)]

use argmin::core::{CostFunction, Error as ArgminError, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qsdc_core::linalg::CMatrix;
use qsdc_core::protocol::{Basis, Outcome};
use qsdc_core::{DensityOperator, FeasibleSet, HermitianOperator, ObservationTable, ProtocolSpec};

type M = DMatrix<Complex64>;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// I, X, Y, Z in that order.
pub fn paulis() -> [M; 4] {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    [
        M::from_row_slice(2, 2, &[o, z, z, o]),
        M::from_row_slice(2, 2, &[z, o, o, z]),
        M::from_row_slice(2, 2, &[z, -i, i, z]),
        M::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

/// −Σ λ log₂ λ over the spectrum of a Hermitian matrix.
fn entropy_bits(m: &M) -> f64 {
    let h = (m + m.adjoint()).scale(0.5);
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .filter(|&&l| l > 1e-300)
        .map(|&l| -l * l.log2())
        .sum()
}

/// Key-map output for ideal DL04 written out directly: register K records
/// Alice's bit in whichever basis was used, Bob is traced through unchanged.
pub fn dl04_key_map(rho: &M, p_z: f64) -> M {
    let p_x = 1.0 - p_z;
    let norm = (p_z * p_z + p_x * p_x).sqrt();
    let s = 1.0 / 2f64.sqrt();
    let kets = [
        [[cx(1.0, 0.0), cx(0.0, 0.0)], [cx(0.0, 0.0), cx(1.0, 0.0)]],
        [[cx(s, 0.0), cx(s, 0.0)], [cx(s, 0.0), cx(-s, 0.0)]],
    ];
    let mut out = M::zeros(8, 8);
    for (basis, weight) in [(0usize, p_z), (1usize, p_x)] {
        // K_b : C^4 → C^8, rows indexed (k, a, b).
        let mut k = M::zeros(8, 4);
        for bit in 0..2 {
            let v = kets[basis][bit];
            for a_out in 0..2 {
                for a_in in 0..2 {
                    let proj = v[a_out] * v[a_in].conj();
                    for b in 0..2 {
                        k[(bit * 4 + a_out * 2 + b, a_in * 2 + b)] += proj * (weight / norm);
                    }
                }
            }
        }
        out += &k * rho * k.adjoint();
    }
    out
}

/// `S(G‖Z(G))` for the direct DL04 key map, with Z dephasing the key register.
pub fn dl04_objective(rho: &M, p_z: f64) -> f64 {
    let g = dl04_key_map(rho, p_z);
    let mut pinched = g.clone();
    for r in 0..8 {
        for c in 0..8 {
            if (r < 4) != (c < 4) {
                pinched[(r, c)] = cx(0.0, 0.0);
            }
        }
    }
    entropy_bits(&pinched) - entropy_bits(&g)
}

/// Expectations of σ_a⊗σ_b (a, b ∈ {I, X, Z}) read straight off a table, using
/// `⟨σ_aσ_b⟩ = Σ s_k s_l Pr(a k, b l) / Σ Pr(a ·, b ·)`.
fn table_correlators(spec: &ProtocolSpec, table: &ObservationTable) -> [[Option<f64>; 4]; 4] {
    let idx = |b: Basis| match b {
        Basis::X => 1,
        Basis::Y => 2,
        Basis::Z => 3,
    };
    let mut sums = [[(0.0f64, 0.0f64, 0.0f64, 0.0f64); 4]; 4];
    for (i, la) in spec.alice().labels().iter().enumerate() {
        for (j, lb) in spec.bob().labels().iter().enumerate() {
            if let (Outcome::Click { basis: ba, bit: ka }, Outcome::Click { basis: bb, bit: kb }) =
                (la, lb)
            {
                let (sa, sb) = (1.0 - 2.0 * *ka as f64, 1.0 - 2.0 * *kb as f64);
                let p = table.get(i, j);
                let e = &mut sums[idx(*ba)][idx(*bb)];
                e.0 += p;
                e.1 += sa * sb * p;
                e.2 += sa * p;
                e.3 += sb * p;
            }
        }
    }
    let mut out = [[None; 4]; 4];
    out[0][0] = Some(1.0);
    for a in 1..4 {
        for b in 1..4 {
            let (tot, ab, ai, ib) = sums[a][b];
            if tot > 0.0 {
                out[a][b] = Some(ab / tot);
                out[a][0].get_or_insert(ai / tot);
                out[0][b].get_or_insert(ib / tot);
            }
        }
    }
    out
}

struct OracleCost {
    fixed: [[Option<f64>; 4]; 4],
    free: Vec<(usize, usize)>,
    basis: Vec<Vec<M>>,
    p_z: f64,
}

impl OracleCost {
    /// ρ = ¼ Σ c_ab σ_a⊗σ_b with measured coordinates taken from the table.
    fn state(&self, params: &[f64]) -> M {
        let mut coeffs = [[0.0; 4]; 4];
        for (a, row) in self.fixed.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    coeffs[a][b] = *v;
                }
            }
        }
        for (&(a, b), v) in self.free.iter().zip(params) {
            coeffs[a][b] = *v;
        }
        let mut rho = M::zeros(4, 4);
        for (row, crow) in self.basis.iter().zip(&coeffs) {
            for (op, c) in row.iter().zip(crow) {
                rho += op.scale(c / 4.0);
            }
        }
        rho
    }
}

impl CostFunction for OracleCost {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, ArgminError> {
        let rho = self.state(p);
        let eig = SymmetricEigen::new(rho.clone());
        let neg: f64 = eig
            .eigenvalues
            .iter()
            .filter(|&&l| l < 0.0)
            .map(|l| l * l)
            .sum();
        if neg > 0.0 {
            // Clip to the PSD cone and charge the distance.
            let clipped = &eig.eigenvectors
                * M::from_diagonal(&eig.eigenvalues.map(|l| cx(l.max(0.0), 0.0)))
                * eig.eigenvectors.adjoint();
            let tr = clipped.trace().re;
            return Ok(dl04_objective(&clipped.unscale(tr), self.p_z) + 1e3 * neg.sqrt());
        }
        Ok(dl04_objective(&rho, self.p_z))
    }
}

/// Random-restart Nelder–Mead minimum of the DL04 objective over all
/// two-qubit states matching `table`.
pub fn brute_force_dl04(
    spec: &ProtocolSpec,
    table: &ObservationTable,
    restarts: usize,
    seed: u64,
) -> f64 {
    let p_z = spec.param("p_z").expect("p_z");
    let fixed = table_correlators(spec, table);
    let free: Vec<(usize, usize)> = (0..4)
        .flat_map(|a| (0..4).map(move |b| (a, b)))
        .filter(|&(a, b)| fixed[a][b].is_none())
        .collect();
    assert_eq!(
        fixed.iter().flatten().filter(|v| v.is_some()).count() + free.len(),
        16
    );
    let p = paulis();
    let basis = (0..4)
        .map(|a| (0..4).map(|b| p[a].kronecker(&p[b])).collect())
        .collect();
    let mut cost = OracleCost {
        fixed,
        free,
        basis,
        p_z,
    };
    let n = cost.free.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
        let mut simplex = vec![x0.clone()];
        for k in 0..n {
            let mut v = x0.clone();
            v[k] += 0.1;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-14)
            .expect("simplex");
        let res = Executor::new(cost, solver)
            .configure(|s| s.max_iters(4000))
            .run()
            .expect("nelder-mead");
        best = best.min(res.state().best_cost);
        cost = res.problem.problem.expect("problem returned");
    }
    best
}

pub fn to_m(h: &HermitianOperator) -> M {
    h.matrix().clone()
}

pub fn from_m(m: &CMatrix) -> HermitianOperator {
    HermitianOperator::new((m + m.adjoint()).scale(0.5)).unwrap()
}

/// A random density matrix of rank up to `dim` (Ginibre construction).
pub fn random_density(rng: &mut impl Rng, dim: usize) -> DensityOperator {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOperator::new(from_m(&m.unscale(tr))).unwrap()
}

/// Random Hermitian matrix with entries in [−1, 1].
pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> HermitianOperator {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    from_m(&g)
}

/// Feasible points obtained by projecting random states into `fs`.
pub fn random_feasible(fs: &FeasibleSet, rng: &mut impl Rng, count: usize) -> Vec<DensityOperator> {
    (0..count)
        .map(|_| fs.project(&random_density(rng, fs.dim())).unwrap())
        .collect()
}
