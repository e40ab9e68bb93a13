//! Linear algebra for the symmetric positive definite Galerkin systems:
//! direct Cholesky solves and preconditioned conjugate gradients.

mod cholesky;
mod dense;
mod multilevel;

use crate::error::{Error, Result};
use crate::fem::CsrMatrix;

pub use cholesky::{reverse_cuthill_mckee, EnvelopeCholesky};
pub use dense::{DenseCholesky, DenseMatrix};
pub use multilevel::{build_local_multilevel_preconditioner, MultilevelDiagonal, MultilevelHierarchy};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y)
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y)
    }
}

/// Action of `P^{-1}` for a symmetric positive definite preconditioner `P`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreconditionerKind {
    Identity,
    Jacobi,
    LocalMultilevelDiagonal,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        Self {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
    }
}

/// Exact solve with a factorized matrix, i.e. `P = S`.
impl Preconditioner for CholeskyFactor {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(&self.solve(r));
    }
}

/// When to stop PCG, measured in the preconditioned residual energy
/// `rho_k = r_k^T P^{-1} r_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopMode {
    /// `rho_k <= lambda * rho_0`.
    Lambda(f64),
    /// `rho_k <= tau^2 * rho_0`.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub mode: StopMode,
    pub max_iterations: usize,
}

impl StoppingRule {
    pub fn relative(tau: f64) -> Self {
        Self {
            mode: StopMode::Relative(tau),
            max_iterations: 10_000,
        }
    }

    pub fn lambda(lambda: f64) -> Self {
        Self {
            mode: StopMode::Lambda(lambda),
            max_iterations: 10_000,
        }
    }

    /// Exactly `k` iterations (unless the residual vanishes first).
    pub fn fixed(k: usize) -> Self {
        Self {
            mode: StopMode::Lambda(0.0),
            max_iterations: k,
        }
    }

    fn satisfied(&self, rho: f64, rho0: f64) -> bool {
        match self.mode {
            StopMode::Lambda(l) => rho <= l * rho0,
            StopMode::Relative(t) => rho <= t * t * rho0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcgResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// `rho_k` for `k = 0..=iterations`.
    pub residual_energies: Vec<f64>,
    pub hit_max_iterations: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients from the initial guess `x0`.
pub fn pcg(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: &[f64],
    p: &dyn Preconditioner,
    rule: &StoppingRule,
) -> Result<PcgResult> {
    let n = a.dim();
    if b.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if b.len() != n { b.len() } else { x0.len() },
        });
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    a.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    p.apply(&r, &mut z);
    let mut rho = dot(&r, &z);
    let rho0 = rho;
    let mut energies = vec![rho];
    let mut d = z.clone();
    let mut q = vec![0.0; n];
    let mut k = 0;
    while rho > 0.0 && !rule.satisfied(rho, rho0) && k < rule.max_iterations {
        a.apply(&d, &mut q);
        let curvature = dot(&d, &q);
        if !(curvature > 0.0) {
            return Err(Error::Breakdown {
                iteration: k,
                curvature,
            });
        }
        let alpha = rho / curvature;
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * q[i];
        }
        p.apply(&r, &mut z);
        let rho_new = dot(&r, &z);
        let beta = rho_new / rho;
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
        rho = rho_new;
        energies.push(rho);
        k += 1;
    }
    let hit = k == rule.max_iterations && rho > 0.0 && !rule.satisfied(rho, rho0);
    Ok(PcgResult {
        solution: x,
        iterations: k,
        residual_energies: energies,
        hit_max_iterations: hit,
    })
}

/// `(r^T P^{-1} r)` for `r = b - A x`: the squared algebraic error in the
/// preconditioner's metric, used as the solver contribution to the estimators.
pub fn algebraic_error_surrogate(
    a: &dyn LinearOperator,
    b: &[f64],
    x: &[f64],
    p: &dyn Preconditioner,
) -> f64 {
    let n = a.dim();
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    p.apply(&r, &mut z);
    dot(&r, &z).max(0.0)
}

#[derive(Debug, Clone)]
pub enum CholeskyFactor {
    Dense(DenseCholesky),
    Envelope(EnvelopeCholesky),
}

impl CholeskyFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            CholeskyFactor::Dense(c) => c.solve(b),
            CholeskyFactor::Envelope(c) => c.solve(b),
        }
    }

    pub fn min_pivot(&self) -> f64 {
        match self {
            CholeskyFactor::Dense(c) => c.min_pivot(),
            CholeskyFactor::Envelope(c) => c.min_pivot(),
        }
    }
}

/// Matrices that admit a Cholesky factorization.
pub trait SpdMatrix: LinearOperator {
    fn factor(&self) -> Result<CholeskyFactor>;
    fn diagonal(&self) -> Vec<f64>;
}

impl SpdMatrix for DenseMatrix {
    fn factor(&self) -> Result<CholeskyFactor> {
        self.cholesky().map(CholeskyFactor::Dense)
    }

    fn diagonal(&self) -> Vec<f64> {
        DenseMatrix::diagonal(self)
    }
}

impl SpdMatrix for CsrMatrix {
    fn factor(&self) -> Result<CholeskyFactor> {
        EnvelopeCholesky::factor(self).map(CholeskyFactor::Envelope)
    }

    fn diagonal(&self) -> Vec<f64> {
        CsrMatrix::diagonal(self)
    }
}

pub fn cholesky_solve<M: SpdMatrix + ?Sized>(m: &M, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: rhs.len(),
        });
    }
    Ok(m.factor()?.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix::from_fn(n, |i, j| {
            (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 }
        })
    }

    #[test]
    fn exact_preconditioner_converges_in_one_step() {
        let a = random_spd(12, 3);
        let b: Vec<f64> = (0..12).map(|k| (k as f64).sin()).collect();
        let f = a.factor().unwrap();
        let res = pcg(&a, &b, &vec![0.0; 12], &f, &StoppingRule::relative(1e-12)).unwrap();
        assert!(res.iterations <= 1);
    }

    #[test]
    fn cg_terminates_in_n_steps() {
        let a = random_spd(10, 5);
        let b = vec![1.0; 10];
        let res = pcg(&a, &b, &vec![0.0; 10], &Identity, &StoppingRule::relative(1e-10)).unwrap();
        assert!(res.iterations <= 10 + 2);
        let exact = cholesky_solve(&a, &b).unwrap();
        for (x, y) in res.solution.iter().zip(&exact) {
            assert!((x - y).abs() < 1e-7);
        }
    }

    #[test]
    fn indefinite_matrix_breaks_down() {
        let a = DenseMatrix::from_fn(2, |i, j| if i == j { [1.0, -1.0][i] } else { 0.0 });
        let err = pcg(&a, &[0.0, 1.0], &[0.0, 0.0], &Identity, &StoppingRule::relative(1e-8));
        assert!(matches!(err, Err(Error::Breakdown { .. })));
    }

    #[test]
    fn max_iterations_is_a_flag() {
        let a = random_spd(20, 9);
        let b = vec![1.0; 20];
        let res = pcg(&a, &b, &vec![0.0; 20], &Identity, &StoppingRule::fixed(2)).unwrap();
        assert_eq!(res.iterations, 2);
        assert!(res.hit_max_iterations);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn energy_error_decreases_monotonically(seed in any::<u64>(), n in 2usize..25) {
            let a = random_spd(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let exact = cholesky_solve(&a, &b).unwrap();
            let jac = Jacobi::new(&a.diagonal());
            let mut x = vec![0.0; n];
            let mut last = f64::INFINITY;
            for _ in 0..n {
                let res = pcg(&a, &b, &x, &jac, &StoppingRule::fixed(1)).unwrap();
                x = res.solution;
                let e: Vec<f64> = x.iter().zip(&exact).map(|(p, q)| p - q).collect();
                let err = a.energy(&e);
                prop_assert!(err <= last * (1.0 + 1e-10) + 1e-14);
                last = err;
            }
        }

        #[test]
        fn surrogate_matches_energy_error_for_exact_preconditioner(seed in any::<u64>()) {
            let a = random_spd(8, seed);
            let b = vec![1.0; 8];
            let x = vec![0.3; 8];
            let exact = cholesky_solve(&a, &b).unwrap();
            let e: Vec<f64> = x.iter().zip(&exact).map(|(p, q)| p - q).collect();
            let f = a.factor().unwrap();
            let s = algebraic_error_surrogate(&a, &b, &x, &f);
            let err = a.energy(&e);
            prop_assert!((s - err).abs() <= 1e-8 * err.max(1e-12));
        }
    }
}
