//! Generic adaptive loop: solve, estimate, mark, refine.

use crate::error::Result;
use crate::estimate::{doerfler_mark, EstimatorReport};
use crate::fem::CsrMatrix;
use crate::mesh::{Mesh, RefinementRelation};
use crate::solver::{
    pcg, CholeskyFactor, DenseMatrix, LinearOperator, Preconditioner, SpdMatrix, StopMode,
    StoppingRule,
};

/// Galerkin matrix of an inner problem.
#[derive(Debug, Clone)]
pub enum SystemMatrix {
    Sparse(CsrMatrix),
    Dense(DenseMatrix),
}

impl LinearOperator for SystemMatrix {
    fn dim(&self) -> usize {
        match self {
            SystemMatrix::Sparse(m) => m.n(),
            SystemMatrix::Dense(m) => m.n(),
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            SystemMatrix::Sparse(m) => m.matvec_into(x, y),
            SystemMatrix::Dense(m) => m.matvec_into(x, y),
        }
    }
}

impl SpdMatrix for SystemMatrix {
    fn factor(&self) -> Result<CholeskyFactor> {
        match self {
            SystemMatrix::Sparse(m) => m.factor(),
            SystemMatrix::Dense(m) => m.factor(),
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        match self {
            SystemMatrix::Sparse(m) => m.diagonal(),
            SystemMatrix::Dense(m) => m.diagonal(),
        }
    }
}

/// What the adaptive loop needs from a discrete problem. Elements are
/// triangles for volume problems and boundary segments for boundary problems.
pub trait AdaptiveProblem {
    fn system(&mut self, mesh: &Mesh) -> Result<(SystemMatrix, Vec<f64>)>;

    fn preconditioner<'a>(
        &'a self,
        mesh: &Mesh,
        matrix: &SystemMatrix,
    ) -> Result<Box<dyn Preconditioner + 'a>>;

    fn estimate(&mut self, mesh: &Mesh, solution: &[f64]) -> Result<EstimatorReport>;

    /// Refine the marked elements. Implementations also carry any auxiliary
    /// state over to the new mesh.
    fn refine(&mut self, mesh: &Mesh, marked: &[usize]) -> Result<(Mesh, RefinementRelation)>;

    fn prolongate(&self, solution: &[f64], relation: &RefinementRelation) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverMode {
    Exact,
    Pcg(StopMode),
}

#[derive(Debug, Clone)]
pub struct InnerLoopOptions {
    pub theta: f64,
    pub solver: SolverMode,
    /// Stop once `estimator^2 + surrogate <= tolerance^2`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// PCG steps applied to the initial guess before the first solve.
    pub presmoothing: usize,
    pub max_pcg_iterations: usize,
    /// Keep every iterate and mesh (for diagnostics).
    pub keep_iterates: bool,
}

impl Default for InnerLoopOptions {
    fn default() -> Self {
        Self {
            theta: 0.25,
            solver: SolverMode::Pcg(StopMode::Relative(1e-3)),
            tolerance: 1.0,
            max_iterations: 100,
            presmoothing: 0,
            max_pcg_iterations: 10_000,
            keep_iterates: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InnerIterate {
    pub mesh: Mesh,
    pub solution: Vec<f64>,
    /// Refinement leading from this iterate's mesh to the next one.
    pub relation: Option<RefinementRelation>,
}

#[derive(Debug, Clone)]
pub struct InnerLoopOutcome {
    pub mesh: Mesh,
    pub solution: Vec<f64>,
    /// Number of solves, i.e. `l + 1` for exit index `l`.
    pub iterations: usize,
    pub reports: Vec<EstimatorReport>,
    pub pcg_iterations: Vec<usize>,
    pub converged: bool,
    pub iterates: Vec<InnerIterate>,
}

impl InnerLoopOutcome {
    pub fn last_report(&self) -> &EstimatorReport {
        self.reports.last().expect("at least one solve")
    }
}

pub fn adaptive_inner_loop<P: AdaptiveProblem + ?Sized>(
    problem: &mut P,
    mesh0: Mesh,
    initial_guess: Vec<f64>,
    options: &InnerLoopOptions,
) -> Result<InnerLoopOutcome> {
    let mut mesh = mesh0;
    let mut x = initial_guess;
    let mut reports = Vec::new();
    let mut pcg_iterations = Vec::new();
    let mut iterates = Vec::new();
    let mut converged = false;
    for l in 0..options.max_iterations {
        let (matrix, rhs) = problem.system(&mesh)?;
        let surrogate = match options.solver {
            SolverMode::Exact => {
                x = matrix.factor()?.solve(&rhs);
                pcg_iterations.push(0);
                0.0
            }
            SolverMode::Pcg(mode) => {
                let p = problem.preconditioner(&mesh, &matrix)?;
                let mut steps = 0;
                if l == 0 && options.presmoothing > 0 {
                    let pre = pcg(&matrix, &rhs, &x, p.as_ref(), &StoppingRule::fixed(options.presmoothing))?;
                    steps += pre.iterations;
                    x = pre.solution;
                }
                let rule = StoppingRule {
                    mode,
                    max_iterations: options.max_pcg_iterations,
                };
                let res = pcg(&matrix, &rhs, &x, p.as_ref(), &rule)?;
                steps += res.iterations;
                pcg_iterations.push(steps);
                x = res.solution;
                *res.residual_energies.last().unwrap()
            }
        };
        let mut report = problem.estimate(&mesh, &x)?;
        report.algebraic = surrogate;
        let done = report.total * report.total + surrogate <= options.tolerance * options.tolerance;
        let marked = if done {
            Vec::new()
        } else {
            doerfler_mark(&report.indicators, options.theta).ids
        };
        reports.push(report);
        if options.keep_iterates {
            iterates.push(InnerIterate {
                mesh: mesh.clone(),
                solution: x.clone(),
                relation: None,
            });
        }
        if done {
            converged = true;
            break;
        }
        if l + 1 == options.max_iterations || marked.is_empty() {
            break;
        }
        let (fine, relation) = problem.refine(&mesh, &marked)?;
        x = problem.prolongate(&x, &relation)?;
        mesh = fine;
        if let Some(last) = iterates.last_mut() {
            last.relation = Some(relation);
        }
    }
    Ok(InnerLoopOutcome {
        mesh,
        solution: x,
        iterations: reports.len(),
        reports,
        pcg_iterations,
        converged,
        iterates,
    })
}
