//! Outer Uzawa iteration for the Johnson-Nedelec coupling.
//!
//! Every step solves the boundary problem for `phi_j` adaptively, then the
//! Riesz problem for the update `w_j`, and sets `u_j = u_{j-1} + alpha w_j`.
//! The inner tolerances follow `eps_j = eps_1 gamma^j` (fixed `gamma`) or
//! `eps_{j+1} = gamma eps_j` with `gamma` re-estimated from the ratio of
//! consecutive update norms.

pub mod inner;
pub mod probes;
pub mod problems;

use crate::bem::{hminushalf_error_surrogate, BemDensity};
use crate::error::Result;
use crate::estimate::global_nu;
use crate::fem::quadrature::QuadratureRule;
use crate::fem::{h1_error, h1_norm, FeFunction};
use crate::mesh::{BoundaryMesh, Mesh};
use crate::model::ProblemSpec;
use crate::solver::{MultilevelHierarchy, PreconditionerKind, StopMode};

pub use inner::{
    adaptive_inner_loop, AdaptiveProblem, InnerIterate, InnerLoopOptions, InnerLoopOutcome,
    SolverMode, SystemMatrix,
};
pub use problems::{bem_data, BemStep, FemStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaRule {
    Fixed,
    Adaptive,
}

/// Ratios at or above one are replaced by this value.
pub const GAMMA_CLAMP: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct UzawaConfig {
    pub alpha: f64,
    /// Fixed contraction factor, or the initial guess for the adaptive rule.
    pub gamma: f64,
    pub theta: f64,
    pub solver: SolverMode,
    pub epsilon1: f64,
    pub c_bem: f64,
    pub c_fem: f64,
    pub gamma_rule: GammaRule,
    /// Stop once the mesh has more triangles than this.
    pub max_elements: usize,
    pub max_outer: usize,
    /// Stop once the global estimator drops below this value.
    pub nu_target: f64,
    pub max_inner: usize,
    pub fem_preconditioner: PreconditionerKind,
    /// PCG steps that advance `phi_{j-1}` before the first BEM solve.
    pub bem_presmoothing: usize,
    /// Record the smallest Cholesky pivot of every assembled `V`.
    pub check_spd: bool,
    /// Compute the quasi-error along every inner loop with two or more solves.
    pub quasi_error: Option<QuasiErrorProbe>,
}

impl Default for UzawaConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            gamma: 0.95,
            theta: 0.25,
            solver: SolverMode::Pcg(StopMode::Relative(1e-3)),
            epsilon1: 1.0,
            c_bem: 1.0,
            c_fem: 1.0,
            gamma_rule: GammaRule::Fixed,
            max_elements: 10_000,
            max_outer: 5_000,
            nu_target: 0.0,
            max_inner: 50,
            fem_preconditioner: PreconditionerKind::LocalMultilevelDiagonal,
            bem_presmoothing: 1,
            check_spd: false,
            quasi_error: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiErrorProbe {
    pub kappa: f64,
    pub fem_refinements: usize,
    pub bem_refinements: usize,
}

impl Default for QuasiErrorProbe {
    fn default() -> Self {
        Self {
            kappa: 0.1,
            fem_refinements: 1,
            bem_refinements: 2,
        }
    }
}

/// Diagnostics of one outer step.
#[derive(Debug, Clone, Default)]
pub struct StepRecord {
    pub j: usize,
    pub n_elements: usize,
    pub n_boundary: usize,
    /// `||u - u_j||_{H1}`.
    pub err_h1: f64,
    /// Weighted L2 distance of `phi_j` to the exact normal derivative.
    pub err_gamma: f64,
    pub est_fem: f64,
    pub est_bem: f64,
    pub est_tot: f64,
    /// Number of solves of the BEM and FEM inner loops.
    pub k_bem: usize,
    pub k_fem: usize,
    pub bem_converged: bool,
    pub fem_converged: bool,
    pub pcg_bem: Vec<usize>,
    pub pcg_fem: Vec<usize>,
    pub fem_surrogate: f64,
    pub bem_surrogate: f64,
    pub w_norm: f64,
    /// `gamma` and the tolerance used in this step.
    pub gamma: f64,
    pub epsilon: f64,
    pub gamma_clamped: bool,
    pub v_min_pivots: Vec<f64>,
    pub bem_quasi_errors: Vec<f64>,
    pub fem_quasi_errors: Vec<f64>,
}

/// State after `j` completed outer steps. `mesh` is `T_j`; `bem_mesh` is the
/// intermediate `T_j^[i]` and `previous_mesh` is `T_{j-1}`.
#[derive(Debug, Clone)]
pub struct UzawaState {
    pub j: usize,
    pub previous_mesh: Mesh,
    pub bem_mesh: Mesh,
    pub mesh: Mesh,
    pub u: FeFunction,
    /// P0 density on the boundary of `mesh`.
    pub phi: BemDensity,
    pub w: FeFunction,
    pub hierarchy: MultilevelHierarchy,
    /// `gamma` and tolerance for the next step.
    pub gamma: f64,
    pub epsilon: f64,
    pub w_norm: Option<f64>,
}

impl UzawaState {
    /// `u_0 = 0`, `phi_0 = 0` on the initial mesh.
    pub fn initial(spec: &ProblemSpec, config: &UzawaConfig) -> Self {
        let mesh = spec.initial_mesh();
        let nv = mesh.n_vertices();
        let nb = mesh.boundary_facets().len();
        let epsilon = match config.gamma_rule {
            GammaRule::Fixed => config.epsilon1 * config.gamma,
            GammaRule::Adaptive => config.epsilon1,
        };
        Self {
            j: 0,
            previous_mesh: mesh.clone(),
            bem_mesh: mesh.clone(),
            hierarchy: MultilevelHierarchy::new(&mesh),
            mesh,
            u: FeFunction::zeros(nv),
            phi: BemDensity::zeros(nb),
            w: FeFunction::zeros(nv),
            gamma: config.gamma,
            epsilon,
            w_norm: None,
        }
    }
}

fn inner_options(config: &UzawaConfig, tolerance: f64, presmoothing: usize, keep: bool) -> InnerLoopOptions {
    InnerLoopOptions {
        theta: config.theta,
        solver: config.solver,
        tolerance,
        max_iterations: config.max_inner,
        presmoothing,
        keep_iterates: keep,
        ..InnerLoopOptions::default()
    }
}

/// One outer step `j-1 -> j`.
pub fn uzawa_step(state: UzawaState, spec: &ProblemSpec, config: &UzawaConfig) -> Result<(UzawaState, StepRecord)> {
    let UzawaState {
        j,
        mesh,
        u,
        phi,
        w,
        mut hierarchy,
        gamma,
        epsilon,
        w_norm: prev_norm,
        ..
    } = state;
    let j = j + 1;
    let keep = config.quasi_error.is_some();
    let previous_mesh = mesh.clone();
    let mut record = StepRecord {
        j,
        gamma,
        epsilon,
        ..StepRecord::default()
    };

    // [i] boundary problem
    let mut bem = BemStep::new(spec, u, w, &mut hierarchy);
    bem.check_spd = config.check_spd;
    let opts = inner_options(config, config.c_bem * epsilon, config.bem_presmoothing, keep);
    let bem_out = adaptive_inner_loop(&mut bem, mesh, phi.values, &opts)?;
    let BemStep {
        u_prev,
        w_prev,
        min_pivots,
        ..
    } = bem;
    record.v_min_pivots = min_pivots;
    if let Some(probe) = &config.quasi_error {
        if bem_out.iterations > 1 {
            record.bem_quasi_errors = probes::bem_quasi_errors(
                spec,
                &bem_out.iterates,
                &bem_out.reports,
                &u_prev,
                probe.kappa,
                probe.bem_refinements,
            )?;
        }
    }
    let bem_mesh = bem_out.mesh.clone();
    let phi_j = BemDensity::new(bem_out.solution.clone());

    // [ii] Riesz problem for the update
    let mut fem = FemStep::new(spec, u_prev, phi_j, &mut hierarchy);
    fem.preconditioner = config.fem_preconditioner;
    let opts = inner_options(config, config.c_fem * epsilon, 0, keep);
    let fem_out = adaptive_inner_loop(&mut fem, bem_out.mesh.clone(), w_prev.values, &opts)?;
    let FemStep { u_prev, phi, .. } = fem;
    if let Some(probe) = &config.quasi_error {
        if fem_out.iterations > 1 {
            record.fem_quasi_errors = probes::fem_quasi_errors(
                spec,
                &fem_out.iterates,
                &fem_out.reports,
                &u_prev,
                &phi,
                probe.kappa,
                probe.fem_refinements,
            )?;
        }
    }
    let mesh = fem_out.mesh.clone();
    let w = FeFunction::new(fem_out.solution.clone());

    // [iii] Richardson update
    let u = u_prev.axpy(config.alpha, &w);

    let bem_rep = bem_out.last_report();
    let fem_rep = fem_out.last_report();
    let w_norm = h1_norm(&mesh, &w);
    let bmesh = BoundaryMesh::from_mesh(&mesh);
    record.n_elements = mesh.n_triangles();
    record.n_boundary = bmesh.len();
    record.err_h1 = h1_error(
        &mesh,
        &|x| (spec.u(x), spec.grad_u(x)),
        &u,
        &QuadratureRule::seven_point(),
    )?;
    record.err_gamma = hminushalf_error_surrogate(&bmesh, &|x, n| spec.phi(x, n), &phi)?;
    record.est_bem = bem_rep.total;
    record.est_fem = fem_rep.total;
    record.bem_surrogate = bem_rep.algebraic;
    record.fem_surrogate = fem_rep.algebraic;
    record.est_tot = global_nu(fem_rep.total, bem_rep.total, w_norm, fem_rep.algebraic, bem_rep.algebraic);
    record.k_bem = bem_out.iterations;
    record.k_fem = fem_out.iterations;
    record.bem_converged = bem_out.converged;
    record.fem_converged = fem_out.converged;
    record.pcg_bem = bem_out.pcg_iterations;
    record.pcg_fem = fem_out.pcg_iterations;
    record.w_norm = w_norm;

    // tolerance for the next step
    let (gamma, epsilon) = match config.gamma_rule {
        GammaRule::Fixed => (gamma, config.epsilon1 * gamma.powi(j as i32 + 1)),
        GammaRule::Adaptive => {
            let mut g = gamma;
            if let Some(prev) = prev_norm {
                g = w_norm / prev;
                if !(g < 1.0) {
                    g = GAMMA_CLAMP;
                    record.gamma_clamped = true;
                }
            }
            (g, g * epsilon)
        }
    };

    let state = UzawaState {
        j,
        previous_mesh,
        bem_mesh,
        mesh,
        u,
        phi,
        w,
        hierarchy,
        gamma,
        epsilon,
        w_norm: Some(w_norm),
    };
    Ok((state, record))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ElementBudget,
    EstimatorTarget,
    MaxOuter,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub state: UzawaState,
    pub stop: StopReason,
}

impl Trajectory {
    pub fn outer_iterations(&self) -> usize {
        self.records.len()
    }
}

/// Run outer steps until the element budget, the estimator target or the
/// step limit is reached. `observe` sees every record as it is produced.
pub fn run_uzawa(
    spec: &ProblemSpec,
    config: &UzawaConfig,
    mut observe: impl FnMut(&StepRecord),
) -> Result<Trajectory> {
    let mut state = UzawaState::initial(spec, config);
    let mut records = Vec::new();
    let stop = loop {
        let (next, record) = uzawa_step(state, spec, config)?;
        state = next;
        observe(&record);
        let nu = record.est_tot;
        records.push(record);
        if state.mesh.n_triangles() > config.max_elements {
            break StopReason::ElementBudget;
        }
        if nu < config.nu_target {
            break StopReason::EstimatorTarget;
        }
        if state.j >= config.max_outer {
            break StopReason::MaxOuter;
        }
    };
    Ok(Trajectory { records, state, stop })
}

/// `eps_j = eps_1 gamma^j` with constant `gamma`.
pub fn run_fixed_gamma(spec: &ProblemSpec, config: &UzawaConfig) -> Result<Trajectory> {
    let config = UzawaConfig {
        gamma_rule: GammaRule::Fixed,
        ..config.clone()
    };
    run_uzawa(spec, &config, |_| {})
}

/// `gamma := ||w_j|| / ||w_{j-1}||` for `j >= 2` and `eps_{j+1} = gamma eps_j`.
pub fn run_adaptive_gamma(spec: &ProblemSpec, config: &UzawaConfig) -> Result<Trajectory> {
    let config = UzawaConfig {
        gamma_rule: GammaRule::Adaptive,
        ..config.clone()
    };
    run_uzawa(spec, &config, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ExampleId;

    fn small() -> UzawaConfig {
        UzawaConfig {
            max_elements: 300,
            ..UzawaConfig::default()
        }
    }

    #[test]
    fn meshes_are_nested_and_richardson_identity_holds() {
        let spec = ProblemSpec::new(ExampleId::LaplaceLShape);
        let config = small();
        let mut state = UzawaState::initial(&spec, &config);
        for _ in 0..4 {
            let u_before = state.u.clone();
            let nv_before = state.mesh.n_vertices();
            let (next, rec) = uzawa_step(state, &spec, &config).unwrap();
            assert!(next.previous_mesh.n_triangles() <= next.bem_mesh.n_triangles());
            assert!(next.bem_mesh.n_triangles() <= next.mesh.n_triangles());
            next.mesh.validate().unwrap();
            assert_eq!(next.phi.values.len(), next.mesh.boundary_facets().len());
            // old vertices keep their ids, so u_j - alpha w_j restricted to
            // them equals u_{j-1}
            for v in 0..nv_before {
                let back = next.u.values[v] - config.alpha * next.w.values[v];
                assert!((back - u_before.values[v]).abs() < 1e-14);
            }
            assert!(rec.est_tot >= rec.est_fem && rec.est_tot >= rec.est_bem);
            state = next;
        }
    }

    #[test]
    fn zero_damping_keeps_the_iterate() {
        let spec = ProblemSpec::new(ExampleId::LaplaceLShape);
        let config = UzawaConfig {
            alpha: 0.0,
            ..small()
        };
        let state = UzawaState::initial(&spec, &config);
        let (next, _) = uzawa_step(state, &spec, &config).unwrap();
        assert!(next.u.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fixed_schedule_is_geometric() {
        let spec = ProblemSpec::new(ExampleId::LaplaceLShape);
        let config = UzawaConfig {
            max_outer: 5,
            ..small()
        };
        let t = run_fixed_gamma(&spec, &config).unwrap();
        for r in &t.records {
            let expected = config.epsilon1 * config.gamma.powi(r.j as i32);
            assert!((r.epsilon - expected).abs() < 1e-14 * expected);
        }
    }

    #[test]
    fn adaptive_schedule_follows_update_ratios() {
        let spec = ProblemSpec::new(ExampleId::LaplaceLShape);
        let config = UzawaConfig {
            max_outer: 6,
            ..small()
        };
        let t = run_adaptive_gamma(&spec, &config).unwrap();
        let r = &t.records;
        assert_eq!(r[0].epsilon, config.epsilon1);
        assert!((r[1].epsilon - config.gamma * config.epsilon1).abs() < 1e-15);
        for k in 2..r.len() {
            let g = if r[k - 1].gamma_clamped {
                GAMMA_CLAMP
            } else {
                r[k - 1].w_norm / r[k - 2].w_norm
            };
            assert!((r[k].gamma - g).abs() < 1e-14);
            assert!((r[k].epsilon - g * r[k - 1].epsilon).abs() < 1e-14 * r[k].epsilon);
        }
    }

    #[test]
    fn inner_loops_meet_their_tolerance() {
        let spec = ProblemSpec::new(ExampleId::LaplaceLShape);
        let config = UzawaConfig {
            max_outer: 6,
            ..small()
        };
        let t = run_fixed_gamma(&spec, &config).unwrap();
        for r in &t.records {
            if r.bem_converged {
                assert!(r.est_bem.powi(2) + r.bem_surrogate <= (config.c_bem * r.epsilon).powi(2));
            }
            if r.fem_converged {
                assert!(r.est_fem.powi(2) + r.fem_surrogate <= (config.c_fem * r.epsilon).powi(2));
            }
        }
    }
}
