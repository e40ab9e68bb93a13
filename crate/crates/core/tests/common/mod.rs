//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::f64::consts::PI;

use fembem_uzawa::bem::{assemble_single_layer, BemDensity, BemQuadrature, BoundaryTrace, Panel};
use fembem_uzawa::estimate::mu_bem;
use fembem_uzawa::fem::{assemble_riesz, prolongate, CsrMatrix, FeFunction, GaussRule};
use fembem_uzawa::mesh::{
    make_initial_mesh, refine_nvb, refine_nvb_edges, BoundaryMesh, DomainId, Mesh, Point,
};
use fembem_uzawa::model::ProblemSpec;
use fembem_uzawa::solver::{
    algebraic_error_surrogate, build_local_multilevel_preconditioner, cholesky_solve, pcg, Jacobi,
    MultilevelHierarchy, Preconditioner, SpdMatrix, StoppingRule,
};
use fembem_uzawa::uzawa::{AdaptiveProblem, FemStep};
use fembem_uzawa::Result;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `int_a^b f` with `levels` pieces graded geometrically towards each
/// endpoint, for integrands with log or `1/r`-type endpoint behaviour.
pub fn graded_integral(a: f64, b: f64, levels: usize, f: &mut impl FnMut(f64) -> f64) -> f64 {
    let rule = GaussRule::new(20);
    let mut sum = 0.0;
    let piece = |lo: f64, hi: f64, f: &mut dyn FnMut(f64) -> f64| {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| w * f(lo + t * (hi - lo)))
            .sum::<f64>()
            * (hi - lo)
    };
    let h = 0.5 * (b - a);
    let mut s = 1.0;
    for _ in 0..levels {
        let (inner, outer) = (0.5 * s * h, s * h);
        sum += piece(a + inner, a + outer, f);
        sum += piece(b - outer, b - inner, f);
        s *= 0.5;
    }
    sum
}

/// `int_{[p, q]} f ds` with the same grading.
pub fn graded_segment(p: Point, q: Point, levels: usize, f: &mut impl FnMut(Point) -> f64) -> f64 {
    let len = (q[0] - p[0]).hypot(q[1] - p[1]);
    len * graded_integral(0.0, 1.0, levels, &mut |t| f([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]))
}

pub fn log_kernel(x: Point, y: Point) -> f64 {
    -((x[0] - y[0]).hypot(x[1] - y[1])).ln() / (2.0 * PI)
}

/// `d/dn_y G(x - y)` for the unit normal `n` at `y`.
pub fn double_layer_kernel(x: Point, y: Point, n: [f64; 2]) -> f64 {
    let d = [x[0] - y[0], x[1] - y[1]];
    (d[0] * n[0] + d[1] * n[1]) / (2.0 * PI * (d[0] * d[0] + d[1] * d[1]))
}

/// `int_0^L int_0^L -log|s - t| / 2pi dt ds`; the inner integral is split at
/// the singularity and written in the distance `r = |s - t|`.
pub fn self_entry_by_quadrature(len: f64) -> f64 {
    let k = |r: f64| -r.ln() / (2.0 * std::f64::consts::PI);
    graded_integral(0.0, len, 50, &mut |s| {
        graded_integral(0.0, s, 50, &mut |r| k(r)) + graded_integral(0.0, len - s, 50, &mut |r| k(r))
    })
}

/// Single layer Galerkin entry of two panels by an `n x n` tensor Gauss rule.
pub fn tensor_gauss_entry(p: &Panel, q: &Panel, n: usize) -> f64 {
    let g = GaussRule::new(n);
    let mut sum = 0.0;
    for (&s, &ws) in g.points.iter().zip(&g.weights) {
        let x = [p.a[0] + s * (p.b[0] - p.a[0]), p.a[1] + s * (p.b[1] - p.a[1])];
        for (&t, &wt) in g.points.iter().zip(&g.weights) {
            let y = [q.a[0] + t * (q.b[0] - q.a[0]), q.a[1] + t * (q.b[1] - q.a[1])];
            sum += ws * wt * log_kernel(x, y);
        }
    }
    sum * p.length * q.length
}

/// `<(K - 1/2) 1, chi_i>` for every segment by nested graded quadrature of
/// the double layer kernel.
pub fn double_layer_constant_oracle(bmesh: &BoundaryMesh) -> Vec<f64> {
    let n = bmesh.len();
    (0..n)
        .map(|i| {
            let (a, b) = bmesh.endpoints(i);
            let mut sum = -0.5 * bmesh.segments[i].length;
            for j in (0..n).filter(|&j| j != i) {
                let (c, d) = bmesh.endpoints(j);
                let nj = bmesh.segments[j].normal;
                sum += graded_segment(a, b, 34, &mut |x| {
                    graded_segment(c, d, 34, &mut |y| double_layer_kernel(x, y, nj))
                });
            }
            sum
        })
        .collect()
}

pub fn lshape_boundary(uniform: usize) -> BoundaryMesh {
    let mut mesh = make_initial_mesh(DomainId::LShape);
    for _ in 0..uniform {
        mesh = mesh.uniform_refinement().0;
    }
    BoundaryMesh::from_mesh(&mesh)
}

/// Largest deviation of assembled single layer entries from 32 x 32 tensor
/// Gauss, over all panel pairs at least one panel length apart. The error is
/// relative to the entry, or to `|E_i||E_j| / 2pi` where the kernel changes
/// sign and the entry itself is close to zero. Also returns the number of
/// pairs checked.
pub fn disjoint_entry_error(bmesh: &BoundaryMesh) -> (usize, f64) {
    let v = assemble_single_layer(bmesh, &BemQuadrature::default());
    let panels: Vec<Panel> = (0..bmesh.len())
        .map(|k| {
            let (a, b) = bmesh.endpoints(k);
            Panel::new(a, b)
        })
        .collect();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (i, p) in panels.iter().enumerate() {
        for (j, q) in panels.iter().enumerate() {
            let dist = q.distance(p.a).min(q.distance(p.b)).min(p.distance(q.a)).min(p.distance(q.b));
            if i == j || dist < p.length.max(q.length) {
                continue;
            }
            let reference = tensor_gauss_entry(p, q, 32);
            let scale = reference.abs().max(p.length * q.length / (2.0 * PI));
            worst = worst.max((v.get(i, j) - reference).abs() / scale);
            checked += 1;
        }
    }
    (checked, worst)
}

/// PCG iterations with the local multilevel preconditioner on the Riesz
/// matrix after each of `levels` mesh-size halvings of the L-shape.
pub fn multilevel_iterations(levels: usize, tau: f64) -> Result<Vec<usize>> {
    let mut mesh = make_initial_mesh(DomainId::LShape);
    let mut h = MultilevelHierarchy::new(&mesh);
    let mut counts = Vec::new();
    for _ in 0..levels {
        // two bisection rounds halve the mesh size
        for _ in 0..2 {
            let (fine, rel) = mesh.uniform_refinement();
            h.push_level(&fine, &rel)?;
            mesh = fine;
        }
        let s = assemble_riesz(&mesh);
        let b: Vec<f64> = mesh.vertices().iter().map(|p| (3.0 * p[0]).sin() + p[1] * p[1]).collect();
        let p = build_local_multilevel_preconditioner(&h, &mesh)?;
        let res = pcg(&s, &b, &vec![0.0; b.len()], &p, &StoppingRule::relative(tau))?;
        counts.push(if res.hit_max_iterations { usize::MAX } else { res.iterations });
    }
    Ok(counts)
}

fn refined_lshape(bisections: usize) -> Result<(Mesh, MultilevelHierarchy)> {
    let mut mesh = make_initial_mesh(DomainId::LShape);
    let mut h = MultilevelHierarchy::new(&mesh);
    for _ in 0..bisections {
        let (fine, rel) = mesh.uniform_refinement();
        h.push_level(&fine, &rel)?;
        mesh = fine;
    }
    Ok((mesh, h))
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn energy_error(s: &CsrMatrix, exact: &[f64], x: &[f64]) -> f64 {
    let e: Vec<f64> = exact.iter().zip(x).map(|(a, b)| a - b).collect();
    s.energy(&e)
}

/// Largest relative increase of the energy error `||x* - x_k||_S^2` from one
/// PCG step to the next, for Jacobi and the multilevel preconditioner.
pub fn pcg_energy_growth() -> Result<f64> {
    let (mesh, h) = refined_lshape(6)?;
    let s = assemble_riesz(&mesh);
    let b = random_vector(s.n(), 1);
    let exact = cholesky_solve(&s, &b)?;
    let x0 = random_vector(s.n(), 2);
    let jac = Jacobi::new(&s.diagonal());
    let ml = build_local_multilevel_preconditioner(&h, &mesh)?;
    let mut worst = f64::NEG_INFINITY;
    for p in [&jac as &dyn Preconditioner, &ml] {
        let mut prev = energy_error(&s, &exact, &x0);
        for k in 1..40 {
            let x = pcg(&s, &b, &x0, p, &StoppingRule::fixed(k))?.solution;
            let e = energy_error(&s, &exact, &x);
            worst = worst.max((e - prev) / prev);
            prev = e;
        }
    }
    Ok(worst)
}

/// Largest relative gap between the surrogate with `P = S` and the squared
/// energy error, over random iterates.
pub fn exact_surrogate_deviation() -> Result<f64> {
    let (mesh, _) = refined_lshape(5)?;
    let s = assemble_riesz(&mesh);
    let b = random_vector(s.n(), 3);
    let exact = cholesky_solve(&s, &b)?;
    let factor = s.factor()?;
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let x = random_vector(s.n(), 10 + seed);
        let surrogate = algebraic_error_surrogate(&s, &b, &x, &factor);
        let e = energy_error(&s, &exact, &x);
        worst = worst.max((surrogate - e).abs() / e);
    }
    Ok(worst)
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize, share: f64) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    ids.truncate(((share * n as f64).ceil() as usize).max(1));
    ids
}

/// One refine-and-perturb instance of an estimator.
#[derive(Debug, Clone, Copy)]
pub struct AxiomSample {
    /// `|rho_fine(S, psi_fine) - rho_coarse(S, psi_coarse)| / ||psi_fine - psi_coarse||`
    /// over the elements `S` that were not refined.
    pub stability: f64,
    /// `rho_fine(R', psi)^2 / rho_coarse(R, psi)^2` for a fixed coarse `psi`,
    /// where `R` are the refined elements and `R'` their sons.
    pub reduction: f64,
}

fn split_by_refinement(sons: &[Vec<usize>]) -> (Vec<(usize, usize)>, Vec<usize>) {
    let mut kept = Vec::new();
    let mut refined = Vec::new();
    for (c, s) in sons.iter().enumerate() {
        if s.len() == 1 {
            kept.push((c, s[0]));
        } else {
            refined.push(c);
        }
    }
    (kept, refined)
}

fn sum_at(ind: &[f64], ids: impl Iterator<Item = usize>) -> f64 {
    ids.map(|i| ind[i]).sum()
}

fn random_fe(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

fn coarse_volume_mesh(spec: &ProblemSpec, rng: &mut ChaCha8Rng) -> Mesh {
    let (mut mesh, _) = spec.initial_mesh().uniform_refinement();
    for _ in 0..rng.gen_range(1..4) {
        let marked = random_subset(rng, mesh.n_triangles(), 0.3);
        mesh = refine_nvb(&mesh, &marked).0;
    }
    mesh
}

/// Stability and reduction of the FEM estimator `eta` on a random instance.
///
/// The data `u_prev` and `phi` are fixed coarse functions carried to the fine
/// mesh; `psi` is the Riesz update `w`, compared in the H1 norm.
pub fn fem_axiom_sample(spec: &ProblemSpec, seed: u64) -> Result<AxiomSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coarse = coarse_volume_mesh(spec, &mut rng);
    let u_prev = FeFunction::interpolate(&coarse, |x| spec.u(x))
        .axpy(1.0, &FeFunction::new(random_fe(&mut rng, coarse.n_vertices(), 0.1)));
    let phi = BemDensity::new(random_fe(&mut rng, coarse.boundary_facets().len(), 1.0));
    let w = FeFunction::new(random_fe(&mut rng, coarse.n_vertices(), 1.0));

    let share = rng.gen_range(0.05..0.5);
    let marked = random_subset(&mut rng, coarse.n_triangles(), share);
    let (fine, rel) = refine_nvb(&coarse, &marked);
    let w_up = prolongate(&w, &rel)?;
    let scale = 10f64.powf(rng.gen_range(-4.0..0.0));
    let w_fine = w_up.axpy(1.0, &FeFunction::new(random_fe(&mut rng, fine.n_vertices(), scale)));

    let mut h0 = MultilevelHierarchy::new(&coarse);
    let mut step = FemStep::new(spec, u_prev.clone(), phi.clone(), &mut h0);
    let eta_c = step.estimate(&coarse, &w.values)?.indicators;
    let mut h1 = MultilevelHierarchy::new(&fine);
    let mut step = FemStep::new(spec, prolongate(&u_prev, &rel)?, phi.prolongate(&rel)?, &mut h1);
    let eta_f = step.estimate(&fine, &w_fine.values)?.indicators;
    let eta_up = step.estimate(&fine, &w_up.values)?.indicators;

    let (kept, refined) = split_by_refinement(&rel.sons);
    let rc = sum_at(&eta_c, kept.iter().map(|k| k.0)).sqrt();
    let rf = sum_at(&eta_f, kept.iter().map(|k| k.1)).sqrt();
    let d: Vec<f64> = w_fine.values.iter().zip(&w_up.values).map(|(a, b)| a - b).collect();
    let norm = assemble_riesz(&fine).energy(&d).sqrt();

    let before = sum_at(&eta_c, refined.iter().copied());
    let after = sum_at(&eta_up, refined.iter().flat_map(|&c| rel.sons[c].iter().copied()));
    Ok(AxiomSample {
        stability: (rf - rc).abs() / norm,
        reduction: after / before,
    })
}

fn bem_estimate(spec: &ProblemSpec, mesh: &Mesh, psi: &[f64], gfun: &FeFunction) -> Result<Vec<f64>> {
    let bmesh = BoundaryMesh::from_mesh(mesh);
    let g = BoundaryTrace::of_fe_function(mesh, gfun);
    let tangential = |x, t: [f64; 2]| {
        let d = spec.grad_u0(x);
        d[0] * t[0] + d[1] * t[1]
    };
    Ok(mu_bem(&bmesh, &BemDensity::new(psi.to_vec()), &g, &tangential, &GaussRule::new(3))?.indicators)
}

/// Stability and reduction of the BEM estimator `mu` on a random instance.
///
/// The data `g = trace u_prev - I u0` is frozen on the coarse mesh and carried
/// to the fine one; densities are compared in the energy norm of `V`.
pub fn bem_axiom_sample(spec: &ProblemSpec, seed: u64) -> Result<AxiomSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut coarse, _) = spec.initial_mesh().uniform_refinement();
    for _ in 0..rng.gen_range(1..4) {
        let marked = random_subset(&mut rng, coarse.boundary_facets().len(), 0.4);
        coarse = refine_nvb_edges(&coarse, &[], &marked).0;
    }
    let nb = coarse.boundary_facets().len();
    let gfun = FeFunction::new(
        coarse
            .vertices()
            .iter()
            .map(|&x| 0.5 * x[0] - x[1] * x[1] - spec.u0(x) + 0.05 * rng.gen_range(-1.0..1.0))
            .collect(),
    );
    let psi: Vec<f64> = random_fe(&mut rng, nb, 1.0);

    let share = rng.gen_range(0.05..0.5);
    let marked = random_subset(&mut rng, nb, share);
    let (fine, rel) = refine_nvb_edges(&coarse, &[], &marked);
    let psi_up = BemDensity::new(psi.clone()).prolongate(&rel)?.values;
    let scale = 10f64.powf(rng.gen_range(-4.0..0.0));
    let psi_fine: Vec<f64> = psi_up
        .iter()
        .map(|p| p + scale * rng.gen_range(-1.0..1.0))
        .collect();
    let g_fine = prolongate(&gfun, &rel)?;

    let mu_c = bem_estimate(spec, &coarse, &psi, &gfun)?;
    let mu_f = bem_estimate(spec, &fine, &psi_fine, &g_fine)?;
    let mu_up = bem_estimate(spec, &fine, &psi_up, &g_fine)?;

    let (kept, refined) = split_by_refinement(&rel.boundary_sons);
    let rc = sum_at(&mu_c, kept.iter().map(|k| k.0)).sqrt();
    let rf = sum_at(&mu_f, kept.iter().map(|k| k.1)).sqrt();
    let v = assemble_single_layer(&BoundaryMesh::from_mesh(&fine), &BemQuadrature::default());
    let d: Vec<f64> = psi_fine.iter().zip(&psi_up).map(|(a, b)| a - b).collect();
    let norm = v.energy(&d).sqrt();

    let before = sum_at(&mu_c, refined.iter().copied());
    let after = sum_at(&mu_up, refined.iter().flat_map(|&c| rel.boundary_sons[c].iter().copied()));
    Ok(AxiomSample {
        stability: (rf - rc).abs() / norm,
        reduction: after / before,
    })
}

/// Summary of the axiom probes. The stability constant is fitted on as many
/// calibration seeds as there are probes, and every probe must stay within
/// twice that value. Every reduction ratio must be below one.
#[derive(Debug, Clone, Copy)]
pub struct AxiomSummary {
    pub fitted_stability: f64,
    pub max_stability: f64,
    pub max_reduction: f64,
    pub instances: usize,
}

impl AxiomSummary {
    pub fn passes(&self) -> bool {
        self.max_stability <= 2.0 * self.fitted_stability && self.max_reduction < 1.0
    }
}

pub fn axiom_summary(
    sample: impl Fn(u64) -> Result<AxiomSample>,
    instances: usize,
) -> Result<AxiomSummary> {
    let mut fitted: f64 = 0.0;
    for seed in 10_000..10_000 + instances as u64 {
        fitted = fitted.max(sample(seed)?.stability);
    }
    let (mut max_s, mut max_r): (f64, f64) = (0.0, 0.0);
    for seed in 0..instances as u64 {
        let s = sample(seed)?;
        max_s = max_s.max(s.stability);
        max_r = max_r.max(s.reduction);
    }
    Ok(AxiomSummary {
        fitted_stability: fitted,
        max_stability: max_s,
        max_reduction: max_r,
        instances,
    })
}
