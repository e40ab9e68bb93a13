//! Residual error estimators and Dörfler marking.

use crate::bem::{eval_residual_derivative, BemDensity, BoundaryTrace};
use crate::error::{Error, Result};
use crate::fem::quadrature::{GaussRule, QuadratureRule};
use crate::fem::FeFunction;
use crate::mesh::{BoundaryMesh, Mesh, Point};
use crate::model::InteriorOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Fem,
    Bem,
}

#[derive(Debug, Clone)]
pub struct EstimatorReport {
    pub kind: EstimatorKind,
    /// Squared local contributions (per triangle or per boundary segment).
    pub indicators: Vec<f64>,
    /// Square root of the sum of the indicators.
    pub total: f64,
    /// Squared algebraic error surrogate of the solve behind the report.
    pub algebraic: f64,
}

impl EstimatorReport {
    fn new(kind: EstimatorKind, indicators: Vec<f64>) -> Self {
        let total = indicators.iter().sum::<f64>().sqrt();
        Self {
            kind,
            indicators,
            total,
            algebraic: 0.0,
        }
    }
}

/// Elements selected by the Dörfler criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedSet {
    pub ids: Vec<usize>,
    pub theta: f64,
    /// Share of the total squared estimator carried by `ids`.
    pub achieved_fraction: f64,
}

/// Residual estimator of the Riesz problem for the Uzawa update `w`.
///
/// `eta(T)^2 = |T| ||f - b - c - w||_T^2 + |T|^{1/2} ||[sigma.n]||_{dT}^2` with
/// the discrete flux `sigma = grad w + A(grad u_prev)`; on boundary edges the
/// jump is replaced by `phi_total - sigma.n`. `phi_total(k, x)` evaluates the
/// boundary flux data on boundary facet `k`.
pub fn eta_fem(
    mesh: &Mesh,
    w: &FeFunction,
    u_prev: &FeFunction,
    f: &dyn Fn(Point) -> f64,
    phi_total: &dyn Fn(usize, Point) -> f64,
    op: &dyn InteriorOperator,
) -> Result<EstimatorReport> {
    for u in [w, u_prev] {
        if u.values.len() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_vertices(),
                got: u.values.len(),
            });
        }
    }
    let rule = QuadratureRule::seven_point();
    let edge_rule = GaussRule::new(2);
    let boundary_rule = GaussRule::new(4);
    let nt = mesh.n_triangles();
    let mut ind = vec![0.0; nt];
    let mut grad_w = Vec::with_capacity(nt);
    let mut grad_u = Vec::with_capacity(nt);
    for (t, slot) in ind.iter_mut().enumerate() {
        let geo = mesh.geometry(t);
        let v = mesh.triangles()[t].vertices;
        let gw = w.gradient_on(t, mesh, &geo);
        let gu = u_prev.gradient_on(t, mesh, &geo);
        let corners = mesh.corners(t);
        let mut vol = 0.0;
        for (x, l, q) in rule.map_points(&corners) {
            let wx = l[0] * w.values[v[0]] + l[1] * w.values[v[1]] + l[2] * w.values[v[2]];
            let ux = l[0] * u_prev.values[v[0]] + l[1] * u_prev.values[v[1]] + l[2] * u_prev.values[v[2]];
            let r = f(x) - op.b(x, gu) - op.c(x, ux) - wx;
            vol += q * geo.area * r * r;
        }
        *slot = geo.area * vol;
        grad_w.push(gw);
        grad_u.push(gu);
    }
    let flux = |t: usize, x: Point| {
        let a = op.flux(x, grad_u[t]);
        [grad_w[t][0] + a[0], grad_w[t][1] + a[1]]
    };
    let pts = mesh.vertices();
    let table = mesh.edges();
    for (e, tris) in table.edge_triangles.iter().enumerate() {
        let [Some(t1), Some(t2)] = *tris else { continue };
        let [a, b] = table.edges[e];
        let (pa, pb) = (pts[a], pts[b]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let n = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
        let mut j2 = 0.0;
        for (&s, &q) in edge_rule.points.iter().zip(&edge_rule.weights) {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let (s1, s2) = (flux(t1, x), flux(t2, x));
            let j = (s1[0] - s2[0]) * n[0] + (s1[1] - s2[1]) * n[1];
            j2 += q * len * j * j;
        }
        ind[t1] += mesh.area(t1).sqrt() * j2;
        ind[t2] += mesh.area(t2).sqrt() * j2;
    }
    for (k, fa) in mesh.boundary_facets().iter().enumerate() {
        let (pa, pb) = (pts[fa.a], pts[fa.b]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let n = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
        let mut j2 = 0.0;
        for (&s, &q) in boundary_rule.points.iter().zip(&boundary_rule.weights) {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let sg = flux(fa.owner, x);
            let j = phi_total(k, x) - (sg[0] * n[0] + sg[1] * n[1]);
            j2 += q * len * j * j;
        }
        ind[fa.owner] += mesh.area(fa.owner).sqrt() * j2;
    }
    Ok(EstimatorReport::new(EstimatorKind::Fem, ind))
}

/// Residual estimator of the boundary integral equation
/// `V psi = (K - 1/2) g` plus data oscillation of `u0`:
///
/// `mu(E)^2 = |E| ||d/ds[(K - 1/2) g - V psi]||_E^2 + |E| ||(1 - P0) d/ds u0||_E^2`.
///
/// `u0_tangential(x, t)` is the derivative of `u0` along the unit tangent `t`.
pub fn mu_bem(
    bmesh: &BoundaryMesh,
    psi: &BemDensity,
    g: &BoundaryTrace,
    u0_tangential: &dyn Fn(Point, [f64; 2]) -> f64,
    rule: &GaussRule,
) -> Result<EstimatorReport> {
    let d = eval_residual_derivative(bmesh, psi, g, rule)?;
    let ind = d
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let seg = &bmesh.segments[k];
            let res: f64 = row.iter().zip(&rule.weights).map(|(r, w)| w * r * r).sum();
            let vals: Vec<f64> = rule
                .points
                .iter()
                .map(|&s| u0_tangential(bmesh.point_at(k, s), seg.tangent))
                .collect();
            let mean: f64 = vals.iter().zip(&rule.weights).map(|(v, w)| v * w).sum();
            let osc: f64 = vals
                .iter()
                .zip(&rule.weights)
                .map(|(v, w)| w * (v - mean) * (v - mean))
                .sum();
            seg.length * seg.length * (res + osc)
        })
        .collect();
    Ok(EstimatorReport::new(EstimatorKind::Bem, ind))
}

/// Smallest set (largest indicators first, ties by index) carrying at least
/// `theta` of the total squared estimator.
pub fn doerfler_mark(indicators: &[f64], theta: f64) -> MarkedSet {
    let total: f64 = indicators.iter().sum();
    if !(total > 0.0) {
        return MarkedSet {
            ids: Vec::new(),
            theta,
            achieved_fraction: 0.0,
        };
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| {
        indicators[b]
            .partial_cmp(&indicators[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let goal = theta * total * (1.0 - 1e-14);
    let mut acc = 0.0;
    let mut ids = Vec::new();
    for k in order {
        if acc >= goal || indicators[k] <= 0.0 {
            break;
        }
        acc += indicators[k];
        ids.push(k);
    }
    MarkedSet {
        ids,
        theta,
        achieved_fraction: acc / total,
    }
}

/// Computable bound for the total error of the coupled iterate:
/// `eta + mu + ||w||_{H1} + sqrt(fem solver surrogate) + sqrt(bem solver surrogate)`.
pub fn global_nu(eta: f64, mu: f64, w_h1: f64, fem_surrogate: f64, bem_surrogate: f64) -> f64 {
    eta + mu + w_h1 + fem_surrogate.max(0.0).sqrt() + bem_surrogate.max(0.0).sqrt()
}
