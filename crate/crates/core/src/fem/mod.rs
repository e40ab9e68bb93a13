//! Lowest-order Lagrange elements: Riesz matrix, residual right-hand sides,
//! prolongation and error norms.

pub mod quadrature;
pub mod sparse;

use crate::bem::BemDensity;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, RefinementRelation, TriangleGeometry};
use crate::model::{apply_interior_operator, InteriorOperator};

pub use quadrature::{GaussRule, QuadratureRule};
pub use sparse::CsrMatrix;

/// Continuous piecewise affine function given by its vertex values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    pub values: Vec<f64>,
}

impl FeFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        Self::new(mesh.vertices().iter().map(|&p| f(p)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn gradient_on(&self, t: usize, mesh: &Mesh, geo: &TriangleGeometry) -> [f64; 2] {
        let v = mesh.triangles()[t].vertices;
        let mut g = [0.0; 2];
        for k in 0..3 {
            g[0] += self.values[v[k]] * geo.gradients[k][0];
            g[1] += self.values[v[k]] * geo.gradients[k][1];
        }
        g
    }

    /// Values at the boundary vertices, in boundary order.
    pub fn boundary_values(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.boundary_facets()
            .iter()
            .map(|f| self.values[f.a])
            .collect()
    }

    /// `u + alpha w`.
    pub fn axpy(&self, alpha: f64, w: &FeFunction) -> FeFunction {
        FeFunction::new(
            self.values
                .iter()
                .zip(&w.values)
                .map(|(u, w)| u + alpha * w)
                .collect(),
        )
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_vertices(),
                got: self.values.len(),
            });
        }
        Ok(())
    }
}

/// Gram matrix of the full H1 inner product in the hat basis.
pub fn assemble_riesz(mesh: &Mesh) -> CsrMatrix {
    let mut trip = Vec::with_capacity(9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let geo = mesh.geometry(t);
        let v = mesh.triangles()[t].vertices;
        for i in 0..3 {
            for j in 0..3 {
                let gi = geo.gradients[i];
                let gj = geo.gradients[j];
                let stiff = geo.area * (gi[0] * gj[0] + gi[1] * gj[1]);
                let mass = geo.area / 12.0 * if i == j { 2.0 } else { 1.0 };
                trip.push((v[i], v[j], stiff + mass));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.n_vertices(), &trip).expect("vertex ids are in range")
}

/// Diagonal of the Riesz matrix without assembling it.
pub fn riesz_diagonal(mesh: &Mesh) -> Vec<f64> {
    let mut d = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let geo = mesh.geometry(t);
        let v = mesh.triangles()[t].vertices;
        for k in 0..3 {
            let g = geo.gradients[k];
            d[v[k]] += geo.area * (g[0] * g[0] + g[1] * g[1] + 1.0 / 6.0);
        }
    }
    d
}

/// Squared H1 norm `u^T S u`.
pub fn h1_norm(mesh: &Mesh, u: &FeFunction) -> f64 {
    assemble_riesz(mesh).energy(&u.values).max(0.0).sqrt()
}

/// Right-hand side of the Riesz problem for the Uzawa update:
/// `F_i = <f, xi_i> + <phi0 + phi_j, xi_i>_Gamma - <A u_prev, xi_i>`.
///
/// `phi_j` is a P0 density on the boundary of `mesh`.
pub fn assemble_w_rhs(
    mesh: &Mesh,
    f: &dyn Fn(Point) -> f64,
    phi0: &dyn Fn(Point, [f64; 2]) -> f64,
    phi_j: &BemDensity,
    u_prev: &FeFunction,
    op: &dyn InteriorOperator,
) -> Result<Vec<f64>> {
    u_prev.check(mesh)?;
    let facets = mesh.boundary_facets();
    if phi_j.values.len() != facets.len() {
        return Err(Error::DimensionMismatch {
            expected: facets.len(),
            got: phi_j.values.len(),
        });
    }
    let mut rhs = load_vector(mesh, f);
    let gauss = GaussRule::new(4);
    let pts = mesh.vertices();
    for (k, fa) in facets.iter().enumerate() {
        let (a, b) = (pts[fa.a], pts[fa.b]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let normal = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
        for (&s, &w) in gauss.points.iter().zip(&gauss.weights) {
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let val = w * len * (phi0(x, normal) + phi_j.values[k]);
            rhs[fa.a] += (1.0 - s) * val;
            rhs[fa.b] += s * val;
        }
    }
    let au = apply_interior_operator(op, u_prev, mesh);
    for (r, a) in rhs.iter_mut().zip(au) {
        *r -= a;
    }
    Ok(rhs)
}

/// `<f, xi_i>` with the 7-point rule.
pub fn load_vector(mesh: &Mesh, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
    let rule = QuadratureRule::seven_point();
    let mut out = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let corners = mesh.corners(t);
        let area = mesh.area(t);
        let v = mesh.triangles()[t].vertices;
        for (x, l, w) in rule.map_points(&corners) {
            let fx = f(x) * w * area;
            for k in 0..3 {
                out[v[k]] += fx * l[k];
            }
        }
    }
    out
}

/// Exact embedding of a coarse P1 function into the refined space.
pub fn prolongate(u: &FeFunction, relation: &RefinementRelation) -> Result<FeFunction> {
    if u.values.len() != relation.coarse_vertices {
        return Err(Error::DimensionMismatch {
            expected: relation.coarse_vertices,
            got: u.values.len(),
        });
    }
    let mut values = u.values.clone();
    values.reserve(relation.new_vertex_parents.len());
    for &[a, b] in &relation.new_vertex_parents {
        let m = 0.5 * (values[a] + values[b]);
        values.push(m);
    }
    Ok(FeFunction::new(values))
}

/// `(||grad(u - u_h)||^2 + ||u - u_h||^2)^{1/2}` by elementwise quadrature.
pub fn h1_error(
    mesh: &Mesh,
    exact: &dyn Fn(Point) -> (f64, [f64; 2]),
    uh: &FeFunction,
    rule: &QuadratureRule,
) -> Result<f64> {
    uh.check(mesh)?;
    let mut sum = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = mesh.geometry(t);
        let v = mesh.triangles()[t].vertices;
        let g = uh.gradient_on(t, mesh, &geo);
        let corners = mesh.corners(t);
        for (x, l, w) in rule.map_points(&corners) {
            let (u, gu) = exact(x);
            let val = l[0] * uh.values[v[0]] + l[1] * uh.values[v[1]] + l[2] * uh.values[v[2]];
            let e = [gu[0] - g[0], gu[1] - g[1]];
            sum += w * geo.area * (e[0] * e[0] + e[1] * e[1] + (u - val) * (u - val));
        }
    }
    Ok(sum.sqrt())
}
