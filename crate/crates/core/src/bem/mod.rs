//! Galerkin boundary elements for the exterior Laplace problem: piecewise
//! constant densities for the single layer, piecewise affine traces for the
//! double layer.

pub mod kernel;

use crate::error::{Error, Result};
use crate::fem::quadrature::GaussRule;
use crate::fem::FeFunction;
use crate::mesh::{BoundaryMesh, Mesh, Point, RefinementRelation};
use crate::solver::DenseMatrix;

pub use kernel::{single_layer_self, NearFieldRule, Panel};

/// Piecewise constant density, one value per boundary segment.
#[derive(Debug, Clone, PartialEq)]
pub struct BemDensity {
    pub values: Vec<f64>,
}

impl BemDensity {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    /// Sons inherit the value of their father.
    pub fn prolongate(&self, relation: &RefinementRelation) -> Result<BemDensity> {
        if self.values.len() != relation.boundary_sons.len() {
            return Err(Error::DimensionMismatch {
                expected: relation.boundary_sons.len(),
                got: self.values.len(),
            });
        }
        Ok(BemDensity::new(
            relation
                .boundary_fathers
                .iter()
                .map(|&f| self.values[f])
                .collect(),
        ))
    }
}

/// Continuous piecewise affine boundary function, one value per boundary vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub values: Vec<f64>,
}

impl BoundaryTrace {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn of_fe_function(mesh: &Mesh, u: &FeFunction) -> Self {
        Self::new(u.boundary_values(mesh))
    }

    pub fn segment_values(&self, bmesh: &BoundaryMesh, k: usize) -> (f64, f64) {
        let s = &bmesh.segments[k];
        (self.values[s.start], self.values[s.end])
    }

    pub fn sub(&self, other: &BoundaryTrace) -> BoundaryTrace {
        BoundaryTrace::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

/// Settings for the non-singular Galerkin integrals.
#[derive(Debug, Clone, Default)]
pub struct BemQuadrature {
    pub near_field: NearFieldRule,
}

fn panels(bmesh: &BoundaryMesh) -> Vec<Panel> {
    (0..bmesh.len())
        .map(|k| {
            let (a, b) = bmesh.endpoints(k);
            Panel::new(a, b)
        })
        .collect()
}

/// Galerkin matrix of the single layer operator in the P0 basis.
pub fn assemble_single_layer(bmesh: &BoundaryMesh, quad: &BemQuadrature) -> DenseMatrix {
    let n = bmesh.len();
    let ps = panels(bmesh);
    let mut v = DenseMatrix::zeros(n);
    for i in 0..n {
        v.set(i, i, single_layer_self(ps[i].length));
        for j in (i + 1)..n {
            let src = &ps[j];
            let val = quad
                .near_field
                .integrate(ps[i].a, ps[i].b, src, &mut |x| src.single_layer(x));
            v.set(i, j, val);
            v.set(j, i, val);
        }
    }
    v
}

/// Load vector `<(K - 1/2) g, chi_i>` for a piecewise affine trace `g`.
pub fn assemble_dl_rhs(
    bmesh: &BoundaryMesh,
    g: &BoundaryTrace,
    quad: &BemQuadrature,
) -> Result<Vec<f64>> {
    check_trace(bmesh, g)?;
    let n = bmesh.len();
    let ps = panels(bmesh);
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let (ga, gb) = g.segment_values(bmesh, i);
        let mut s = -0.25 * ps[i].length * (ga + gb);
        for (j, src) in ps.iter().enumerate() {
            if j == i {
                continue;
            }
            let (ha, hb) = g.segment_values(bmesh, j);
            s += quad
                .near_field
                .integrate(ps[i].a, ps[i].b, src, &mut |x| src.double_layer(x, ha, hb));
        }
        rhs[i] = s;
    }
    Ok(rhs)
}

fn check_trace(bmesh: &BoundaryMesh, g: &BoundaryTrace) -> Result<()> {
    if g.values.len() != bmesh.points.len() {
        return Err(Error::DimensionMismatch {
            expected: bmesh.points.len(),
            got: g.values.len(),
        });
    }
    Ok(())
}

fn check_density(bmesh: &BoundaryMesh, psi: &BemDensity) -> Result<()> {
    if psi.values.len() != bmesh.len() {
        return Err(Error::DimensionMismatch {
            expected: bmesh.len(),
            got: psi.values.len(),
        });
    }
    Ok(())
}

/// Arc-length derivative of the residual `(K - 1/2) g - V psi` at the nodes of
/// `rule` on every segment. Entry `[k][q]` belongs to node `q` of segment `k`.
pub fn eval_residual_derivative(
    bmesh: &BoundaryMesh,
    psi: &BemDensity,
    g: &BoundaryTrace,
    rule: &GaussRule,
) -> Result<Vec<Vec<f64>>> {
    check_density(bmesh, psi)?;
    check_trace(bmesh, g)?;
    let ps = panels(bmesh);
    let mut out = Vec::with_capacity(ps.len());
    for (i, target) in ps.iter().enumerate() {
        let t = target.tangent;
        let (ga, gb) = g.segment_values(bmesh, i);
        let own_slope = (gb - ga) / target.length;
        let mut row = Vec::with_capacity(rule.len());
        for &s in &rule.points {
            let x = bmesh.point_at(i, s);
            // own panel: V part is a principal log, K part vanishes
            let xi = s * target.length;
            let mut d = -0.5 * own_slope
                - psi.values[i] * ((target.length - xi) / xi).ln() / (2.0 * std::f64::consts::PI);
            for (j, src) in ps.iter().enumerate() {
                if j == i {
                    continue;
                }
                if src.distance(x) == 0.0 {
                    return Err(Error::SingularEvaluation { segment: j });
                }
                let (ha, hb) = g.segment_values(bmesh, j);
                let dk = src.double_layer_gradient(x, ha, hb);
                let dv = src.single_layer_gradient(x);
                d += (dk[0] - psi.values[j] * dv[0]) * t[0] + (dk[1] - psi.values[j] * dv[1]) * t[1];
            }
            row.push(d);
        }
        out.push(row);
    }
    Ok(out)
}

/// Nodal interpolant of `u0` on the boundary vertices.
pub fn nodal_interpolate_u0(bmesh: &BoundaryMesh, u0: &dyn Fn(Point) -> f64) -> BoundaryTrace {
    BoundaryTrace::new(bmesh.points.iter().map(|&p| u0(p)).collect())
}

/// `(sum_E |E| ||phi - phi_h||_{L2(E)}^2)^{1/2}`, a computable stand-in for the
/// energy error of the density.
pub fn hminushalf_error_surrogate(
    bmesh: &BoundaryMesh,
    phi: &dyn Fn(Point, [f64; 2]) -> f64,
    phi_h: &BemDensity,
) -> Result<f64> {
    check_density(bmesh, phi_h)?;
    let rule = GaussRule::new(4);
    let mut sum = 0.0;
    for (k, seg) in bmesh.segments.iter().enumerate() {
        let mut e2 = 0.0;
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let d = phi(bmesh.point_at(k, s), seg.normal) - phi_h.values[k];
            e2 += w * d * d;
        }
        sum += seg.length * seg.length * e2;
    }
    Ok(sum.sqrt())
}
