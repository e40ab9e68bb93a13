//! The two inner problems of one Uzawa step.

use crate::bem::{
    assemble_dl_rhs, assemble_single_layer, nodal_interpolate_u0, BemDensity, BemQuadrature,
    BoundaryTrace,
};
use crate::error::Result;
use crate::estimate::{eta_fem, mu_bem, EstimatorReport};
use crate::fem::quadrature::GaussRule;
use crate::fem::{assemble_riesz, assemble_w_rhs, prolongate, FeFunction};
use crate::mesh::{refine_nvb, refine_nvb_edges, BoundaryMesh, Mesh, RefinementRelation};
use crate::model::ProblemSpec;
use crate::solver::{
    build_local_multilevel_preconditioner, Identity, Jacobi, MultilevelHierarchy, Preconditioner,
    PreconditionerKind, SpdMatrix,
};

use super::inner::{AdaptiveProblem, SystemMatrix};

/// Boundary of `mesh` with the data `trace u_prev - I u0`.
pub fn bem_data(spec: &ProblemSpec, mesh: &Mesh, u_prev: &FeFunction) -> (BoundaryMesh, BoundaryTrace) {
    let bmesh = BoundaryMesh::from_mesh(mesh);
    let i_u0 = nodal_interpolate_u0(&bmesh, &|x| spec.u0(x));
    let g = BoundaryTrace::of_fe_function(mesh, u_prev).sub(&i_u0);
    (bmesh, g)
}

/// `V phi = (K - 1/2)(trace u_prev - I u0)` on the boundary of the volume mesh.
///
/// Elements are boundary segments. Refinement bisects the marked boundary
/// edges of the volume mesh, so `u_prev`, `w_prev` and the multilevel
/// hierarchy are carried along.
pub struct BemStep<'a> {
    pub spec: &'a ProblemSpec,
    pub quadrature: BemQuadrature,
    pub estimator_rule: GaussRule,
    pub u_prev: FeFunction,
    pub w_prev: FeFunction,
    pub hierarchy: &'a mut MultilevelHierarchy,
    /// Factor every assembled `V` and record its smallest pivot.
    pub check_spd: bool,
    pub min_pivots: Vec<f64>,
    current: Option<(BoundaryMesh, BoundaryTrace)>,
}

impl<'a> BemStep<'a> {
    pub fn new(
        spec: &'a ProblemSpec,
        u_prev: FeFunction,
        w_prev: FeFunction,
        hierarchy: &'a mut MultilevelHierarchy,
    ) -> Self {
        Self {
            spec,
            quadrature: BemQuadrature::default(),
            estimator_rule: GaussRule::new(3),
            u_prev,
            w_prev,
            hierarchy,
            check_spd: false,
            min_pivots: Vec::new(),
            current: None,
        }
    }

    fn current(&mut self, mesh: &Mesh) -> &(BoundaryMesh, BoundaryTrace) {
        let stale = match &self.current {
            Some((b, _)) => b.len() != mesh.boundary_facets().len(),
            None => true,
        };
        if stale {
            self.current = Some(bem_data(self.spec, mesh, &self.u_prev));
        }
        self.current.as_ref().unwrap()
    }
}

impl AdaptiveProblem for BemStep<'_> {
    fn system(&mut self, mesh: &Mesh) -> Result<(SystemMatrix, Vec<f64>)> {
        self.current = None;
        let quad = self.quadrature.clone();
        let (bmesh, g) = self.current(mesh);
        let v = assemble_single_layer(bmesh, &quad);
        let rhs = assemble_dl_rhs(bmesh, g, &quad)?;
        if self.check_spd {
            let pivot = v.cholesky()?.min_pivot();
            self.min_pivots.push(pivot);
        }
        Ok((SystemMatrix::Dense(v), rhs))
    }

    fn preconditioner<'p>(
        &'p self,
        _mesh: &Mesh,
        matrix: &SystemMatrix,
    ) -> Result<Box<dyn Preconditioner + 'p>> {
        Ok(Box::new(Jacobi::new(&matrix.diagonal())))
    }

    fn estimate(&mut self, mesh: &Mesh, solution: &[f64]) -> Result<EstimatorReport> {
        let spec = self.spec;
        let rule = self.estimator_rule.clone();
        let (bmesh, g) = self.current(mesh);
        let grad_u0 = |x, t: [f64; 2]| {
            let d = spec.grad_u0(x);
            d[0] * t[0] + d[1] * t[1]
        };
        mu_bem(bmesh, &BemDensity::new(solution.to_vec()), g, &grad_u0, &rule)
    }

    fn refine(&mut self, mesh: &Mesh, marked: &[usize]) -> Result<(Mesh, RefinementRelation)> {
        let (fine, rel) = refine_nvb_edges(mesh, &[], marked);
        self.u_prev = prolongate(&self.u_prev, &rel)?;
        self.w_prev = prolongate(&self.w_prev, &rel)?;
        self.hierarchy.push_level(&fine, &rel)?;
        self.current = None;
        Ok((fine, rel))
    }

    fn prolongate(&self, solution: &[f64], relation: &RefinementRelation) -> Result<Vec<f64>> {
        Ok(BemDensity::new(solution.to_vec()).prolongate(relation)?.values)
    }
}

/// Riesz problem for the update `w`:
/// `(w, v)_{H1} = <f, v> + <phi0 + phi, v>_Gamma - <A u_prev, v>`.
///
/// Elements are triangles; `u_prev`, `phi` and the hierarchy follow refinement.
pub struct FemStep<'a> {
    pub spec: &'a ProblemSpec,
    pub u_prev: FeFunction,
    pub phi: BemDensity,
    pub hierarchy: &'a mut MultilevelHierarchy,
    pub preconditioner: PreconditionerKind,
}

impl<'a> FemStep<'a> {
    pub fn new(
        spec: &'a ProblemSpec,
        u_prev: FeFunction,
        phi: BemDensity,
        hierarchy: &'a mut MultilevelHierarchy,
    ) -> Self {
        Self {
            spec,
            u_prev,
            phi,
            hierarchy,
            preconditioner: PreconditionerKind::LocalMultilevelDiagonal,
        }
    }

    pub fn rhs(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        let spec = self.spec;
        assemble_w_rhs(
            mesh,
            &|x| spec.f(x),
            &|x, n| spec.phi0(x, n),
            &self.phi,
            &self.u_prev,
            spec.operator.as_ref(),
        )
    }
}

impl AdaptiveProblem for FemStep<'_> {
    fn system(&mut self, mesh: &Mesh) -> Result<(SystemMatrix, Vec<f64>)> {
        Ok((SystemMatrix::Sparse(assemble_riesz(mesh)), self.rhs(mesh)?))
    }

    fn preconditioner<'p>(
        &'p self,
        mesh: &Mesh,
        matrix: &SystemMatrix,
    ) -> Result<Box<dyn Preconditioner + 'p>> {
        Ok(match self.preconditioner {
            PreconditionerKind::Identity => Box::new(Identity),
            PreconditionerKind::Jacobi => Box::new(Jacobi::new(&matrix.diagonal())),
            PreconditionerKind::LocalMultilevelDiagonal => {
                Box::new(build_local_multilevel_preconditioner(self.hierarchy, mesh)?)
            }
        })
    }

    fn estimate(&mut self, mesh: &Mesh, solution: &[f64]) -> Result<EstimatorReport> {
        let spec = self.spec;
        let pts = mesh.vertices();
        let facets = mesh.boundary_facets();
        let phi = &self.phi.values;
        let phi_total = |k: usize, x| {
            let (a, b) = (pts[facets[k].a], pts[facets[k].b]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let n = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
            spec.phi0(x, n) + phi[k]
        };
        eta_fem(
            mesh,
            &FeFunction::new(solution.to_vec()),
            &self.u_prev,
            &|x| spec.f(x),
            &phi_total,
            spec.operator.as_ref(),
        )
    }

    fn refine(&mut self, mesh: &Mesh, marked: &[usize]) -> Result<(Mesh, RefinementRelation)> {
        let (fine, rel) = refine_nvb(mesh, marked);
        self.u_prev = prolongate(&self.u_prev, &rel)?;
        self.phi = self.phi.prolongate(&rel)?;
        self.hierarchy.push_level(&fine, &rel)?;
        Ok((fine, rel))
    }

    fn prolongate(&self, solution: &[f64], relation: &RefinementRelation) -> Result<Vec<f64>> {
        Ok(prolongate(&FeFunction::new(solution.to_vec()), relation)?.values)
    }
}
