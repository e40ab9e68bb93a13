//! Diagnostics along inner loops: the quasi-error
//! `Delta_l = |||psi - psi_l|||^2 + kappa * rho_l^2` against a reference
//! solution on a refinement of the final mesh.

use crate::bem::{assemble_dl_rhs, assemble_single_layer, BemDensity, BemQuadrature};
use crate::error::{Error, Result};
use crate::estimate::EstimatorReport;
use crate::fem::{assemble_riesz, assemble_w_rhs, prolongate, FeFunction};
use crate::mesh::{refine_nvb_edges, Mesh, RefinementRelation};
use crate::model::ProblemSpec;
use crate::solver::{cholesky_solve, LinearOperator};

use super::inner::InnerIterate;
use super::problems::bem_data;

fn energy(a: &dyn LinearOperator, e: &[f64]) -> f64 {
    let mut ae = vec![0.0; e.len()];
    a.apply(e, &mut ae);
    e.iter().zip(&ae).map(|(x, y)| x * y).sum()
}

fn check_iterates(iterates: &[InnerIterate], reports: &[EstimatorReport]) -> Result<()> {
    if iterates.is_empty() || iterates.len() != reports.len() {
        return Err(Error::InsufficientData(format!(
            "{} iterates for {} reports",
            iterates.len(),
            reports.len()
        )));
    }
    Ok(())
}

/// Relations leading from iterate `l` to the reference mesh.
fn chain<'a>(
    iterates: &'a [InnerIterate],
    l: usize,
    extra: &'a [RefinementRelation],
) -> impl Iterator<Item = &'a RefinementRelation> {
    iterates[l..]
        .iter()
        .filter_map(|it| it.relation.as_ref())
        .chain(extra.iter())
}

/// Quasi-errors of a FEM inner loop. `u_prev` and `phi` are the data of the
/// Riesz problem on the final mesh of the loop; the reference mesh is the
/// final mesh refined uniformly `refinements` times.
pub fn fem_quasi_errors(
    spec: &ProblemSpec,
    iterates: &[InnerIterate],
    reports: &[EstimatorReport],
    u_prev: &FeFunction,
    phi: &BemDensity,
    kappa: f64,
    refinements: usize,
) -> Result<Vec<f64>> {
    check_iterates(iterates, reports)?;
    let mut mesh = iterates.last().unwrap().mesh.clone();
    let mut u = u_prev.clone();
    let mut p = phi.clone();
    let mut rels = Vec::new();
    for _ in 0..refinements {
        let (fine, rel) = mesh.uniform_refinement();
        u = prolongate(&u, &rel)?;
        p = p.prolongate(&rel)?;
        rels.push(rel);
        mesh = fine;
    }
    let rhs = assemble_w_rhs(
        &mesh,
        &|x| spec.f(x),
        &|x, n| spec.phi0(x, n),
        &p,
        &u,
        spec.operator.as_ref(),
    )?;
    let s = assemble_riesz(&mesh);
    let reference = cholesky_solve(&s, &rhs)?;
    let mut out = Vec::with_capacity(iterates.len());
    for (l, (it, rep)) in iterates.iter().zip(reports).enumerate() {
        let mut w = FeFunction::new(it.solution.clone());
        for rel in chain(iterates, l, &rels) {
            w = prolongate(&w, rel)?;
        }
        let e: Vec<f64> = reference.iter().zip(&w.values).map(|(a, b)| a - b).collect();
        out.push(energy(&s, &e) + kappa * rep.total * rep.total);
    }
    Ok(out)
}

/// Quasi-errors of a BEM inner loop in the energy norm of `V`. The reference
/// bisects every boundary edge of the final mesh `refinements` times.
pub fn bem_quasi_errors(
    spec: &ProblemSpec,
    iterates: &[InnerIterate],
    reports: &[EstimatorReport],
    u_prev: &FeFunction,
    kappa: f64,
    refinements: usize,
) -> Result<Vec<f64>> {
    check_iterates(iterates, reports)?;
    let mut mesh: Mesh = iterates.last().unwrap().mesh.clone();
    let mut u = u_prev.clone();
    let mut rels = Vec::new();
    for _ in 0..refinements {
        let all: Vec<usize> = (0..mesh.boundary_facets().len()).collect();
        let (fine, rel) = refine_nvb_edges(&mesh, &[], &all);
        u = prolongate(&u, &rel)?;
        rels.push(rel);
        mesh = fine;
    }
    let quad = BemQuadrature::default();
    let (bmesh, g) = bem_data(spec, &mesh, &u);
    let v = assemble_single_layer(&bmesh, &quad);
    let rhs = assemble_dl_rhs(&bmesh, &g, &quad)?;
    let reference = cholesky_solve(&v, &rhs)?;
    let mut out = Vec::with_capacity(iterates.len());
    for (l, (it, rep)) in iterates.iter().zip(reports).enumerate() {
        let mut psi = BemDensity::new(it.solution.clone());
        for rel in chain(iterates, l, &rels) {
            psi = psi.prolongate(rel)?;
        }
        let e: Vec<f64> = reference.iter().zip(&psi.values).map(|(a, b)| a - b).collect();
        out.push(energy(&v, &e) + kappa * rep.total * rep.total);
    }
    Ok(out)
}

/// Number of consecutive pairs and how many of them decrease.
pub fn count_decreasing(values: &[f64]) -> (usize, usize) {
    let pairs = values.len().saturating_sub(1);
    let down = values.windows(2).filter(|w| w[1] <= w[0]).count();
    (pairs, down)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_counting() {
        assert_eq!(count_decreasing(&[]), (0, 0));
        assert_eq!(count_decreasing(&[3.0, 2.0, 2.5, 1.0]), (3, 2));
    }
}
