//! Local multilevel diagonal preconditioner on a chain of NVB meshes.
//!
//! `P^{-1} = sum_l I_l D_l^{-1} I_l^T`, where level 0 uses every vertex of the
//! initial mesh and level `l >= 1` only the vertices created by the `l`-th
//! refinement together with the endpoints of the edges they bisect. `D_l` is
//! the diagonal of the Riesz matrix on mesh `l` and `I_l` embeds level-`l` hat
//! functions into the finest space.

use crate::error::{Error, Result};
use crate::fem::riesz_diagonal;
use crate::mesh::{Mesh, RefinementRelation};

use super::Preconditioner;

#[derive(Debug, Clone)]
struct Level {
    n_vertices: usize,
    local: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct MultilevelHierarchy {
    n0: usize,
    parents: Vec<[usize; 2]>,
    levels: Vec<Level>,
}

impl MultilevelHierarchy {
    pub fn new(mesh0: &Mesh) -> Self {
        let d = riesz_diagonal(mesh0);
        Self {
            n0: mesh0.n_vertices(),
            parents: Vec::new(),
            levels: vec![Level {
                n_vertices: mesh0.n_vertices(),
                local: d.into_iter().enumerate().collect(),
            }],
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.levels.last().map_or(self.n0, |l| l.n_vertices)
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Register the refinement `relation` that produced `fine`.
    pub fn push_level(&mut self, fine: &Mesh, relation: &RefinementRelation) -> Result<()> {
        if relation.coarse_vertices != self.n_vertices() || fine.n_vertices() != relation.fine_vertices() {
            return Err(Error::HierarchyMismatch(format!(
                "hierarchy has {} vertices, refinement starts from {}",
                self.n_vertices(),
                relation.coarse_vertices
            )));
        }
        if relation.is_trivial() {
            return Ok(());
        }
        let d = riesz_diagonal(fine);
        let mut ids = Vec::with_capacity(3 * relation.new_vertex_parents.len());
        for (k, p) in relation.new_vertex_parents.iter().enumerate() {
            ids.push(relation.coarse_vertices + k);
            ids.extend_from_slice(p);
        }
        ids.sort_unstable();
        ids.dedup();
        self.parents.extend_from_slice(&relation.new_vertex_parents);
        self.levels.push(Level {
            n_vertices: fine.n_vertices(),
            local: ids.into_iter().map(|z| (z, d[z])).collect(),
        });
        Ok(())
    }

    fn new_vertices(&self, level: usize) -> std::ops::Range<usize> {
        let lo = if level == 0 { 0 } else { self.levels[level - 1].n_vertices };
        lo..self.levels[level].n_vertices
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MultilevelDiagonal<'a> {
    hierarchy: &'a MultilevelHierarchy,
}

/// Preconditioner for the Riesz matrix of the finest mesh of `hierarchy`,
/// which must be `mesh`.
pub fn build_local_multilevel_preconditioner<'a>(
    hierarchy: &'a MultilevelHierarchy,
    mesh: &Mesh,
) -> Result<MultilevelDiagonal<'a>> {
    if hierarchy.n_vertices() != mesh.n_vertices() {
        return Err(Error::HierarchyMismatch(format!(
            "hierarchy ends with {} vertices, mesh has {}",
            hierarchy.n_vertices(),
            mesh.n_vertices()
        )));
    }
    Ok(MultilevelDiagonal { hierarchy })
}

impl Preconditioner for MultilevelDiagonal<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let h = self.hierarchy;
        let n0 = h.n0;
        let mut res = r.to_vec();
        let total: usize = h.levels.iter().map(|l| l.local.len()).sum();
        let mut coeff = vec![0.0; total];
        let mut offsets = Vec::with_capacity(h.levels.len());
        let mut off = total;
        // restriction, finest level first
        for (l, level) in h.levels.iter().enumerate().rev() {
            off -= level.local.len();
            offsets.push(off);
            for (k, &(v, d)) in level.local.iter().enumerate() {
                coeff[off + k] = res[v] / d;
            }
            if l > 0 {
                for m in h.new_vertices(l) {
                    let [a, b] = h.parents[m - n0];
                    res[a] += 0.5 * res[m];
                    res[b] += 0.5 * res[m];
                }
            }
        }
        offsets.reverse();
        // prolongation, coarsest level first
        z.iter_mut().for_each(|x| *x = 0.0);
        for (l, level) in h.levels.iter().enumerate() {
            if l > 0 {
                for m in h.new_vertices(l) {
                    let [a, b] = h.parents[m - n0];
                    z[m] = 0.5 * (z[a] + z[b]);
                }
            }
            for (k, &(v, _)) in level.local.iter().enumerate() {
                z[v] += coeff[offsets[l] + k];
            }
        }
    }
}
