//! Newest vertex bisection with edge marking and closure.

use super::{BoundaryFacet, Mesh, Triangle};

/// Father/son bookkeeping of one refinement step.
#[derive(Debug, Clone, Default)]
pub struct RefinementRelation {
    /// Fine triangle ids for every coarse triangle (a single id if untouched).
    pub sons: Vec<Vec<usize>>,
    /// Fine boundary facet ids for every coarse boundary facet.
    pub boundary_sons: Vec<Vec<usize>>,
    /// Coarse boundary facet of every fine boundary facet.
    pub boundary_fathers: Vec<usize>,
    pub coarse_vertices: usize,
    /// Edge endpoints of every new vertex, in order of creation.
    pub new_vertex_parents: Vec<[usize; 2]>,
}

impl RefinementRelation {
    pub fn fine_vertices(&self) -> usize {
        self.coarse_vertices + self.new_vertex_parents.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.new_vertex_parents.is_empty()
    }
}

/// Refine all marked triangles (by their reference edge) plus the closure.
pub fn refine_nvb(mesh: &Mesh, marked_triangles: &[usize]) -> (Mesh, RefinementRelation) {
    refine_nvb_edges(mesh, marked_triangles, &[])
}

/// Refine marked triangles and marked boundary facets, then close the mesh.
///
/// A marked triangle marks its reference edge; a marked facet marks its edge.
/// Any triangle with a marked edge also gets its reference edge marked, until
/// nothing changes. Each triangle is then bisected once, twice or three times.
pub fn refine_nvb_edges(
    mesh: &Mesh,
    marked_triangles: &[usize],
    marked_facets: &[usize],
) -> (Mesh, RefinementRelation) {
    let table = mesh.edges();
    let mut marked = vec![false; table.edges.len()];
    for &t in marked_triangles {
        marked[table.triangle_edges[t][0]] = true;
    }
    for &f in marked_facets {
        marked[mesh.facet_edge(f)] = true;
    }
    loop {
        let mut changed = false;
        for te in &table.triangle_edges {
            if !marked[te[0]] && (marked[te[1]] || marked[te[2]]) {
                marked[te[0]] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let coarse_vertices = mesh.n_vertices();
    let mut vertices = mesh.vertices().to_vec();
    let mut vertex_parents = mesh.vertex_parents().to_vec();
    let mut new_vertex_parents = Vec::new();
    let mut midpoint = vec![usize::MAX; table.edges.len()];
    for (e, &[a, b]) in table.edges.iter().enumerate() {
        if marked[e] {
            let (pa, pb) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            vertex_parents.push(Some([a, b]));
            new_vertex_parents.push([a, b]);
            midpoint[e] = vertices.len() - 1;
        }
    }

    let mut triangles = Vec::with_capacity(mesh.n_triangles() * 2);
    let mut sons = Vec::with_capacity(mesh.n_triangles());
    for (ti, t) in mesh.triangles().iter().enumerate() {
        let [n1, n2, n3] = t.vertices;
        let te = table.triangle_edges[ti];
        let [m1, m2, m3] = [midpoint[te[0]], midpoint[te[1]], midpoint[te[2]]];
        let g = t.generation;
        let first = triangles.len();
        let mut push = |v: [usize; 3], generation: u32| {
            triangles.push(Triangle {
                vertices: v,
                generation,
                father: Some(ti),
            })
        };
        match (marked[te[0]], marked[te[1]], marked[te[2]]) {
            (false, _, _) => triangles.push(Triangle {
                vertices: t.vertices,
                generation: g,
                father: t.father,
            }),
            (true, false, false) => {
                push([n3, n1, m1], g + 1);
                push([n2, n3, m1], g + 1);
            }
            (true, true, false) => {
                push([n3, n1, m1], g + 1);
                push([m1, n2, m2], g + 2);
                push([n3, m1, m2], g + 2);
            }
            (true, false, true) => {
                push([m1, n3, m3], g + 2);
                push([n1, m1, m3], g + 2);
                push([n2, n3, m1], g + 1);
            }
            (true, true, true) => {
                push([m1, n3, m3], g + 2);
                push([n1, m1, m3], g + 2);
                push([m1, n2, m2], g + 2);
                push([n3, m1, m2], g + 2);
            }
        }
        sons.push((first..triangles.len()).collect::<Vec<_>>());
    }

    let mut boundary = Vec::with_capacity(mesh.boundary_facets().len() + 8);
    let mut boundary_sons = Vec::with_capacity(mesh.boundary_facets().len());
    let mut boundary_fathers = Vec::with_capacity(mesh.boundary_facets().len() + 8);
    let owner_of = |a: usize, b: usize, coarse_owner: usize, triangles: &[Triangle]| {
        sons[coarse_owner]
            .iter()
            .copied()
            .find(|&s| {
                let v = triangles[s].vertices;
                (0..3).any(|k| v[k] == a && v[(k + 1) % 3] == b)
            })
            .expect("boundary edge belongs to a son of its owner")
    };
    for (fi, f) in mesh.boundary_facets().iter().enumerate() {
        let m = midpoint[mesh.facet_edge(fi)];
        let first = boundary.len();
        if m == usize::MAX {
            boundary.push(BoundaryFacet {
                a: f.a,
                b: f.b,
                owner: owner_of(f.a, f.b, f.owner, &triangles),
            });
        } else {
            boundary.push(BoundaryFacet {
                a: f.a,
                b: m,
                owner: owner_of(f.a, m, f.owner, &triangles),
            });
            boundary.push(BoundaryFacet {
                a: m,
                b: f.b,
                owner: owner_of(m, f.b, f.owner, &triangles),
            });
        }
        boundary_sons.push((first..boundary.len()).collect::<Vec<_>>());
        boundary_fathers.extend(std::iter::repeat_n(fi, boundary.len() - first));
    }

    let level = mesh.level() + usize::from(!new_vertex_parents.is_empty());
    let fine = Mesh::from_parts(vertices, triangles, boundary, vertex_parents, level);
    let relation = RefinementRelation {
        sons,
        boundary_sons,
        boundary_fathers,
        coarse_vertices,
        new_vertex_parents,
    };
    (fine, relation)
}

#[cfg(test)]
mod tests {
    use super::super::{make_initial_mesh, DomainId};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_marked_triangle_on_lshape() {
        let m = make_initial_mesh(DomainId::LShape);
        let (fine, rel) = refine_nvb(&m, &[0]);
        fine.validate().unwrap();
        // the closure stays local: the marked reference edge lies on the boundary
        // and the two sons do not force further bisections
        assert_eq!(fine.n_triangles(), 13);
        assert_eq!(rel.sons[0].len(), 2);
        assert_eq!(rel.new_vertex_parents.len(), 1);
        assert!((fine.total_area() - m.total_area()).abs() < 1e-15);
    }

    #[test]
    fn uniform_refinement_doubles_triangles() {
        let m = make_initial_mesh(DomainId::LShape);
        let (fine, rel) = m.uniform_refinement();
        fine.validate().unwrap();
        assert_eq!(fine.n_triangles(), 24);
        assert!(rel.sons.iter().all(|s| s.len() == 2));
        let (fine2, _) = fine.uniform_refinement();
        assert_eq!(fine2.n_triangles(), 48);
        assert!((fine2.shape_regularity() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn marking_a_facet_splits_only_its_closure() {
        let m = make_initial_mesh(DomainId::ZShape);
        let (fine, rel) = refine_nvb_edges(&m, &[], &[3]);
        fine.validate().unwrap();
        assert_eq!(rel.boundary_sons[3].len(), 2);
        assert_eq!(fine.boundary_facets().len(), m.boundary_facets().len() + 1);
        assert_eq!(rel.boundary_fathers[3], 3);
        assert_eq!(rel.boundary_fathers[4], 3);
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = make_initial_mesh(DomainId::LShape);
        let (fine, rel) = refine_nvb(&m, &[]);
        assert!(rel.is_trivial());
        assert_eq!(fine.triangles(), m.triangles());
        assert_eq!(fine.level(), 0);
    }

    fn random_refinements(domain: DomainId, picks: &[Vec<u16>]) -> Vec<(Mesh, RefinementRelation)> {
        let mut mesh = make_initial_mesh(domain);
        let mut out = Vec::new();
        for p in picks {
            let n = mesh.n_triangles();
            let marked: Vec<usize> = p.iter().map(|&i| i as usize % n).collect();
            let (fine, rel) = refine_nvb(&mesh, &marked);
            out.push((mesh, rel));
            mesh = fine;
        }
        let (last, rel) = refine_nvb(&mesh, &[]);
        out.push((last, rel));
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn refinement_preserves_conformity_and_area(
            z in any::<bool>(),
            picks in prop::collection::vec(prop::collection::vec(any::<u16>(), 1..6), 1..7),
        ) {
            let domain = if z { DomainId::ZShape } else { DomainId::LShape };
            let chain = random_refinements(domain, &picks);
            let coarse = &chain[0].0;
            let sigma0 = coarse.shape_regularity();
            for w in chain.windows(2) {
                let (c, rel) = (&w[0].0, &w[0].1);
                let f = &w[1].0;
                prop_assert!(f.validate().is_ok());
                prop_assert!((f.total_area() - c.total_area()).abs() < 1e-14);
                prop_assert!((f.perimeter() - c.perimeter()).abs() < 1e-13);
                // newest vertex bisection produces finitely many similarity classes
                prop_assert!(f.shape_regularity() <= sigma0 * (1.0 + 1e-12));
                for (t, s) in rel.sons.iter().enumerate() {
                    let father = c.area(t);
                    let son_area: f64 = s.iter().map(|&k| f.area(k)).sum();
                    prop_assert!((son_area - father).abs() < 1e-15);
                    for &k in s {
                        let ratio = f.area(k) / father;
                        prop_assert!(
                            [1.0, 0.5, 0.25].iter().any(|r| (ratio - r).abs() < 1e-12),
                            "son area ratio {ratio}"
                        );
                    }
                }
                for (v, p) in rel.new_vertex_parents.iter().enumerate() {
                    let x = f.vertices()[rel.coarse_vertices + v];
                    let a = c.vertices()[p[0]];
                    let b = c.vertices()[p[1]];
                    prop_assert!((x[0] - 0.5 * (a[0] + b[0])).abs() < 1e-15);
                    prop_assert!((x[1] - 0.5 * (a[1] + b[1])).abs() < 1e-15);
                }
                prop_assert_eq!(&f.vertices()[..c.n_vertices()], c.vertices());
            }
        }
    }
}
