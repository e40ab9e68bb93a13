//! Conforming triangulations with newest-vertex-bisection refinement.
//!
//! Triangles store their vertices counterclockwise. Local edge `k` joins
//! `vertices[k]` and `vertices[(k + 1) % 3]`; the reference edge is always
//! local edge 0 and `vertices[2]` is the newest vertex. Refinement appends new
//! vertices after the existing ones, so vertex ids are stable along a chain of
//! refinements and every new vertex remembers the two endpoints of the edge it
//! bisects.

mod boundary;
mod domains;
pub mod io;
mod refine;

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub use boundary::{BoundaryMesh, Segment};
pub use domains::{make_initial_mesh, DomainId};
pub use refine::{refine_nvb, refine_nvb_edges, RefinementRelation};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub generation: u32,
    /// Index of the father in the previous mesh of the refinement chain.
    pub father: Option<usize>,
}

/// Oriented boundary edge; the domain lies to the left of `a -> b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub a: usize,
    pub b: usize,
    pub owner: usize,
}

/// Unique edges of a mesh and their incidences.
#[derive(Debug, Clone)]
pub struct EdgeTable {
    pub edges: Vec<[usize; 2]>,
    /// `triangle_edges[t][k]` is the edge id of local edge `k` of triangle `t`.
    pub triangle_edges: Vec<[usize; 3]>,
    /// Triangles adjacent to each edge; the second slot is `None` on the boundary.
    pub edge_triangles: Vec<[Option<usize>; 2]>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<Triangle>,
    boundary: Vec<BoundaryFacet>,
    vertex_parents: Vec<Option<[usize; 2]>>,
    level: usize,
    edges: OnceLock<EdgeTable>,
}

/// Area, barycentric gradients and diameter of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub area: f64,
    pub gradients: [[f64; 2]; 3],
    pub diameter: f64,
}

pub(crate) fn signed_area(p: &Point, q: &Point, r: &Point) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
}

pub(crate) fn distance(p: &Point, q: &Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

impl Mesh {
    /// Build a mesh from counterclockwise triangles. Reference edges are taken
    /// to be the longest edge of each triangle and the boundary is recovered as
    /// a closed, counterclockwise polygon.
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let triangles = triangles
            .into_iter()
            .map(|mut v| {
                let len = |k: usize| distance(&vertices[v[k]], &vertices[v[(k + 1) % 3]]);
                let longest = (0..3)
                    .max_by(|&i, &j| len(i).partial_cmp(&len(j)).unwrap().then(j.cmp(&i)))
                    .unwrap();
                v.rotate_left(longest);
                Triangle {
                    vertices: v,
                    generation: 0,
                    father: None,
                }
            })
            .collect::<Vec<_>>();
        let boundary = Self::chain_boundary(&triangles)?;
        let n = vertices.len();
        let mesh = Mesh {
            vertices,
            triangles,
            boundary,
            vertex_parents: vec![None; n],
            level: 0,
            edges: OnceLock::new(),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub(crate) fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<Triangle>,
        boundary: Vec<BoundaryFacet>,
        vertex_parents: Vec<Option<[usize; 2]>>,
        level: usize,
    ) -> Self {
        Mesh {
            vertices,
            triangles,
            boundary,
            vertex_parents,
            level,
            edges: OnceLock::new(),
        }
    }

    fn chain_boundary(triangles: &[Triangle]) -> Result<Vec<BoundaryFacet>> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in triangles {
            for k in 0..3 {
                let (a, b) = (t.vertices[k], t.vertices[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut next: HashMap<usize, BoundaryFacet> = HashMap::new();
        for (ti, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t.vertices[k], t.vertices[(k + 1) % 3]);
                if count[&(a.min(b), a.max(b))] == 1
                    && next.insert(a, BoundaryFacet { a, b, owner: ti }).is_some()
                {
                    return Err(Error::InvalidMesh(format!(
                        "boundary vertex {a} starts two boundary edges"
                    )));
                }
            }
        }
        let start = match next.keys().min() {
            Some(&s) => s,
            None => return Err(Error::InvalidMesh("mesh has no boundary".into())),
        };
        let mut chain = Vec::with_capacity(next.len());
        let mut v = start;
        loop {
            let f = next
                .get(&v)
                .copied()
                .ok_or_else(|| Error::InvalidMesh(format!("boundary broken at vertex {v}")))?;
            chain.push(f);
            v = f.b;
            if v == start {
                break;
            }
            if chain.len() > next.len() {
                return Err(Error::InvalidMesh("boundary does not close".into()));
            }
        }
        if chain.len() != next.len() {
            return Err(Error::InvalidMesh(
                "boundary consists of more than one closed polygon".into(),
            ));
        }
        Ok(chain)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    pub fn vertex_parents(&self) -> &[Option<[usize; 2]>] {
        &self.vertex_parents
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of refinement steps since the initial mesh.
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let v = self.triangles[t].vertices;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [p, q, r] = self.corners(t);
        signed_area(&p, &q, &r)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn geometry(&self, t: usize) -> TriangleGeometry {
        let c = self.corners(t);
        let area = signed_area(&c[0], &c[1], &c[2]);
        let mut gradients = [[0.0; 2]; 3];
        for (i, g) in gradients.iter_mut().enumerate() {
            // gradient of the barycentric coordinate of vertex i is the rotated opposite edge
            let p = c[(i + 1) % 3];
            let q = c[(i + 2) % 3];
            *g = [(p[1] - q[1]) / (2.0 * area), (q[0] - p[0]) / (2.0 * area)];
        }
        let diameter = (0..3)
            .map(|k| distance(&c[k], &c[(k + 1) % 3]))
            .fold(0.0, f64::max);
        TriangleGeometry {
            area,
            gradients,
            diameter,
        }
    }

    /// Diameter of the vertex set (an upper bound for diam of the domain).
    pub fn diameter(&self) -> f64 {
        let pts: Vec<&Point> = self
            .boundary
            .iter()
            .map(|f| &self.vertices[f.a])
            .collect();
        let mut d: f64 = 0.0;
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                d = d.max(distance(p, q));
            }
        }
        d
    }

    pub fn perimeter(&self) -> f64 {
        self.boundary
            .iter()
            .map(|f| distance(&self.vertices[f.a], &self.vertices[f.b]))
            .sum()
    }

    pub fn edges(&self) -> &EdgeTable {
        self.edges.get_or_init(|| {
            let mut index: HashMap<(usize, usize), usize> =
                HashMap::with_capacity(3 * self.triangles.len() / 2 + 8);
            let mut edges = Vec::new();
            let mut edge_triangles: Vec<[Option<usize>; 2]> = Vec::new();
            let mut triangle_edges = Vec::with_capacity(self.triangles.len());
            for (ti, t) in self.triangles.iter().enumerate() {
                let mut te = [0; 3];
                for (k, slot) in te.iter_mut().enumerate() {
                    let (a, b) = (t.vertices[k], t.vertices[(k + 1) % 3]);
                    let key = (a.min(b), a.max(b));
                    let id = *index.entry(key).or_insert_with(|| {
                        edges.push([key.0, key.1]);
                        edge_triangles.push([None, None]);
                        edges.len() - 1
                    });
                    if edge_triangles[id][0].is_none() {
                        edge_triangles[id][0] = Some(ti);
                    } else {
                        edge_triangles[id][1] = Some(ti);
                    }
                    *slot = id;
                }
                triangle_edges.push(te);
            }
            EdgeTable {
                edges,
                triangle_edges,
                edge_triangles,
            }
        })
    }

    /// Edge id of a boundary facet.
    pub fn facet_edge(&self, facet: usize) -> usize {
        let f = self.boundary[facet];
        let t = &self.triangles[f.owner];
        let k = (0..3)
            .find(|&k| t.vertices[k] == f.a && t.vertices[(k + 1) % 3] == f.b)
            .expect("boundary facet is an edge of its owner");
        self.edges().triangle_edges[f.owner][k]
    }

    /// max over triangles of diam(T) / |T|^{1/2}.
    pub fn shape_regularity(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let g = self.geometry(t);
                g.diameter / g.area.sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Check orientation, conformity and the boundary description.
    pub fn validate(&self) -> Result<()> {
        for (ti, t) in self.triangles.iter().enumerate() {
            if t.vertices.iter().any(|&v| v >= self.vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {ti} has a bad vertex id")));
            }
            let area = self.area(ti);
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle { index: ti, area });
            }
        }
        let table = self.edges();
        // a hanging node shows up as a boundary edge that is not on the outer boundary
        let mut on_boundary = vec![false; table.edges.len()];
        for (fi, f) in self.boundary.iter().enumerate() {
            let t = &self.triangles[f.owner];
            if !(0..3).any(|k| t.vertices[k] == f.a && t.vertices[(k + 1) % 3] == f.b) {
                return Err(Error::InvalidMesh(format!(
                    "boundary facet {fi} is not an edge of its owner"
                )));
            }
            let e = self.facet_edge(fi);
            if table.edge_triangles[e][1].is_some() {
                return Err(Error::InvalidMesh(format!("boundary facet {fi} is interior")));
            }
            on_boundary[e] = true;
            let next = self.boundary[(fi + 1) % self.boundary.len()];
            if next.a != f.b {
                return Err(Error::InvalidMesh("boundary polygon is not closed".into()));
            }
        }
        for (e, tris) in table.edge_triangles.iter().enumerate() {
            if tris[1].is_none() && !on_boundary[e] {
                return Err(Error::InvalidMesh(format!(
                    "edge {:?} has one triangle but is not a boundary facet (hanging node)",
                    table.edges[e]
                )));
            }
        }
        for (ti, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let e = table.triangle_edges[ti][k];
                if let [Some(a), Some(b)] = table.edge_triangles[e] {
                    // both neighbours must traverse the shared edge in opposite directions
                    let other = if a == ti { b } else { a };
                    let (p, q) = (t.vertices[k], t.vertices[(k + 1) % 3]);
                    let o = &self.triangles[other];
                    if !(0..3).any(|m| o.vertices[m] == q && o.vertices[(m + 1) % 3] == p) {
                        return Err(Error::InvalidMesh(format!(
                            "triangles {ti} and {other} are inconsistently oriented"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Barycentric coordinates of `x` in triangle `t`.
    pub fn barycentric(&self, t: usize, x: &Point) -> [f64; 3] {
        let c = self.corners(t);
        let area = signed_area(&c[0], &c[1], &c[2]);
        [
            signed_area(x, &c[1], &c[2]) / area,
            signed_area(&c[0], x, &c[2]) / area,
            signed_area(&c[0], &c[1], x) / area,
        ]
    }

    pub fn boundary_mesh(&self) -> BoundaryMesh {
        BoundaryMesh::from_mesh(self)
    }

    pub fn uniform_refinement(&self) -> (Mesh, RefinementRelation) {
        let all: Vec<usize> = (0..self.n_triangles()).collect();
        refine_nvb(self, &all)
    }
}

/// The boundary mesh induced by `mesh`.
pub fn boundary_trace(mesh: &Mesh) -> BoundaryMesh {
    mesh.boundary_mesh()
}

/// max_T diam(T)/|T|^{1/2}.
pub fn shape_regularity(mesh: &Mesh) -> f64 {
    mesh.shape_regularity()
}
