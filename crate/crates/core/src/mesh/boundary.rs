use super::{distance, Mesh, Point};

/// One boundary panel, running from `points[start]` to `points[end]`.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub length: f64,
    pub tangent: [f64; 2],
    /// Outward unit normal (the domain lies to the left of the tangent).
    pub normal: [f64; 2],
    /// Volume triangle adjacent to the panel, if the boundary comes from a mesh.
    pub owner: Option<usize>,
}

/// Closed, counterclockwise polygonal boundary split into panels.
///
/// Segment `k` joins local vertex `k` to local vertex `k + 1` (cyclically).
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    pub points: Vec<Point>,
    /// Volume vertex id of each local vertex.
    pub nodes: Vec<usize>,
    pub segments: Vec<Segment>,
}

impl BoundaryMesh {
    /// Standalone boundary for a counterclockwise polygon.
    pub fn from_polygon(points: Vec<Point>) -> Self {
        let nodes = (0..points.len()).collect();
        Self::build(points, nodes, None)
    }

    pub fn from_mesh(mesh: &Mesh) -> Self {
        let facets = mesh.boundary_facets();
        let nodes: Vec<usize> = facets.iter().map(|f| f.a).collect();
        let points = nodes.iter().map(|&v| mesh.vertices()[v]).collect();
        let owners: Vec<usize> = facets.iter().map(|f| f.owner).collect();
        Self::build(points, nodes, Some(&owners))
    }

    fn build(points: Vec<Point>, nodes: Vec<usize>, owners: Option<&[usize]>) -> Self {
        let n = points.len();
        let segments = (0..n)
            .map(|k| {
                let (a, b) = (points[k], points[(k + 1) % n]);
                let length = distance(&a, &b);
                let tangent = [(b[0] - a[0]) / length, (b[1] - a[1]) / length];
                Segment {
                    start: k,
                    end: (k + 1) % n,
                    length,
                    tangent,
                    normal: [tangent[1], -tangent[0]],
                    owner: owners.map(|o| o[k]),
                }
            })
            .collect();
        Self {
            points,
            nodes,
            segments,
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn endpoints(&self, k: usize) -> (Point, Point) {
        let s = &self.segments[k];
        (self.points[s.start], self.points[s.end])
    }

    /// Point at local parameter `t` in `[0, 1]` on segment `k`.
    pub fn point_at(&self, k: usize, t: f64) -> Point {
        let (a, b) = self.endpoints(k);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    pub fn perimeter(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn max_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).fold(0.0, f64::max)
    }
}
