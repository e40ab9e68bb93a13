use super::{Mesh, Point};

/// Initial geometries used by the model problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainId {
    /// `(-1/4, 1/4)^2` without the closed quadrant `[0, 1/4] x [-1/4, 0]`.
    LShape,
    /// `(-1/4, 1/4)^2` without the wedge of polar angles in `[-pi/4, 0]`.
    ZShape,
}

/// Crisscross split of an axis-aligned square given by its lower-left corner.
fn crisscross(
    vertices: &mut Vec<Point>,
    triangles: &mut Vec<[usize; 3]>,
    lower_left: Point,
    h: f64,
) {
    let id = |p: Point, vertices: &mut Vec<Point>| {
        if let Some(i) = vertices
            .iter()
            .position(|q| (q[0] - p[0]).abs() < 1e-14 && (q[1] - p[1]).abs() < 1e-14)
        {
            i
        } else {
            vertices.push(p);
            vertices.len() - 1
        }
    };
    let [x, y] = lower_left;
    let p00 = id([x, y], vertices);
    let p10 = id([x + h, y], vertices);
    let p11 = id([x + h, y + h], vertices);
    let p01 = id([x, y + h], vertices);
    let c = id([x + 0.5 * h, y + 0.5 * h], vertices);
    triangles.extend([[p00, p10, c], [p10, p11, c], [p11, p01, c], [p01, p00, c]]);
}

/// Coarsest triangulation of the given domain. All triangles are right
/// isosceles with the hypotenuse as reference edge.
pub fn make_initial_mesh(domain: DomainId) -> Mesh {
    let q = 0.25;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    crisscross(&mut vertices, &mut triangles, [-q, -q], q);
    crisscross(&mut vertices, &mut triangles, [-q, 0.0], q);
    crisscross(&mut vertices, &mut triangles, [0.0, 0.0], q);
    if domain == DomainId::ZShape {
        let find = |p: Point, vertices: &[Point]| {
            vertices
                .iter()
                .position(|v| (v[0] - p[0]).abs() < 1e-14 && (v[1] - p[1]).abs() < 1e-14)
                .expect("vertex of the south-west square")
        };
        let south = find([0.0, -q], &vertices);
        let origin = find([0.0, 0.0], &vertices);
        vertices.push([q, -q]);
        let corner = vertices.len() - 1;
        vertices.push([0.5 * q, -0.5 * q]);
        let mid = vertices.len() - 1;
        triangles.push([south, mid, origin]);
        triangles.push([south, corner, mid]);
    }
    Mesh::from_triangles(vertices, triangles).expect("initial mesh is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lshape_counts() {
        let m = make_initial_mesh(DomainId::LShape);
        assert_eq!(m.n_triangles(), 12);
        assert_eq!(m.n_vertices(), 11);
        assert_eq!(m.boundary_facets().len(), 8);
        assert!((m.perimeter() - 2.0).abs() < 1e-14);
        assert!((m.total_area() - 0.1875).abs() < 1e-14);
        assert!((m.shape_regularity() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zshape_counts() {
        let m = make_initial_mesh(DomainId::ZShape);
        assert_eq!(m.n_triangles(), 14);
        assert_eq!(m.n_vertices(), 13);
        // (1/8, -1/8) splits the slanted side
        assert_eq!(m.boundary_facets().len(), 10);
        let slanted = 0.125f64.sqrt();
        assert!((m.perimeter() - (2.0 + slanted)).abs() < 1e-14);
        assert!((m.total_area() - (0.25 - 0.25 * 0.25 / 2.0)).abs() < 1e-14);
        assert!((m.shape_regularity() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_is_counterclockwise() {
        for d in [DomainId::LShape, DomainId::ZShape] {
            let m = make_initial_mesh(d);
            let v = m.vertices();
            let shoelace: f64 = m
                .boundary_facets()
                .iter()
                .map(|f| 0.5 * (v[f.a][0] * v[f.b][1] - v[f.b][0] * v[f.a][1]))
                .sum();
            assert!((shoelace - m.total_area()).abs() < 1e-14);
        }
    }
}
