//! Plain-text mesh dumps: one `x y` line per vertex and one
//! `v0 v1 v2 refedge` line per triangle (0-based ids, refedge is the local
//! index of the reference edge).

use std::io::Write;
use std::path::Path;

use super::Mesh;
use crate::error::Result;

pub fn write_coordinates<W: Write>(mesh: &Mesh, mut out: W) -> Result<()> {
    for p in mesh.vertices() {
        writeln!(out, "{:.17e} {:.17e}", p[0], p[1])?;
    }
    Ok(())
}

pub fn write_elements<W: Write>(mesh: &Mesh, mut out: W) -> Result<()> {
    for t in mesh.triangles() {
        let [a, b, c] = t.vertices;
        writeln!(out, "{a} {b} {c} 0")?;
    }
    Ok(())
}

/// Write `<stem>_coordinates.dat` and `<stem>_elements.dat` into `dir`.
pub fn dump_mesh(mesh: &Mesh, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let coords = std::fs::File::create(dir.join(format!("{stem}_coordinates.dat")))?;
    write_coordinates(mesh, std::io::BufWriter::new(coords))?;
    let elems = std::fs::File::create(dir.join(format!("{stem}_elements.dat")))?;
    write_elements(mesh, std::io::BufWriter::new(elems))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_initial_mesh, DomainId};

    #[test]
    fn dump_has_one_line_per_entity() {
        let m = make_initial_mesh(DomainId::LShape);
        let mut c = Vec::new();
        let mut e = Vec::new();
        write_coordinates(&m, &mut c).unwrap();
        write_elements(&m, &mut e).unwrap();
        let c = String::from_utf8(c).unwrap();
        let e = String::from_utf8(e).unwrap();
        assert_eq!(c.lines().count(), 11);
        assert_eq!(e.lines().count(), 12);
        let x: Vec<f64> = c.lines().next().unwrap().split(' ').map(|s| s.parse().unwrap()).collect();
        assert_eq!(x, m.vertices()[0].to_vec());
    }
}
