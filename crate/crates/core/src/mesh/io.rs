//! Plain-text mesh files.
//!
//! ```text
//! # comment lines start with '#'; blank lines are ignored
//! vertices <count>
//! <index> <x> <y>
//! cells <count>
//! <index> <v0> <v1> <v2> ...          (counter-clockwise)
//! faces <count>                        (optional)
//! <index> <v0> <v1> <cell0> <cell1|->
//! ```
//!
//! Indices are zero-based and must appear in order. Coordinates are written
//! with 17 significant digits so a save/load cycle is bit-exact. When a
//! `faces` section is present it is checked against the incidence derived
//! from the cells.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Mesh, Point};
use crate::error::{Error, Result};

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_mesh(mesh))?;
    Ok(())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# rdgdm polygonal mesh");
    let _ = writeln!(s, "vertices {}", mesh.n_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{i} {:.16e} {:.16e}", p[0], p[1]);
    }
    let _ = writeln!(s, "cells {}", mesh.n_cells());
    for (k, cell) in mesh.cells().iter().enumerate() {
        let _ = write!(s, "{k}");
        for v in cell {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "faces {}", mesh.n_faces());
    for (f, face) in mesh.faces().iter().enumerate() {
        let second = face
            .cells
            .1
            .map_or_else(|| "-".to_string(), |c| c.to_string());
        let _ = writeln!(
            s,
            "{f} {} {} {} {second}",
            face.vertices[0], face.vertices[1], face.cells.0
        );
    }
    s
}

struct FileFace {
    line: usize,
    vertices: [usize; 2],
    cells: (usize, Option<usize>),
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();

    let n_vertices = section_header(lines.next(), "vertices")?;
    let mut vertices: Vec<Point> = Vec::with_capacity(n_vertices);
    for i in 0..n_vertices {
        let (line, content) = next_record(lines.next(), "vertex")?;
        let fields = split_indexed(line, content, i)?;
        if fields.len() != 2 {
            return Err(parse_err(line, "vertex record needs exactly `index x y`"));
        }
        vertices.push([parse_f64(line, fields[0])?, parse_f64(line, fields[1])?]);
    }

    let n_cells = section_header(lines.next(), "cells")?;
    let mut cells = Vec::with_capacity(n_cells);
    for k in 0..n_cells {
        let (line, content) = next_record(lines.next(), "cell")?;
        let fields = split_indexed(line, content, k)?;
        if fields.len() < 3 {
            return Err(parse_err(line, "cell record needs at least three vertices"));
        }
        let cell = fields
            .iter()
            .map(|f| parse_usize(line, f))
            .collect::<Result<Vec<_>>>()?;
        cells.push(cell);
    }

    let mut file_faces = Vec::new();
    if lines.peek().is_some() {
        let n_faces = section_header(lines.next(), "faces")?;
        for f in 0..n_faces {
            let (line, content) = next_record(lines.next(), "face")?;
            let fields = split_indexed(line, content, f)?;
            if fields.len() != 4 {
                return Err(parse_err(
                    line,
                    "face record needs `index v0 v1 cell0 cell1|-`",
                ));
            }
            let second = if fields[3] == "-" {
                None
            } else {
                Some(parse_usize(line, fields[3])?)
            };
            file_faces.push(FileFace {
                line,
                vertices: [parse_usize(line, fields[0])?, parse_usize(line, fields[1])?],
                cells: (parse_usize(line, fields[2])?, second),
            });
        }
        if let Some((line, _)) = lines.next() {
            return Err(parse_err(line, "unexpected content after faces section"));
        }
    }

    // Face records can be checked for dangling references before the
    // incidence is derived.
    for (f, face) in file_faces.iter().enumerate() {
        for c in [Some(face.cells.0), face.cells.1].into_iter().flatten() {
            if c >= n_cells {
                return Err(Error::Validation(format!(
                    "face {f} (line {}) references missing cell {c}",
                    face.line
                )));
            }
        }
    }

    let mesh = Mesh::new(vertices, cells)?;

    if !file_faces.is_empty() {
        if file_faces.len() != mesh.n_faces() {
            return Err(Error::Validation(format!(
                "faces section lists {} faces but the cells define {}",
                file_faces.len(),
                mesh.n_faces()
            )));
        }
        let derived: HashMap<(usize, usize), usize> = mesh
            .faces()
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let [a, b] = f.vertices;
                ((a.min(b), a.max(b)), i)
            })
            .collect();
        for (f, face) in file_faces.iter().enumerate() {
            let [a, b] = face.vertices;
            let Some(&i) = derived.get(&(a.min(b), a.max(b))) else {
                return Err(Error::Validation(format!(
                    "face {f} ({a}-{b}) is not an edge of any cell"
                )));
            };
            let mut want = [Some(mesh.faces()[i].cells.0), mesh.faces()[i].cells.1];
            let mut got = [Some(face.cells.0), face.cells.1];
            want.sort();
            got.sort();
            if want != got {
                return Err(Error::Validation(format!(
                    "face {f} ({a}-{b}) lists cells {:?} but is shared by {:?}",
                    got, want
                )));
            }
        }
    }
    Ok(mesh)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn section_header(item: Option<(usize, &str)>, name: &str) -> Result<usize> {
    let Some((line, content)) = item else {
        return Err(parse_err(0, format!("missing `{name}` section")));
    };
    let mut parts = content.split_whitespace();
    if parts.next() != Some(name) {
        return Err(parse_err(line, format!("expected `{name} <count>`")));
    }
    let count = parts
        .next()
        .ok_or_else(|| parse_err(line, format!("`{name}` header is missing its count")))?;
    let count = parse_usize(line, count)?;
    if parts.next().is_some() {
        return Err(parse_err(line, "trailing fields after section header"));
    }
    Ok(count)
}

fn next_record<'a>(item: Option<(usize, &'a str)>, what: &str) -> Result<(usize, &'a str)> {
    item.ok_or_else(|| parse_err(0, format!("file ended while reading {what} records")))
}

fn split_indexed(line: usize, content: &str, expected: usize) -> Result<Vec<&str>> {
    let mut parts = content.split_whitespace();
    let index = parse_usize(line, parts.next().unwrap_or(""))?;
    if index != expected {
        return Err(parse_err(
            line,
            format!("expected record index {expected}, found {index}"),
        ));
    }
    Ok(parts.collect())
}

fn parse_usize(line: usize, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(line, format!("`{s}` is not a non-negative integer")))
}

fn parse_f64(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(line, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("coordinate `{s}` is not finite")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_family, MeshFamily};

    const UNIT_SQUARE: &str = "\
# one cell
vertices 4
0 0 0
1 1 0
2 1 1
3 0 1
cells 1
0 0 1 2 3
";

    #[test]
    fn hand_written_unit_square() {
        let m = parse_mesh(UNIT_SQUARE).unwrap();
        assert_eq!(m.cell_area(0), 1.0);
        assert_eq!(m.n_faces(), 4);
        assert!(m.boundary_flags().into_iter().all(|b| b));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for family in MeshFamily::ALL {
            let m = generate_family(family, 0);
            let back = parse_mesh(&write_mesh(&m)).unwrap();
            assert_eq!(back.vertices(), m.vertices());
            assert_eq!(back.cells(), m.cells());
            assert_eq!(back.faces(), m.faces());
        }
    }

    #[test]
    fn face_with_missing_cell_is_a_validation_error() {
        let text = format!("{UNIT_SQUARE}faces 4\n0 0 1 0 -\n1 1 2 0 -\n2 2 3 7 -\n3 3 0 0 -\n");
        let err = parse_mesh(&text).unwrap_err();
        match err {
            Error::Validation(msg) => {
                assert!(msg.contains("face 2") && msg.contains("cell 7"), "{msg}")
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn face_claiming_wrong_neighbour_is_rejected() {
        let m = generate_family(MeshFamily::Cartesian, 0);
        let text = write_mesh(&m).replacen("\n0 0 1 0 -\n", "\n0 0 1 0 5\n", 1);
        let err = parse_mesh(&text).unwrap_err();
        assert!(err.to_string().contains("face 0"), "{err}");
    }

    #[test]
    fn malformed_number_reports_line() {
        let text = UNIT_SQUARE.replace("2 1 1", "2 1 abc");
        match parse_mesh(&text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 5),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn out_of_order_index_is_a_parse_error() {
        let text = UNIT_SQUARE.replace("3 0 1", "4 0 1");
        assert!(matches!(
            parse_mesh(&text),
            Err(Error::Parse { line: 6, .. })
        ));
    }

    #[test]
    fn truncated_file() {
        let text = "vertices 3\n0 0 0\n1 1 0\n";
        assert!(matches!(parse_mesh(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn save_and_load_through_the_filesystem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cart.mesh");
        let m = generate_family(MeshFamily::Cartesian, 0);
        save_mesh(&m, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.vertices(), m.vertices());
    }
}
