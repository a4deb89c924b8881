use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::{Mesh, Point};
use crate::error::{Error, Result};

/// Structured mesh families on the unit square. Every family halves its mesh
/// size h_M exactly from one level to the next.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MeshFamily {
    /// Rows of triangles with alternating offsets; the longest edge is the
    /// horizontal one, so h_M = 2^{-(level+3)}.
    Triangular,
    /// Hexagon tiling cut along the square's sides through hexagon centres.
    Hexagonal,
    /// n×n squares with n = 8·2^level, h_M = √2/n.
    Cartesian,
}

impl MeshFamily {
    pub const ALL: [MeshFamily; 3] = [
        MeshFamily::Triangular,
        MeshFamily::Hexagonal,
        MeshFamily::Cartesian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeshFamily::Triangular => "triangular",
            MeshFamily::Hexagonal => "hexagonal",
            MeshFamily::Cartesian => "cartesian",
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangular" => Ok(MeshFamily::Triangular),
            "hexagonal" => Ok(MeshFamily::Hexagonal),
            "cartesian" => Ok(MeshFamily::Cartesian),
            other => Err(Error::Domain(format!("unknown mesh family `{other}`"))),
        }
    }
}

pub fn generate_family(family: MeshFamily, level: u32) -> Mesh {
    let mesh = match family {
        MeshFamily::Cartesian => cartesian(8 << level),
        MeshFamily::Triangular => offset_triangles(8 << level, 10 << level),
        MeshFamily::Hexagonal => clipped_hexagons(8 << level, 7 << level),
    };
    mesh.expect("structured generators produce valid meshes")
}

fn cartesian(n: usize) -> Result<Mesh> {
    let nf = n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / nf, j as f64 / nf]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::new(vertices, cells)
}

/// `cols` triangles bases per row, `rows` rows. Horizontal lines alternate
/// between regular abscissae i/cols and offset ones (i+½)/cols padded with the
/// two side points; `rows` must be even so the top line is regular.
fn offset_triangles(cols: usize, rows: usize) -> Result<Mesh> {
    debug_assert!(rows.is_multiple_of(2));
    // Abscissae on a lattice of step 1/(2·cols).
    let regular: Vec<usize> = (0..=cols).map(|i| 2 * i).collect();
    let mut offset = vec![0];
    offset.extend((0..cols).map(|i| 2 * i + 1));
    offset.push(2 * cols);

    let xs = (2 * cols) as f64;
    let ys = rows as f64;
    let mut vertices = Vec::new();
    let mut lines: Vec<Vec<(usize, usize)>> = Vec::with_capacity(rows + 1);
    for j in 0..=rows {
        let lattice = if j % 2 == 0 { &regular } else { &offset };
        let line = lattice
            .iter()
            .map(|&x| {
                vertices.push([x as f64 / xs, j as f64 / ys]);
                (x, vertices.len() - 1)
            })
            .collect();
        lines.push(line);
    }

    let mut cells = Vec::new();
    for j in 0..rows {
        let (bottom, top) = (&lines[j], &lines[j + 1]);
        let (mut i, mut k) = (0, 0);
        while i + 1 < bottom.len() || k + 1 < top.len() {
            let advance_bottom = k + 1 == top.len()
                || (i + 1 < bottom.len()
                    && bottom[i + 1].0.abs_diff(top[k].0) <= top[k + 1].0.abs_diff(bottom[i].0));
            if advance_bottom {
                cells.push(vec![bottom[i].1, bottom[i + 1].1, top[k].1]);
                i += 1;
            } else {
                cells.push(vec![bottom[i].1, top[k + 1].1, top[k].1]);
                k += 1;
            }
        }
    }
    Mesh::new(vertices, cells)
}

/// Flat-topped hexagons in columns spaced 1/cols apart, `rows` hexagons high.
/// Column centres sit on x = i/cols, so x = 0 and x = 1 cut through centres;
/// even columns are centred on y = j/rows, odd ones half a row up, so y = 0 and
/// y = 1 cut through centres or run along flat edges. The hexagons are
/// stretched slightly from regular (height/width = 3·cols/(2·√3·rows)) so that
/// both cuts land on lattice points; `cols` must be even.
fn clipped_hexagons(cols: usize, rows: usize) -> Result<Mesh> {
    debug_assert!(cols.is_multiple_of(2));
    // Lattice: x in units of 1/(3·cols), y in units of 1/(2·rows).
    let xmax = 3 * cols as i64;
    let ymax = 2 * rows as i64;
    const HEX: [(i64, i64); 6] = [(2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)];

    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut cells = Vec::new();
    for i in 0..=cols as i64 {
        let cx = 3 * i;
        let centres: Vec<i64> = if i % 2 == 0 {
            (0..=rows as i64).map(|j| 2 * j).collect()
        } else {
            (0..rows as i64).map(|j| 2 * j + 1).collect()
        };
        for cy in centres {
            let poly: Vec<(i64, i64)> = HEX.iter().map(|&(dx, dy)| (cx + dx, cy + dy)).collect();
            let clipped = clip_to_box(&poly, xmax, ymax);
            if clipped.len() < 3 {
                continue;
            }
            let cell = clipped
                .iter()
                .map(|&p| {
                    *index.entry(p).or_insert_with(|| {
                        vertices.push([p.0 as f64 / xmax as f64, p.1 as f64 / ymax as f64]);
                        vertices.len() - 1
                    })
                })
                .collect();
            cells.push(cell);
        }
    }
    Mesh::new(vertices, cells)
}

/// Sutherland–Hodgman clip of a convex lattice polygon to [0,xmax]×[0,ymax].
/// Hexagon edges have lattice slopes 0 or ±1, so every intersection with the
/// box sides is again a lattice point.
fn clip_to_box(poly: &[(i64, i64)], xmax: i64, ymax: i64) -> Vec<(i64, i64)> {
    // (axis, bound, keep >=?)
    let planes = [
        (0, 0, true),
        (0, xmax, false),
        (1, 0, true),
        (1, ymax, false),
    ];
    let mut out: Vec<(i64, i64)> = poly.to_vec();
    for &(axis, bound, keep_ge) in &planes {
        if out.is_empty() {
            break;
        }
        let coord = |p: (i64, i64)| if axis == 0 { p.0 } else { p.1 };
        let inside = |p: (i64, i64)| {
            if keep_ge {
                coord(p) >= bound
            } else {
                coord(p) <= bound
            }
        };
        let input = std::mem::take(&mut out);
        for idx in 0..input.len() {
            let cur = input[idx];
            let prev = input[(idx + input.len() - 1) % input.len()];
            let cross = |a: (i64, i64), b: (i64, i64)| {
                let (ca, cb) = (coord(a), coord(b));
                let t_num = bound - ca;
                let t_den = cb - ca;
                if axis == 0 {
                    let dy = (b.1 - a.1) * t_num;
                    debug_assert_eq!(dy % t_den, 0);
                    (bound, a.1 + dy / t_den)
                } else {
                    let dx = (b.0 - a.0) * t_num;
                    debug_assert_eq!(dx % t_den, 0);
                    (a.0 + dx / t_den, bound)
                }
            };
            match (inside(prev), inside(cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(cross(prev, cur)),
                (false, true) => {
                    out.push(cross(prev, cur));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
        out.dedup();
        if out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
    }
    out
}
