//! Planar polygonal meshes.
//!
//! A [`Mesh`] is built from a vertex array and a list of counter-clockwise
//! cells. Faces (edges) are derived from the cells and stored once, oriented
//! the way the first adjacent cell traverses them, so the stored normal is
//! outward for that cell and inward for the second one.

mod generate;
mod io;

pub use generate::{generate_family, MeshFamily};
pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh};

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    /// Endpoints in the order the first adjacent cell traverses them.
    pub vertices: [usize; 2],
    /// First adjacent cell and, for interior faces, the second one.
    pub cells: (usize, Option<usize>),
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    faces: Vec<Face>,
    /// Faces of each cell, in the cell's edge order (edge i joins vertex i and i+1).
    cell_faces: Vec<Vec<usize>>,
    cell_area: Vec<f64>,
    cell_centroid: Vec<Point>,
    cell_diameter: Vec<f64>,
    face_length: Vec<f64>,
    face_centroid: Vec<Point>,
    face_normal: Vec<Point>,
    h_max: f64,
}

impl Mesh {
    /// Builds the face incidence and geometry, validating that cells are
    /// counter-clockwise, conforming and that the boundary is closed.
    pub fn new(vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Validation("mesh has no cells".into()));
        }
        for (k, cell) in cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(Error::Validation(format!(
                    "cell {k} has {} vertices, need at least 3",
                    cell.len()
                )));
            }
            if let Some(&v) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::Validation(format!(
                    "cell {k} references missing vertex {v}"
                )));
            }
        }

        let mut faces: Vec<Face> = Vec::new();
        let mut cell_faces = Vec::with_capacity(cells.len());
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, cell) in cells.iter().enumerate() {
            let n = cell.len();
            let mut local = Vec::with_capacity(n);
            for i in 0..n {
                let (a, b) = (cell[i], cell[(i + 1) % n]);
                if a == b {
                    return Err(Error::Validation(format!(
                        "cell {k} repeats vertex {a} on consecutive corners"
                    )));
                }
                let key = (a.min(b), a.max(b));
                match edge_index.get(&key) {
                    None => {
                        edge_index.insert(key, faces.len());
                        local.push(faces.len());
                        faces.push(Face {
                            vertices: [a, b],
                            cells: (k, None),
                        });
                    }
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.cells.1.is_some() {
                            return Err(Error::Validation(format!(
                                "face {f} ({a}-{b}) is shared by more than two cells"
                            )));
                        }
                        if face.cells.0 == k {
                            return Err(Error::Validation(format!("cell {k} uses face {f} twice")));
                        }
                        if face.vertices != [b, a] {
                            return Err(Error::Validation(format!(
                                "face {f} ({a}-{b}) is traversed in the same direction by cells {} and {k}",
                                face.cells.0
                            )));
                        }
                        face.cells.1 = Some(k);
                        local.push(f);
                    }
                }
            }
            cell_faces.push(local);
        }

        check_boundary_loops(&faces, vertices.len())?;

        let mut mesh = Mesh {
            vertices,
            cells,
            faces,
            cell_faces,
            cell_area: Vec::new(),
            cell_centroid: Vec::new(),
            cell_diameter: Vec::new(),
            face_length: Vec::new(),
            face_centroid: Vec::new(),
            face_normal: Vec::new(),
            h_max: 0.0,
        };
        mesh.compute_geometry()?;
        Ok(mesh)
    }

    fn compute_geometry(&mut self) -> Result<()> {
        let nc = self.cells.len();
        self.cell_area = Vec::with_capacity(nc);
        self.cell_centroid = Vec::with_capacity(nc);
        self.cell_diameter = Vec::with_capacity(nc);
        for (k, cell) in self.cells.iter().enumerate() {
            let pts: Vec<Point> = cell.iter().map(|&v| self.vertices[v]).collect();
            let (area, centroid) = polygon_area_centroid(&pts);
            if !(area > 0.0) {
                return Err(Error::Validation(format!(
                    "cell {k} has non-positive signed area {area:e} (vertices must be counter-clockwise)"
                )));
            }
            self.cell_area.push(area);
            self.cell_centroid.push(centroid);
            let mut diam: f64 = 0.0;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    diam = diam.max(distance(pts[i], pts[j]));
                }
            }
            self.cell_diameter.push(diam);
        }
        self.h_max = self.cell_diameter.iter().copied().fold(0.0, f64::max);

        let nf = self.faces.len();
        self.face_length = Vec::with_capacity(nf);
        self.face_centroid = Vec::with_capacity(nf);
        self.face_normal = Vec::with_capacity(nf);
        for (f, face) in self.faces.iter().enumerate() {
            let a = self.vertices[face.vertices[0]];
            let b = self.vertices[face.vertices[1]];
            let len = distance(a, b);
            if !(len > 0.0) {
                return Err(Error::Validation(format!("face {f} has zero length")));
            }
            self.face_length.push(len);
            self.face_centroid
                .push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            // Outward for a counter-clockwise traversal a -> b.
            self.face_normal
                .push([(b[1] - a[1]) / len, -(b[0] - a[0]) / len]);
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn cell_faces(&self, cell: usize) -> &[usize] {
        &self.cell_faces[cell]
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        self.cell_area[cell]
    }

    pub fn cell_areas(&self) -> &[f64] {
        &self.cell_area
    }

    pub fn cell_centroid(&self, cell: usize) -> Point {
        self.cell_centroid[cell]
    }

    pub fn cell_centroids(&self) -> &[Point] {
        &self.cell_centroid
    }

    pub fn cell_diameter(&self, cell: usize) -> f64 {
        self.cell_diameter[cell]
    }

    pub fn face_length(&self, face: usize) -> f64 {
        self.face_length[face]
    }

    pub fn face_centroid(&self, face: usize) -> Point {
        self.face_centroid[face]
    }

    /// Unit normal, outward from the face's first adjacent cell.
    pub fn face_normal(&self, face: usize) -> Point {
        self.face_normal[face]
    }

    pub fn is_boundary_face(&self, face: usize) -> bool {
        self.faces[face].is_boundary()
    }

    pub fn boundary_flags(&self) -> Vec<bool> {
        self.faces.iter().map(Face::is_boundary).collect()
    }

    /// Unit normal to `face`, outward from `cell`.
    pub fn outward_normal(&self, cell: usize, face: usize) -> Point {
        let n = self.face_normal[face];
        if self.faces[face].cells.0 == cell {
            n
        } else {
            debug_assert_eq!(self.faces[face].cells.1, Some(cell));
            [-n[0], -n[1]]
        }
    }

    /// Maximum cell diameter h_M.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Vertices lying on at least one boundary face.
    pub fn boundary_vertex_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for face in self.faces.iter().filter(|f| f.is_boundary()) {
            flags[face.vertices[0]] = true;
            flags[face.vertices[1]] = true;
        }
        flags
    }

    /// Σ_F |F| n_{K,F}; zero up to round-off for every closed cell.
    pub fn closure_defect(&self, cell: usize) -> Point {
        let mut s = [0.0, 0.0];
        for &f in &self.cell_faces[cell] {
            let n = self.outward_normal(cell, f);
            s[0] += self.face_length[f] * n[0];
            s[1] += self.face_length[f] * n[1];
        }
        s
    }

    /// Triangles (centroid, edge start, edge end) covering each cell.
    pub fn cell_fan(&self, cell: usize) -> impl Iterator<Item = [Point; 3]> + '_ {
        let c = self.cell_centroid[cell];
        let vs = &self.cells[cell];
        (0..vs.len()).map(move |i| {
            [
                c,
                self.vertices[vs[i]],
                self.vertices[vs[(i + 1) % vs.len()]],
            ]
        })
    }

    /// Conforming triangulation splitting each (convex) cell into a fan from
    /// its first vertex; triangles are kept, vertices and faces are shared.
    pub fn triangulated(&self) -> Result<Mesh> {
        let cells = self
            .cells
            .iter()
            .flat_map(|c| (1..c.len() - 1).map(move |i| vec![c[0], c[i], c[i + 1]]))
            .collect();
        Mesh::new(self.vertices.clone(), cells)
    }
}

/// Mesh diameter h_M: the maximum over cells of the largest vertex distance.
pub fn mesh_diameter(mesh: &Mesh) -> f64 {
    mesh.h_max()
}

fn check_boundary_loops(faces: &[Face], n_vertices: usize) -> Result<()> {
    let mut out_deg = vec![0usize; n_vertices];
    let mut in_deg = vec![0usize; n_vertices];
    for face in faces.iter().filter(|f| f.is_boundary()) {
        out_deg[face.vertices[0]] += 1;
        in_deg[face.vertices[1]] += 1;
    }
    if let Some(v) = (0..n_vertices).find(|&v| out_deg[v] != in_deg[v]) {
        return Err(Error::Validation(format!(
            "boundary is not closed at vertex {v}"
        )));
    }
    Ok(())
}

pub(crate) fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Signed area and centroid of a simple polygon.
pub(crate) fn polygon_area_centroid(pts: &[Point]) -> (f64, Point) {
    // Shift to the first vertex to limit cancellation.
    let o = pts[0];
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 1..pts.len() - 1 {
        let p = [pts[i][0] - o[0], pts[i][1] - o[1]];
        let q = [pts[i + 1][0] - o[0], pts[i + 1][1] - o[1]];
        let cross = p[0] * q[1] - q[0] * p[1];
        a2 += cross;
        cx += cross * (p[0] + q[0]);
        cy += cross * (p[1] + q[1]);
    }
    let area = 0.5 * a2;
    let centroid = if a2 != 0.0 {
        [o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)]
    } else {
        o
    };
    (area, centroid)
}
