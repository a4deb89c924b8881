//! Concrete gradient discretisations: the hybrid mimetic mixed (HMM) scheme on
//! general polygonal meshes and conforming P1 finite elements on triangles.
//!
//! HMM unknowns are one value per cell and one per face. On the triangle
//! D_{K,σ} joining the centroid x_K to face σ the reconstructed gradient is
//!
//! ```text
//! ∇_{K,σ} u = ∇_K u + (α √2 / d_{K,σ}) (u_σ − u_K − ∇_K u · (x_σ − x_K)) n_{K,σ}
//! ∇_K u     = (1/|K|) Σ_σ |σ| u_σ n_{K,σ}
//! ```
//!
//! with d_{K,σ} the distance from x_K to the line of σ and α the
//! stabilisation weight. The stabilisation vanishes on interpolants of affine
//! functions, so both parts reproduce affine gradients exactly.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gd::{GdParts, GradientDiscretisation, SchemeKind};
use crate::mesh::Mesh;
use crate::sparse::CsrMatrix;

/// DOF numbering of an HMM discretisation: cells first, then faces.
#[derive(Clone, Debug)]
pub struct HmmLayout {
    pub n_cells: usize,
    pub n_faces: usize,
    pub stab_coeff: f64,
}

impl HmmLayout {
    pub fn new(mesh: &Mesh, stab_coeff: f64) -> Self {
        HmmLayout {
            n_cells: mesh.n_cells(),
            n_faces: mesh.n_faces(),
            stab_coeff,
        }
    }

    pub fn cell_dof(&self, cell: usize) -> usize {
        cell
    }

    pub fn face_dof(&self, face: usize) -> usize {
        self.n_cells + face
    }

    pub fn n_dofs(&self) -> usize {
        self.n_cells + self.n_faces
    }
}

pub fn build_hmm(mesh: Arc<Mesh>, stab_coeff: f64) -> Result<GradientDiscretisation> {
    if !(stab_coeff > 0.0 && stab_coeff.is_finite()) {
        return Err(Error::Domain(format!(
            "stabilisation weight must be positive, got {stab_coeff}"
        )));
    }
    let layout = HmmLayout::new(&mesh, stab_coeff);
    let beta = stab_coeff * 2f64.sqrt();

    let mut pi_trip = Vec::with_capacity(mesh.n_cells());
    let mut grad_trip = Vec::new();
    let mut piece_cell = Vec::new();
    let mut piece_area = Vec::new();
    let mut piece_centroid = Vec::new();

    for k in 0..mesh.n_cells() {
        pi_trip.push((k, layout.cell_dof(k), 1.0));
        let xk = mesh.cell_centroid(k);
        let area = mesh.cell_area(k);
        let faces = mesh.cell_faces(k);

        // Coefficients of ∇_K u on the face DOFs of K.
        let consistent: Vec<[f64; 2]> = faces
            .iter()
            .map(|&f| {
                let n = mesh.outward_normal(k, f);
                let s = mesh.face_length(f) / area;
                [s * n[0], s * n[1]]
            })
            .collect();

        for (local, &f) in faces.iter().enumerate() {
            let n = mesh.outward_normal(k, f);
            let xf = mesh.face_centroid(f);
            let dx = [xf[0] - xk[0], xf[1] - xk[1]];
            let dist = dx[0] * n[0] + dx[1] * n[1];
            if !(dist > 0.0) {
                return Err(Error::Geometry {
                    cell: k,
                    reason: format!(
                        "centroid-to-face distance {dist:e} for face {f} is not positive"
                    ),
                });
            }
            let p = piece_cell.len();
            piece_cell.push(k);
            piece_area.push(0.5 * mesh.face_length(f) * dist);
            let [a, b] = mesh.faces()[f].vertices.map(|v| mesh.vertices()[v]);
            piece_centroid.push([(xk[0] + a[0] + b[0]) / 3.0, (xk[1] + a[1] + b[1]) / 3.0]);
            let s = beta / dist;

            // Residual R = u_σ − u_K − Σ_σ' (consistent_σ' · dx) u_σ'.
            let mut coeff: Vec<(usize, f64)> = Vec::with_capacity(faces.len() + 1);
            coeff.push((layout.cell_dof(k), -1.0));
            for (j, &g) in faces.iter().enumerate() {
                let mut c = -(consistent[j][0] * dx[0] + consistent[j][1] * dx[1]);
                if j == local {
                    c += 1.0;
                }
                coeff.push((layout.face_dof(g), c));
            }

            for comp in 0..2 {
                let row = 2 * p + comp;
                for (j, &g) in faces.iter().enumerate() {
                    grad_trip.push((row, layout.face_dof(g), consistent[j][comp]));
                }
                for &(dof, c) in &coeff {
                    grad_trip.push((row, dof, s * c * n[comp]));
                }
            }
        }
    }

    let n = layout.n_dofs();
    let mut interior = vec![true; n];
    let mut dof_points = mesh.cell_centroids().to_vec();
    for f in 0..mesh.n_faces() {
        dof_points.push(mesh.face_centroid(f));
        if mesh.is_boundary_face(f) {
            interior[layout.face_dof(f)] = false;
        }
    }
    let n_pieces = piece_cell.len();
    GradientDiscretisation::new(GdParts {
        kind: SchemeKind::Hmm,
        pi: CsrMatrix::from_triplets(mesh.n_cells(), n, pi_trip),
        grad: CsrMatrix::from_triplets(2 * n_pieces, n, grad_trip),
        piece_cell,
        piece_area,
        piece_centroid,
        interior,
        dof_points,
        mesh,
    })
}

/// Conforming P1 on a triangular mesh. Π_D is the value of the piecewise
/// linear function at the centroid (the mean of the three vertex values).
pub fn build_p1(mesh: Arc<Mesh>) -> Result<GradientDiscretisation> {
    if let Some(k) = mesh.cells().iter().position(|c| c.len() != 3) {
        return Err(Error::UnsupportedMesh(format!(
            "P1 needs triangles, cell {k} has {} vertices",
            mesh.cells()[k].len()
        )));
    }
    let mut pi_trip = Vec::with_capacity(3 * mesh.n_cells());
    let mut grad_trip = Vec::with_capacity(6 * mesh.n_cells());
    for (k, cell) in mesh.cells().iter().enumerate() {
        let p: Vec<[f64; 2]> = cell.iter().map(|&v| mesh.vertices()[v]).collect();
        let twice_area = 2.0 * mesh.cell_area(k);
        for i in 0..3 {
            pi_trip.push((k, cell[i], 1.0 / 3.0));
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            grad_trip.push((2 * k, cell[i], (a[1] - b[1]) / twice_area));
            grad_trip.push((2 * k + 1, cell[i], (b[0] - a[0]) / twice_area));
        }
    }
    let n = mesh.n_vertices();
    let interior = mesh
        .boundary_vertex_flags()
        .into_iter()
        .map(|b| !b)
        .collect();
    GradientDiscretisation::new(GdParts {
        kind: SchemeKind::P1,
        pi: CsrMatrix::from_triplets(mesh.n_cells(), n, pi_trip),
        grad: CsrMatrix::from_triplets(2 * mesh.n_cells(), n, grad_trip),
        piece_cell: (0..mesh.n_cells()).collect(),
        piece_area: mesh.cell_areas().to_vec(),
        piece_centroid: mesh.cell_centroids().to_vec(),
        interior,
        dof_points: mesh.vertices().to_vec(),
        mesh,
    })
}
