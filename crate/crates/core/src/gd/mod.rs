//! Gradient discretisations.
//!
//! A discretisation is a DOF space together with two sparse linear maps: a
//! piecewise-constant function reconstruction (one value per cell) and a
//! piecewise-constant gradient reconstruction. The gradient lives on
//! *pieces*: sub-regions of cells (the cell itself for P1, the triangles
//! joining the centroid to each face for HMM). All L² integrals use one-point
//! quadrature: cell area times the value at the centroid, piece area times
//! the value at the parent cell's centroid.
//!
//! Degrees of freedom are split into interior ones (the space with zero
//! boundary values) and boundary ones, which only carry Dirichlet data.

mod diagnostics;

pub use diagnostics::{
    affine_vector_probes, compute_sd, compute_sd_sum_of_norms, compute_wd, diagnose, estimate_cd,
    project_pd, scalar_probes, write_diagnostics_csv, GdDiagnostics, Projection, ScalarProbe,
    VectorProbe, DENSE_EIGEN_LIMIT,
};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::sparse::CsrMatrix;

pub type Tensor = [[f64; 2]; 2];

/// Coefficients of a discrete function, one per DOF.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteField(pub Vec<f64>);

impl DiscreteField {
    pub fn zeros(n: usize) -> Self {
        DiscreteField(vec![0.0; n])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sub(&self, other: &DiscreteField) -> DiscreteField {
        DiscreteField(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    Hmm,
    P1,
    Custom,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Hmm => "hmm",
            SchemeKind::P1 => "p1",
            SchemeKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hmm" => Ok(SchemeKind::Hmm),
            "p1" => Ok(SchemeKind::P1),
            other => Err(Error::Domain(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Everything needed to assemble a discretisation.
pub struct GdParts {
    pub kind: SchemeKind,
    pub mesh: Arc<Mesh>,
    /// `n_cells × n_dofs`.
    pub pi: CsrMatrix,
    /// `2·n_pieces × n_dofs`; rows 2p and 2p+1 are the x and y components.
    pub grad: CsrMatrix,
    pub piece_cell: Vec<usize>,
    pub piece_area: Vec<f64>,
    /// Quadrature point of each piece for gradient integrals.
    pub piece_centroid: Vec<Point>,
    pub interior: Vec<bool>,
    /// Where each DOF samples a function for interpolation and Dirichlet data.
    pub dof_points: Vec<Point>,
}

#[derive(Clone, Debug)]
pub struct GradientDiscretisation {
    kind: SchemeKind,
    mesh: Arc<Mesh>,
    pi: CsrMatrix,
    grad: CsrMatrix,
    piece_cell: Vec<usize>,
    piece_area: Vec<f64>,
    piece_centroid: Vec<Point>,
    interior_mask: Vec<bool>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    dof_points: Vec<Point>,
}

impl GradientDiscretisation {
    pub fn new(parts: GdParts) -> Result<Self> {
        let n = parts.interior.len();
        let n_pieces = parts.piece_cell.len();
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "inconsistent discretisation: {what}"
                )))
            }
        };
        check(parts.pi.nrows() == parts.mesh.n_cells(), "Π rows != cells")?;
        check(parts.pi.ncols() == n, "Π columns != DOFs")?;
        check(parts.grad.nrows() == 2 * n_pieces, "∇ rows != 2·pieces")?;
        check(parts.grad.ncols() == n, "∇ columns != DOFs")?;
        check(parts.piece_area.len() == n_pieces, "piece areas")?;
        check(parts.piece_centroid.len() == n_pieces, "piece centroids")?;
        check(parts.dof_points.len() == n, "DOF points")?;
        check(
            parts.piece_cell.iter().all(|&k| k < parts.mesh.n_cells()),
            "piece parent out of range",
        )?;
        let interior = (0..n).filter(|&i| parts.interior[i]).collect();
        let boundary = (0..n).filter(|&i| !parts.interior[i]).collect();
        Ok(GradientDiscretisation {
            kind: parts.kind,
            mesh: parts.mesh,
            pi: parts.pi,
            grad: parts.grad,
            piece_cell: parts.piece_cell,
            piece_area: parts.piece_area,
            piece_centroid: parts.piece_centroid,
            interior_mask: parts.interior,
            interior,
            boundary,
            dof_points: parts.dof_points,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.interior_mask.len()
    }

    pub fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }

    pub fn n_pieces(&self) -> usize {
        self.piece_cell.len()
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior_mask
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary
    }

    pub fn dof_points(&self) -> &[Point] {
        &self.dof_points
    }

    pub fn pi_operator(&self) -> &CsrMatrix {
        &self.pi
    }

    pub fn grad_operator(&self) -> &CsrMatrix {
        &self.grad
    }

    pub fn piece_cell(&self) -> &[usize] {
        &self.piece_cell
    }

    pub fn piece_areas(&self) -> &[f64] {
        &self.piece_area
    }

    /// Quadrature weights for cellwise values (the cell areas).
    pub fn quad_weights(&self) -> &[f64] {
        self.mesh.cell_areas()
    }

    /// Π_D w, one value per cell.
    pub fn reconstruct(&self, w: &[f64]) -> Vec<f64> {
        self.pi.mul_vec(w)
    }

    /// ∇_D w, one vector per piece.
    pub fn gradient(&self, w: &[f64]) -> Vec<[f64; 2]> {
        let g = self.grad.mul_vec(w);
        g.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
    }

    /// ∫ a b with cell-centroid quadrature.
    pub fn l2_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), self.n_cells(), "first argument is not cellwise");
        assert_eq!(b.len(), self.n_cells(), "second argument is not cellwise");
        self.quad_weights()
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    pub fn l2_norm(&self, a: &[f64]) -> f64 {
        self.l2_inner(a, a).sqrt()
    }

    /// ‖Π_D w‖
    pub fn pi_norm(&self, w: &[f64]) -> f64 {
        self.l2_norm(&self.reconstruct(w))
    }

    /// ‖∇_D w‖
    pub fn grad_norm(&self, w: &[f64]) -> f64 {
        self.gradient(w)
            .iter()
            .zip(&self.piece_area)
            .map(|(g, a)| a * (g[0] * g[0] + g[1] * g[1]))
            .sum::<f64>()
            .sqrt()
    }

    /// ‖∇_D w - field‖ with `field` sampled at the piece centroids.
    pub fn grad_error(&self, w: &[f64], field: impl Fn(Point) -> [f64; 2]) -> f64 {
        self.gradient(w)
            .iter()
            .zip(self.sample_pieces(field))
            .zip(&self.piece_area)
            .map(|((g, e), a)| a * ((g[0] - e[0]).powi(2) + (g[1] - e[1]).powi(2)))
            .sum::<f64>()
            .sqrt()
    }

    /// Samples a function at the cell centroids.
    pub fn sample_cells(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.mesh.cell_centroids().iter().map(|&c| f(c)).collect()
    }

    /// J_D: every DOF takes the value of `f` at its sampling point
    /// (cell and face centroids for HMM, vertices for P1).
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> DiscreteField {
        DiscreteField(self.dof_points.iter().map(|&p| f(p)).collect())
    }

    /// Πᵀ W Π
    pub fn mass_matrix(&self) -> CsrMatrix {
        let weights = self.quad_weights();
        let mut trip = Vec::new();
        for (k, &weight) in weights.iter().enumerate() {
            let row: Vec<(usize, f64)> = self.pi.row(k).collect();
            for &(i, a) in &row {
                for &(j, b) in &row {
                    trip.push((i, j, weight * a * b));
                }
            }
        }
        CsrMatrix::from_triplets(self.n_dofs(), self.n_dofs(), trip)
    }

    /// Σ_pieces |P| (∇_D e_i)ᵀ Λ_K (∇_D e_j), Λ taken at the parent cell centroid.
    pub fn stiffness_matrix(&self, tensor: impl Fn(Point) -> Tensor) -> CsrMatrix {
        let per_cell: Vec<Tensor> = self
            .mesh
            .cell_centroids()
            .iter()
            .map(|&c| tensor(c))
            .collect();
        let mut trip = Vec::new();
        for p in 0..self.n_pieces() {
            let lam = per_cell[self.piece_cell[p]];
            let w = self.piece_area[p];
            let gx: Vec<(usize, f64)> = self.grad.row(2 * p).collect();
            let gy: Vec<(usize, f64)> = self.grad.row(2 * p + 1).collect();
            // Λ ∇e_j, accumulated column by column.
            let mut flux: Vec<(usize, [f64; 2])> = Vec::with_capacity(gx.len() + gy.len());
            for &(j, v) in &gx {
                flux.push((j, [lam[0][0] * v, lam[1][0] * v]));
            }
            for &(j, v) in &gy {
                flux.push((j, [lam[0][1] * v, lam[1][1] * v]));
            }
            for &(i, a) in &gx {
                for &(j, f) in &flux {
                    trip.push((i, j, w * a * f[0]));
                }
            }
            for &(i, a) in &gy {
                for &(j, f) in &flux {
                    trip.push((i, j, w * a * f[1]));
                }
            }
        }
        CsrMatrix::from_triplets(self.n_dofs(), self.n_dofs(), trip)
    }

    /// Gram matrix of ∇_D (the Λ = I stiffness).
    pub fn gradient_gram(&self) -> CsrMatrix {
        self.stiffness_matrix(|_| [[1.0, 0.0], [0.0, 1.0]])
    }

    /// Πᵀ W f for cellwise f: the load vector ∫ f Π_D e_i.
    pub fn load_vector(&self, cellwise: &[f64]) -> Vec<f64> {
        let weighted: Vec<f64> = cellwise
            .iter()
            .zip(self.quad_weights())
            .map(|(f, w)| f * w)
            .collect();
        self.pi.transpose_mul_vec(&weighted)
    }

    /// ∇_Dᵀ W g for piecewise vectors g: the vector ∫ g · ∇_D e_i.
    pub fn gradient_load_vector(&self, piecewise: &[[f64; 2]]) -> Vec<f64> {
        assert_eq!(piecewise.len(), self.n_pieces());
        let mut weighted = Vec::with_capacity(2 * self.n_pieces());
        for (g, a) in piecewise.iter().zip(&self.piece_area) {
            weighted.push(a * g[0]);
            weighted.push(a * g[1]);
        }
        self.grad.transpose_mul_vec(&weighted)
    }

    /// Samples a vector field at the centroid of every piece.
    pub fn sample_pieces(&self, f: impl Fn(Point) -> [f64; 2]) -> Vec<[f64; 2]> {
        self.piece_centroid.iter().map(|&c| f(c)).collect()
    }

    pub fn piece_centroids(&self) -> &[Point] {
        &self.piece_centroid
    }

    /// Extends interior coefficients by zero on the boundary.
    pub fn extend_interior(&self, interior_values: &[f64]) -> DiscreteField {
        assert_eq!(interior_values.len(), self.interior.len());
        let mut w = vec![0.0; self.n_dofs()];
        for (&i, &v) in self.interior.iter().zip(interior_values) {
            w[i] = v;
        }
        DiscreteField(w)
    }

    pub fn restrict_interior(&self, w: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&i| w[i]).collect()
    }

    /// ‖f - Π_D w‖ with a quadrature exact for quadratics on the centroid fan
    /// of each cell. Centroid quadrature would make this vanish identically
    /// for schemes whose cell value is the centroid sample.
    pub fn reconstruction_error_fine(&self, w: &[f64], f: impl Fn(Point) -> f64) -> f64 {
        let pi = self.reconstruct(w);
        let mut s = 0.0;
        for (k, &value) in pi.iter().enumerate() {
            for [a, b, c] in self.mesh.cell_fan(k) {
                let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
                let mids = [
                    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])],
                    [0.5 * (b[0] + c[0]), 0.5 * (b[1] + c[1])],
                    [0.5 * (c[0] + a[0]), 0.5 * (c[1] + a[1])],
                ];
                let q: f64 = mids.iter().map(|&m| (f(m) - value).powi(2)).sum();
                s += area * q / 3.0;
            }
        }
        s.sqrt()
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::single_dof_gd;
    use super::*;
    use crate::hmm::build_hmm;
    use crate::mesh::{generate_family, MeshFamily};

    #[test]
    fn l2_inner_basics() {
        let gd = single_dof_gd();
        assert_eq!(gd.l2_inner(&[1.0], &[1.0]), 1.0);
        assert_eq!(gd.l2_inner(&[1.0], &[0.0]), 0.0);
    }

    #[test]
    fn l2_inner_of_x_squared_is_second_order() {
        // Midpoint rule on the 8×8 grid: Σ h² x_i² = 1/3 - h²/12 exactly.
        let mesh = Arc::new(generate_family(MeshFamily::Cartesian, 0));
        let gd = build_hmm(mesh, 1.0).unwrap();
        let x = gd.sample_cells(|p| p[0]);
        let v = gd.l2_inner(&x, &x);
        // independent refined summation of the same midpoint rule
        let n = 8usize;
        let h = 1.0 / n as f64;
        let oracle: f64 = (0..n)
            .map(|i| {
                let xi = (i as f64 + 0.5) * h;
                n as f64 * h * h * xi * xi
            })
            .sum();
        assert!((v - oracle).abs() < 1e-14);
        assert!((v - 1.0 / 3.0).abs() <= h * h / 12.0 + 1e-14);
    }

    #[test]
    #[should_panic(expected = "not cellwise")]
    fn l2_inner_length_mismatch_panics() {
        let gd = single_dof_gd();
        gd.l2_inner(&[1.0, 2.0], &[1.0]);
    }

    #[test]
    fn fine_reconstruction_error_of_constant_is_zero() {
        let mesh = Arc::new(generate_family(MeshFamily::Hexagonal, 0));
        let gd = build_hmm(mesh, 1.0).unwrap();
        let w = gd.interpolate(|_| 2.5);
        assert!(gd.reconstruction_error_fine(&w.0, |_| 2.5) < 1e-14);
    }
}
