//! Discretisation-quality indicators: the coercivity constant C_D, the
//! consistency S_D(φ) through the projection P_D, and the limit-conformity
//! W_D(ψ).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use super::{DiscreteField, GradientDiscretisation};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::sparse::{
    dense_max_generalized_eigenvalue, power_max_generalized_eigenvalue, CsrMatrix,
    LinearSolverKind, SpdSolver,
};

/// Interior-DOF count below which C_D uses a dense eigensolve.
pub const DENSE_EIGEN_LIMIT: usize = 400;

const EIGEN_TOL: f64 = 1e-10;

/// max ‖Π_D w‖ / ‖∇_D w‖ over interior-supported w, as the square root of the
/// largest eigenvalue of `M w = μ G w` (Gram matrices of Π_D and ∇_D).
pub fn estimate_cd(gd: &GradientDiscretisation) -> Result<f64> {
    let interior = gd.interior_dofs();
    if interior.is_empty() {
        return Err(Error::Domain("discretisation has no interior DOF".into()));
    }
    let m = gd.mass_matrix().submatrix(interior, interior);
    let g = gd.gradient_gram().submatrix(interior, interior);
    let mu = if interior.len() < DENSE_EIGEN_LIMIT {
        dense_max_generalized_eigenvalue(&m, &g)?
    } else {
        power_max_generalized_eigenvalue(&m, &g, EIGEN_TOL, 100_000)?
    };
    Ok(mu.max(0.0).sqrt())
}

/// The minimiser of ‖Π_D w − φ‖² + ‖∇_D w − ∇φ‖² over interior-supported w.
#[derive(Clone, Debug)]
pub struct Projection {
    pub field: DiscreteField,
    /// ‖Π_D w − φ‖ at the minimiser.
    pub pi_part: f64,
    /// ‖∇_D w − ∇φ‖ at the minimiser.
    pub grad_part: f64,
}

impl Projection {
    /// Square root of the minimal objective: S_D(φ).
    pub fn value(&self) -> f64 {
        self.pi_part.hypot(self.grad_part)
    }
}

/// P_D φ: solves the normal equations (M + G) w = Πᵀ W φ + ∇ᵀ W ∇φ on
/// interior DOFs, with φ and ∇φ sampled at cell centroids.
pub fn project_pd(
    gd: &GradientDiscretisation,
    phi: impl Fn(Point) -> f64,
    grad_phi: impl Fn(Point) -> [f64; 2],
) -> Result<Projection> {
    weighted_projection(gd, &phi, &grad_phi, 1.0)
}

/// Minimiser of ‖Π_D w − φ‖² + τ‖∇_D w − ∇φ‖².
fn weighted_projection(
    gd: &GradientDiscretisation,
    phi: &dyn Fn(Point) -> f64,
    grad_phi: &dyn Fn(Point) -> [f64; 2],
    tau: f64,
) -> Result<Projection> {
    let interior = gd.interior_dofs();
    let phi_cells = gd.sample_cells(phi);
    let grad_pieces = gd.sample_pieces(grad_phi);
    let m = gd.mass_matrix();
    let g = gd.gradient_gram();
    let normal = CsrMatrix::linear_combination(1.0, &m, tau, &g).submatrix(interior, interior);
    let rhs_pi = gd.load_vector(&phi_cells);
    let rhs_grad = gd.gradient_load_vector(&grad_pieces);
    let rhs: Vec<f64> = interior
        .iter()
        .map(|&i| rhs_pi[i] + tau * rhs_grad[i])
        .collect();
    let solver = SpdSolver::new(&normal, LinearSolverKind::Direct).map_err(|_| {
        Error::Definiteness("projection normal matrix is not SPD (norm property fails)".into())
    })?;
    let w = gd.extend_interior(&solver.solve(&rhs)?);
    let pi = gd.reconstruct(&w.0);
    let diff: Vec<f64> = pi.iter().zip(&phi_cells).map(|(a, b)| a - b).collect();
    let pi_part = gd.l2_norm(&diff);
    let grad_part = gd.grad_error(&w.0, grad_phi);
    Ok(Projection {
        field: w,
        pi_part,
        grad_part,
    })
}

/// S_D(φ) with the root-sum-of-squares objective.
pub fn compute_sd(
    gd: &GradientDiscretisation,
    phi: impl Fn(Point) -> f64,
    grad_phi: impl Fn(Point) -> [f64; 2],
) -> Result<Projection> {
    project_pd(gd, phi, grad_phi)
}

/// min_w ‖Π_D w − φ‖ + ‖∇_D w − ∇φ‖ (sum of norms).
///
/// The minimiser lies on the Pareto front of the two norms, which is traced by
/// the weighted least-squares minimisers as the weight τ runs over (0, ∞); the
/// minimum is located by a log-spaced scan of τ followed by golden-section
/// refinement.
pub fn compute_sd_sum_of_norms(
    gd: &GradientDiscretisation,
    phi: impl Fn(Point) -> f64,
    grad_phi: impl Fn(Point) -> [f64; 2],
) -> Result<f64> {
    let eval = |log_tau: f64| -> Result<f64> {
        let p = weighted_projection(gd, &phi, &grad_phi, log_tau.exp())?;
        Ok(p.pi_part + p.grad_part)
    };
    let grid: Vec<f64> = (-24..=24).map(|i| i as f64 * 0.5).collect();
    let values = grid.iter().map(|&t| eval(t)).collect::<Result<Vec<_>>>()?;
    let (best, _) =
        values.iter().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
        );
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (eval(a)?, eval(b)?);
    for _ in 0..40 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = eval(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = eval(b)?;
        }
    }
    Ok(values[best].min(fa).min(fb))
}

/// W_D(ψ) = sup |∫ ∇_D w·ψ + Π_D w div ψ| / ‖∇_D w‖, the G-dual norm of the
/// residual functional: solve G z = r, return √(rᵀz).
pub fn compute_wd(
    gd: &GradientDiscretisation,
    psi: impl Fn(Point) -> [f64; 2],
    div_psi: impl Fn(Point) -> f64,
) -> Result<f64> {
    let interior = gd.interior_dofs();
    let r_grad = gd.gradient_load_vector(&gd.sample_pieces(&psi));
    let r_pi = gd.load_vector(&gd.sample_cells(&div_psi));
    let r: Vec<f64> = interior.iter().map(|&i| r_grad[i] + r_pi[i]).collect();
    let g = gd.gradient_gram().submatrix(interior, interior);
    let solver = SpdSolver::new(&g, LinearSolverKind::Direct)
        .map_err(|_| Error::Definiteness("gradient Gram matrix is singular".into()))?;
    let z = solver.solve(&r)?;
    let rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    Ok(rz.max(0.0).sqrt())
}

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// A smooth function vanishing on ∂Ω, with its gradient.
#[derive(Clone)]
pub struct ScalarProbe {
    pub name: &'static str,
    pub value: ScalarFn,
    pub gradient: VectorFn,
}

/// A smooth vector field with its divergence.
#[derive(Clone)]
pub struct VectorProbe {
    pub name: &'static str,
    pub field: VectorFn,
    pub divergence: ScalarFn,
}

pub fn scalar_probes() -> Vec<ScalarProbe> {
    vec![
        ScalarProbe {
            name: "sin_sin",
            value: Arc::new(|p| (PI * p[0]).sin() * (PI * p[1]).sin()),
            gradient: Arc::new(|p| {
                let (sx, cx) = (PI * p[0]).sin_cos();
                let (sy, cy) = (PI * p[1]).sin_cos();
                [PI * cx * sy, PI * sx * cy]
            }),
        },
        ScalarProbe {
            name: "bubble",
            value: Arc::new(|p| 16.0 * p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1])),
            gradient: Arc::new(|p| {
                [
                    16.0 * (1.0 - 2.0 * p[0]) * p[1] * (1.0 - p[1]),
                    16.0 * p[0] * (1.0 - p[0]) * (1.0 - 2.0 * p[1]),
                ]
            }),
        },
    ]
}

/// Affine vector fields; conforming discretisations integrate their
/// divergence identity exactly under centroid quadrature.
pub fn affine_vector_probes() -> Vec<VectorProbe> {
    vec![
        VectorProbe {
            name: "constant",
            field: Arc::new(|_| [1.0, 0.5]),
            divergence: Arc::new(|_| 0.0),
        },
        VectorProbe {
            name: "rotation",
            field: Arc::new(|p| [p[1], -p[0]]),
            divergence: Arc::new(|_| 0.0),
        },
        VectorProbe {
            name: "radial",
            field: Arc::new(|p| [p[0], p[1]]),
            divergence: Arc::new(|_| 2.0),
        },
        VectorProbe {
            name: "affine",
            field: Arc::new(|p| [1.0 + 2.0 * p[0] - p[1], 0.5 - p[0] + 3.0 * p[1]]),
            divergence: Arc::new(|_| 5.0),
        },
    ]
}

#[derive(Clone, Debug, Default)]
pub struct GdDiagnostics {
    pub c_d: f64,
    pub s_d_samples: BTreeMap<String, f64>,
    pub w_d_samples: BTreeMap<String, f64>,
}

pub fn diagnose(
    gd: &GradientDiscretisation,
    scalar: &[ScalarProbe],
    vector: &[VectorProbe],
) -> Result<GdDiagnostics> {
    let c_d = estimate_cd(gd)?;
    let mut out = GdDiagnostics {
        c_d,
        ..Default::default()
    };
    for probe in scalar {
        let p = compute_sd(gd, &*probe.value, &*probe.gradient)?;
        out.s_d_samples.insert(probe.name.to_string(), p.value());
    }
    for probe in vector {
        let w = compute_wd(gd, &*probe.field, &*probe.divergence)?;
        out.w_d_samples.insert(probe.name.to_string(), w);
    }
    Ok(out)
}

/// CSV with columns `gd,mesh,level,n_dofs,c_d,probe,s_d,w_d`; one row per
/// probe, the column not applying to the probe left empty.
pub fn write_diagnostics_csv<W: Write>(
    out: W,
    gd: &GradientDiscretisation,
    mesh_name: &str,
    level: u32,
    diag: &GdDiagnostics,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "gd", "mesh", "level", "n_dofs", "c_d", "probe", "s_d", "w_d",
    ])?;
    let head = [
        gd.kind().name().to_string(),
        mesh_name.to_string(),
        level.to_string(),
        gd.n_dofs().to_string(),
        format!("{:.9e}", diag.c_d),
    ];
    for (name, v) in &diag.s_d_samples {
        let mut rec = head.to_vec();
        rec.extend([name.clone(), format!("{v:.9e}"), String::new()]);
        w.write_record(&rec)?;
    }
    for (name, v) in &diag.w_d_samples {
        let mut rec = head.to_vec();
        rec.extend([name.clone(), String::new(), format!("{v:.9e}")]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
