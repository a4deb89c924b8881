//! Problem catalogue for the coupled system
//!
//! ```text
//! ∂t u − div(Λ₁ ∇u) = F₁(u, v) + s_u
//! ∂t v − div(Λ₂ ∇v) = F₂(u, v) + s_v
//! ```
//!
//! on the unit square with Dirichlet data.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gd::Tensor;
use crate::mesh::Point;

pub type TensorField = Arc<dyn Fn(Point) -> Tensor + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
pub type SpaceTimeGrad = Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>;
pub type Reaction = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A space-time function with its spatial gradient.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: SpaceTimeFn,
    pub gradient: SpaceTimeGrad,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub lambda: [TensorField; 2],
    /// Declared eigenvalue bounds [λ̲ᵢ, λ̄ᵢ] of each tensor over the closed square.
    pub lambda_bounds: [(f64, f64); 2],
    pub reactions: [Reaction; 2],
    /// Lipschitz constant L = max(L₁, L₂) on the clamp box.
    pub lipschitz: f64,
    /// Half-width of the box |u|, |v| ≤ M on which `lipschitz` holds.
    pub clamp_box: f64,
    /// Clamp reaction inputs to the box, making the reactions globally
    /// Lipschitz with constant `lipschitz`.
    pub clamp_reactions: bool,
    pub initial: [SpaceFn; 2],
    pub exact: Option<[ExactSolution; 2]>,
    pub sources: Option<[SpaceTimeFn; 2]>,
    pub dirichlet: [SpaceTimeFn; 2],
    pub final_time: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("lambda_bounds", &self.lambda_bounds)
            .field("lipschitz", &self.lipschitz)
            .field("clamp_box", &self.clamp_box)
            .field("clamp_reactions", &self.clamp_reactions)
            .field("final_time", &self.final_time)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// F_i(u, v), with inputs clamped to the box when clamping is enabled.
    pub fn reaction(&self, which: usize, u: f64, v: f64) -> f64 {
        if self.clamp_reactions {
            let m = self.clamp_box;
            (self.reactions[which])(u.clamp(-m, m), v.clamp(-m, m))
        } else {
            (self.reactions[which])(u, v)
        }
    }

    pub fn source(&self, which: usize, x: Point, t: f64) -> f64 {
        self.sources.as_ref().map_or(0.0, |s| (s[which])(x, t))
    }

    pub fn with_clamped_reactions(mut self) -> Self {
        self.clamp_reactions = true;
        self
    }

    pub fn lambda_min(&self) -> [f64; 2] {
        [self.lambda_bounds[0].0, self.lambda_bounds[1].0]
    }

    pub fn by_name(name: &str) -> Result<ProblemSpec> {
        match name {
            "anis-mms" => Ok(anis_mms()),
            "heat-sanity" => Ok(heat_sanity()),
            "fhn-demo" => Ok(fhn_demo()),
            other => Err(Error::Domain(format!(
                "unknown problem `{other}` (expected anis-mms, heat-sanity or fhn-demo)"
            ))),
        }
    }
}

pub const PROBLEM_NAMES: [&str; 3] = ["anis-mms", "heat-sanity", "fhn-demo"];

/// Λ = R(θ) diag(a, b) R(θ)ᵀ, expanded.
fn rotated(theta: f64, a: f64, b: f64) -> Tensor {
    let (s, c) = theta.sin_cos();
    let off = c * s * (a - b);
    [[c * c * a + s * s * b, off], [off, s * s * a + c * c * b]]
}

fn g1(p: Point) -> f64 {
    1.0 + 2.0 * p[0] * p[0] + p[1] * p[1]
}

fn g2(p: Point) -> f64 {
    1.0 + p[0] * p[0] + 2.0 * p[1] * p[1]
}

const THETA_1: f64 = 5.0 * PI / 12.0;
const THETA_2: f64 = PI / 3.0;

/// The cubic reaction u(1 − u)(u − 0.1).
pub fn cubic(u: f64) -> f64 {
    u * (1.0 - u) * (u - 0.1)
}

/// max_{|u| ≤ m} |d/du u(1−u)(u−0.1)| = max over the endpoints and the
/// vertex of the parabola 3u² − 2.2u + 0.1.
pub fn cubic_lipschitz(m: f64) -> f64 {
    let d = |u: f64| (-3.0 * u * u + 2.2 * u - 0.1).abs();
    let vertex = (2.2 / 6.0f64).clamp(-m, m);
    d(-m).max(d(m)).max(d(vertex))
}

/// Spatial part of div(Λ ∇w) for Λ = R(θ) diag(gₐ, g_b) R(θ)ᵀ where the
/// diagonal entries are (gₐ, g_b) = (g₁, g₂) or (g₂, g₁), given ∇w and the
/// Hessian of w.
fn div_flux(theta: f64, swap: bool, p: Point, grad: [f64; 2], hess: [[f64; 2]; 2]) -> f64 {
    let (s, c) = theta.sin_cos();
    let (x, y) = (p[0], p[1]);
    let (ga, gb) = if swap { (g2(p), g1(p)) } else { (g1(p), g2(p)) };
    // ∂x, ∂y of gₐ and g_b.
    let (dg1, dg2) = ([4.0 * x, 2.0 * y], [2.0 * x, 4.0 * y]);
    let (dga, dgb) = if swap { (dg2, dg1) } else { (dg1, dg2) };
    let l11 = c * c * ga + s * s * gb;
    let l12 = c * s * (ga - gb);
    let l22 = s * s * ga + c * c * gb;
    let dl11_dx = c * c * dga[0] + s * s * dgb[0];
    let dl12_dx = c * s * (dga[0] - dgb[0]);
    let dl12_dy = c * s * (dga[1] - dgb[1]);
    let dl22_dy = s * s * dga[1] + c * c * dgb[1];
    (dl11_dx + dl12_dy) * grad[0]
        + (dl12_dx + dl22_dy) * grad[1]
        + l11 * hess[0][0]
        + 2.0 * l12 * hess[0][1]
        + l22 * hess[1][1]
}

/// The anisotropic manufactured-solution benchmark on (0,1)², T = 1:
/// Λ₁ = A diag(g₁, g₂) Aᵀ, Λ₂ = B diag(g₂, g₁) Bᵀ with rotations by 5π/12 and
/// π/3, g₁ = 1 + 2x² + y², g₂ = 1 + x² + 2y², F₁ = u(1−u)(u−0.1), F₂ = u − v
/// and exact solution u = e^{−t} sin πx sin πy, v = e^{−t} cos πx cos πy.
pub fn anis_mms() -> ProblemSpec {
    let u_exact = |p: Point, t: f64| (-t).exp() * (PI * p[0]).sin() * (PI * p[1]).sin();
    let v_exact = |p: Point, t: f64| (-t).exp() * (PI * p[0]).cos() * (PI * p[1]).cos();
    let u_grad = |p: Point, t: f64| {
        let e = (-t).exp();
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        [e * PI * cx * sy, e * PI * sx * cy]
    };
    let v_grad = |p: Point, t: f64| {
        let e = (-t).exp();
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        [-e * PI * sx * cy, -e * PI * cx * sy]
    };
    let source_u = move |p: Point, t: f64| {
        let e = (-t).exp();
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        let u = e * sx * sy;
        let pp = PI * PI;
        let hess = [[-pp * u, e * pp * cx * cy], [e * pp * cx * cy, -pp * u]];
        let dt = -u;
        dt - div_flux(THETA_1, false, p, u_grad(p, t), hess) - cubic(u)
    };
    let source_v = move |p: Point, t: f64| {
        let e = (-t).exp();
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        let u = e * sx * sy;
        let v = e * cx * cy;
        let pp = PI * PI;
        let hess = [[-pp * v, e * pp * sx * sy], [e * pp * sx * sy, -pp * v]];
        let dt = -v;
        dt - div_flux(THETA_2, true, p, v_grad(p, t), hess) - (u - v)
    };
    let clamp_box = 2.0;
    ProblemSpec {
        name: "anis-mms".into(),
        lambda: [
            Arc::new(|p| rotated(THETA_1, g1(p), g2(p))),
            Arc::new(|p| rotated(THETA_2, g2(p), g1(p))),
        ],
        // g₁, g₂ ∈ [1, 4] on the closed square, min at (0,0), max at (1,1).
        lambda_bounds: [(1.0, 4.0), (1.0, 4.0)],
        reactions: [Arc::new(|u, _| cubic(u)), Arc::new(|u, v| u - v)],
        lipschitz: cubic_lipschitz(clamp_box).max(2f64.sqrt()),
        clamp_box,
        clamp_reactions: false,
        initial: [
            Arc::new(move |p| u_exact(p, 0.0)),
            Arc::new(move |p| v_exact(p, 0.0)),
        ],
        exact: Some([
            ExactSolution {
                value: Arc::new(u_exact),
                gradient: Arc::new(u_grad),
            },
            ExactSolution {
                value: Arc::new(v_exact),
                gradient: Arc::new(v_grad),
            },
        ]),
        sources: Some([Arc::new(source_u), Arc::new(source_v)]),
        dirichlet: [Arc::new(u_exact), Arc::new(v_exact)],
        final_time: 1.0,
    }
}

/// Decoupled heat equations with Λ = I, no reaction, homogeneous Dirichlet
/// data and separable exact solutions
/// u = e^{−2π²t} sin πx sin πy, v = e^{−5π²t} sin πx sin 2πy.
pub fn heat_sanity() -> ProblemSpec {
    let ku = 2.0 * PI * PI;
    let kv = 5.0 * PI * PI;
    let u_exact = move |p: Point, t: f64| (-ku * t).exp() * (PI * p[0]).sin() * (PI * p[1]).sin();
    let v_exact =
        move |p: Point, t: f64| (-kv * t).exp() * (PI * p[0]).sin() * (2.0 * PI * p[1]).sin();
    let u_grad = move |p: Point, t: f64| {
        let e = (-ku * t).exp();
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        [e * PI * cx * sy, e * PI * sx * cy]
    };
    let v_grad = move |p: Point, t: f64| {
        let e = (-kv * t).exp();
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (2.0 * PI * p[1]).sin_cos();
        [e * PI * cx * sy, 2.0 * e * PI * sx * cy]
    };
    let identity: TensorField = Arc::new(|_| [[1.0, 0.0], [0.0, 1.0]]);
    ProblemSpec {
        name: "heat-sanity".into(),
        lambda: [identity.clone(), identity],
        lambda_bounds: [(1.0, 1.0), (1.0, 1.0)],
        reactions: [Arc::new(|_, _| 0.0), Arc::new(|_, _| 0.0)],
        lipschitz: 0.0,
        clamp_box: f64::INFINITY,
        clamp_reactions: false,
        initial: [
            Arc::new(move |p| u_exact(p, 0.0)),
            Arc::new(move |p| v_exact(p, 0.0)),
        ],
        exact: Some([
            ExactSolution {
                value: Arc::new(u_exact),
                gradient: Arc::new(u_grad),
            },
            ExactSolution {
                value: Arc::new(v_exact),
                gradient: Arc::new(v_grad),
            },
        ]),
        sources: None,
        dirichlet: [Arc::new(|_, _| 0.0), Arc::new(|_, _| 0.0)],
        final_time: 0.1,
    }
}

/// Excitable-medium demo: the cubic/linear reaction pair with isotropic
/// diffusion (v diffusing half as fast), a Gaussian pulse in u, homogeneous
/// Dirichlet data and clamped reactions. No exact solution.
pub fn fhn_demo() -> ProblemSpec {
    let clamp_box = 2.0;
    ProblemSpec {
        name: "fhn-demo".into(),
        lambda: [
            Arc::new(|_| [[1.0, 0.0], [0.0, 1.0]]),
            Arc::new(|_| [[0.5, 0.0], [0.0, 0.5]]),
        ],
        lambda_bounds: [(1.0, 1.0), (0.5, 0.5)],
        reactions: [Arc::new(|u, _| cubic(u)), Arc::new(|u, v| u - v)],
        lipschitz: cubic_lipschitz(clamp_box).max(2f64.sqrt()),
        clamp_box,
        clamp_reactions: true,
        initial: [
            Arc::new(|p| (-50.0 * ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2))).exp()),
            Arc::new(|_| 0.0),
        ],
        exact: None,
        sources: None,
        dirichlet: [Arc::new(|_, _| 0.0), Arc::new(|_, _| 0.0)],
        final_time: 1.0,
    }
}
