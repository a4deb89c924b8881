//! Implicit Euler time stepping of the coupled gradient scheme.
//!
//! Each step solves the nonlinear pair of equations by Picard iteration: the
//! reaction arguments are frozen at the previous iterate `w`, which decouples
//! the system into two SPD linear solves
//!
//! ```text
//! (M/δt + K_Λ₁) u = M u⁽ⁿ⁾/δt + Πᵀ W (F₁(Π w₁, Π w₂) + s_u)
//! (M/δt + K_Λ₂) v = M v⁽ⁿ⁾/δt + Πᵀ W (F₂(Π w₁, Π w₂) + s_v)
//! ```
//!
//! restricted to interior DOFs, boundary DOFs pinned to the Dirichlet data at
//! the new time level. The map w ↦ (u, v) is a contraction in the norm
//! ‖∇_D w₁‖ + ‖∇_D w₂‖ when δt ≤ 2 / (L² C_D² (λ̲₁ + λ̲₂)).

mod output;
mod time_grid;

pub use output::{write_snapshot, write_solver_log};
pub use time_grid::TimeGrid;

use crate::error::{Error, Result};
use crate::gd::{estimate_cd, DiscreteField, GradientDiscretisation};
use crate::problems::ProblemSpec;
use crate::sparse::{CsrMatrix, LinearSolverKind, SpdSolver};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardConfig {
    /// Stop when ‖∇_D(u_k − u_{k−1})‖ + ‖∇_D(v_k − v_{k−1})‖ ≤ tol.
    pub tol: f64,
    pub max_iter: usize,
    /// Refuse steps above the contraction bound.
    pub contraction_guard: bool,
    pub linear_solver: LinearSolverKind,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            tol: 1e-10,
            max_iter: 100,
            contraction_guard: false,
            linear_solver: LinearSolverKind::Direct,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Domain(format!(
                "Picard tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("Picard max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Largest step for which the Picard map is a contraction:
/// 2 / (L² C_D² (λ̲₁ + λ̲₂)). A zero Lipschitz constant imposes no bound.
pub fn max_stable_dt(
    lipschitz: f64,
    c_d: f64,
    lambda_min_1: f64,
    lambda_min_2: f64,
) -> Result<f64> {
    if !(lipschitz >= 0.0) {
        return Err(Error::Domain(format!(
            "Lipschitz constant must be non-negative, got {lipschitz}"
        )));
    }
    for (name, v) in [("C_D", c_d), ("λ̲₁", lambda_min_1), ("λ̲₂", lambda_min_2)] {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    if lipschitz == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 / (lipschitz * lipschitz * c_d * c_d * (lambda_min_1 + lambda_min_2)))
}

/// Contraction factor √(2δt / (λ̲₁ + λ̲₂)) C_D L of the Picard map.
pub fn contraction_factor(dt: f64, lipschitz: f64, c_d: f64, lambda_min: [f64; 2]) -> f64 {
    (2.0 * dt / (lambda_min[0] + lambda_min[1])).sqrt() * c_d * lipschitz
}

/// Time-independent matrices of the scheme.
pub struct SchemeOperators<'a> {
    pub gd: &'a GradientDiscretisation,
    pub problem: &'a ProblemSpec,
    /// Πᵀ W Π
    pub mass: CsrMatrix,
    /// Λᵢ-weighted Gram matrices of ∇_D.
    pub stiffness: [CsrMatrix; 2],
}

impl<'a> SchemeOperators<'a> {
    pub fn new(gd: &'a GradientDiscretisation, problem: &'a ProblemSpec) -> Self {
        let stiffness = [
            gd.stiffness_matrix(&*problem.lambda[0]),
            gd.stiffness_matrix(&*problem.lambda[1]),
        ];
        SchemeOperators {
            gd,
            problem,
            mass: gd.mass_matrix(),
            stiffness,
        }
    }

    /// Dirichlet values of component `which` at the boundary DOFs at time t.
    pub fn boundary_values(&self, which: usize, t: f64) -> Vec<f64> {
        let pts = self.gd.dof_points();
        self.gd
            .boundary_dofs()
            .iter()
            .map(|&i| (self.problem.dirichlet[which])(pts[i], t))
            .collect()
    }

    /// Πᵀ W (F_which(Π w₁, Π w₂) + s_which(·, t)).
    fn reaction_load(&self, which: usize, frozen: (&[f64], &[f64]), t: f64) -> Vec<f64> {
        let p1 = self.gd.reconstruct(frozen.0);
        let p2 = self.gd.reconstruct(frozen.1);
        let centroids = self.gd.mesh().cell_centroids();
        let f: Vec<f64> = (0..self.gd.n_cells())
            .map(|k| {
                self.problem.reaction(which, p1[k], p2[k])
                    + self.problem.source(which, centroids[k], t)
            })
            .collect();
        self.gd.load_vector(&f)
    }
}

/// An interior-DOF linear system `A x = b`.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Assembles the linear system for one component with frozen reaction
/// arguments. `which` is 0 for u and 1 for v.
pub fn assemble_linear_step(
    ops: &SchemeOperators<'_>,
    which: usize,
    previous: &DiscreteField,
    frozen: (&DiscreteField, &DiscreteField),
    dt: f64,
    t_next: f64,
) -> Result<LinearSystem> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let blocks = ComponentBlocks::new(ops, which, dt, None)?;
    let base = step_base_load(ops, which, &previous.0, dt, t_next);
    let rhs = blocks.rhs(ops, which, &base, (&frozen.0 .0, &frozen.1 .0), t_next);
    Ok(LinearSystem {
        matrix: blocks.a_ii,
        rhs,
    })
}

/// (1/δt) M u⁽ⁿ⁾ on all DOFs, minus the Dirichlet lift (M/δt + K) g.
fn step_base_load(
    ops: &SchemeOperators<'_>,
    which: usize,
    previous: &[f64],
    dt: f64,
    t_next: f64,
) -> Vec<f64> {
    let gd = ops.gd;
    let mut base = ops.mass.mul_vec(previous);
    base.iter_mut().for_each(|b| *b /= dt);
    let mut lift = vec![0.0; gd.n_dofs()];
    for (&i, g) in gd
        .boundary_dofs()
        .iter()
        .zip(ops.boundary_values(which, t_next))
    {
        lift[i] = g;
    }
    ops.mass.mul_vec_add(-1.0 / dt, &lift, &mut base);
    ops.stiffness[which].mul_vec_add(-1.0, &lift, &mut base);
    base
}

struct ComponentBlocks {
    a_ii: CsrMatrix,
    solver: Option<SpdSolver>,
}

impl ComponentBlocks {
    fn new(
        ops: &SchemeOperators<'_>,
        which: usize,
        dt: f64,
        solver: Option<LinearSolverKind>,
    ) -> Result<Self> {
        let interior = ops.gd.interior_dofs();
        let a = CsrMatrix::linear_combination(1.0 / dt, &ops.mass, 1.0, &ops.stiffness[which]);
        let a_ii = a.submatrix(interior, interior);
        let solver = solver.map(|kind| SpdSolver::new(&a_ii, kind)).transpose()?;
        Ok(ComponentBlocks { a_ii, solver })
    }

    fn rhs(
        &self,
        ops: &SchemeOperators<'_>,
        which: usize,
        base: &[f64],
        frozen: (&[f64], &[f64]),
        t_next: f64,
    ) -> Vec<f64> {
        let load = ops.reaction_load(which, frozen, t_next);
        ops.gd
            .interior_dofs()
            .iter()
            .map(|&i| base[i] + load[i])
            .collect()
    }
}

/// Result of one accepted time step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub u: DiscreteField,
    pub v: DiscreteField,
    pub iterations: usize,
    /// Product-norm distance between the last two iterates.
    pub increment: f64,
    /// Successive increment ratios, a measured contraction factor.
    pub ratios: Vec<f64>,
    /// max |residual| of the nonlinear scheme over all interior test functions.
    pub residual: f64,
}

/// Steps one discretisation of one problem, caching the factorised
/// matrices for the current step size.
pub struct TimeStepper<'a> {
    ops: SchemeOperators<'a>,
    cfg: PicardConfig,
    c_d: Option<f64>,
    cache: Option<(f64, [ComponentBlocks; 2])>,
}

impl<'a> TimeStepper<'a> {
    pub fn new(
        gd: &'a GradientDiscretisation,
        problem: &'a ProblemSpec,
        cfg: PicardConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let c_d = if cfg.contraction_guard {
            Some(estimate_cd(gd)?)
        } else {
            None
        };
        Ok(TimeStepper {
            ops: SchemeOperators::new(gd, problem),
            cfg,
            c_d,
            cache: None,
        })
    }

    pub fn operators(&self) -> &SchemeOperators<'a> {
        &self.ops
    }

    pub fn config(&self) -> &PicardConfig {
        &self.cfg
    }

    /// Bound on δt from the contraction argument, using C_D of this
    /// discretisation (computed on first use).
    pub fn max_stable_dt(&mut self) -> Result<f64> {
        let c_d = match self.c_d {
            Some(c) => c,
            None => {
                let c = estimate_cd(self.ops.gd)?;
                self.c_d = Some(c);
                c
            }
        };
        let lam = self.ops.problem.lambda_min();
        max_stable_dt(self.ops.problem.lipschitz, c_d, lam[0], lam[1])
    }

    fn ensure_blocks(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let stale = self.cache.as_ref().is_none_or(|(cached, _)| *cached != dt);
        if stale {
            let kind = Some(self.cfg.linear_solver);
            let blocks = [
                ComponentBlocks::new(&self.ops, 0, dt, kind)?,
                ComponentBlocks::new(&self.ops, 1, dt, kind)?,
            ];
            self.cache = Some((dt, blocks));
        }
        Ok(())
    }

    /// Initial state: J_D of the initial data with boundary DOFs set to the
    /// Dirichlet data at t = 0.
    pub fn initial_state(&self) -> (DiscreteField, DiscreteField) {
        let gd = self.ops.gd;
        let mut u = gd.interpolate(&*self.ops.problem.initial[0]);
        let mut v = gd.interpolate(&*self.ops.problem.initial[1]);
        for (which, field) in [(0, &mut u), (1, &mut v)] {
            for (&i, g) in gd
                .boundary_dofs()
                .iter()
                .zip(self.ops.boundary_values(which, 0.0))
            {
                field.0[i] = g;
            }
        }
        (u, v)
    }

    /// ‖∇_D a₁‖ + ‖∇_D a₂‖
    pub fn product_norm(&self, a: (&[f64], &[f64])) -> f64 {
        self.ops.gd.grad_norm(a.0) + self.ops.gd.grad_norm(a.1)
    }

    /// One application of the fixed-point map G: solves both linear systems
    /// with the reaction frozen at `frozen`.
    pub fn picard_step(
        &mut self,
        state: (&DiscreteField, &DiscreteField),
        frozen: (&DiscreteField, &DiscreteField),
        dt: f64,
        t_next: f64,
    ) -> Result<(DiscreteField, DiscreteField)> {
        let bases = [
            step_base_load(&self.ops, 0, &state.0 .0, dt, t_next),
            step_base_load(&self.ops, 1, &state.1 .0, dt, t_next),
        ];
        self.apply_map(&bases, (&frozen.0 .0, &frozen.1 .0), dt, t_next)
    }

    fn apply_map(
        &mut self,
        bases: &[Vec<f64>; 2],
        frozen: (&[f64], &[f64]),
        dt: f64,
        t_next: f64,
    ) -> Result<(DiscreteField, DiscreteField)> {
        let boundary = [
            self.ops.boundary_values(0, t_next),
            self.ops.boundary_values(1, t_next),
        ];
        self.ensure_blocks(dt)?;
        let blocks = &self.cache.as_ref().unwrap().1;
        let mut out = Vec::with_capacity(2);
        for which in 0..2 {
            let rhs = blocks[which].rhs(&self.ops, which, &bases[which], frozen, t_next);
            let x = blocks[which].solver.as_ref().unwrap().solve(&rhs)?;
            let mut field = self.ops.gd.extend_interior(&x);
            for (&i, &g) in self.ops.gd.boundary_dofs().iter().zip(&boundary[which]) {
                field.0[i] = g;
            }
            out.push(field);
        }
        let v = out.pop().unwrap();
        let u = out.pop().unwrap();
        Ok((u, v))
    }

    /// Advances (u⁽ⁿ⁾, v⁽ⁿ⁾) by δt with Picard iteration started from the
    /// current state.
    pub fn solve_step(
        &mut self,
        state: (&DiscreteField, &DiscreteField),
        dt: f64,
        t_next: f64,
    ) -> Result<StepOutcome> {
        if self.cfg.contraction_guard {
            let bound = self.max_stable_dt()?;
            if dt > bound {
                return Err(Error::StepSize { dt, bound });
            }
        }
        let bases = [
            step_base_load(&self.ops, 0, &state.0 .0, dt, t_next),
            step_base_load(&self.ops, 1, &state.1 .0, dt, t_next),
        ];
        let mut w = (state.0.clone(), state.1.clone());
        let mut ratios = Vec::new();
        let mut prev_inc = f64::NAN;
        for it in 1..=self.cfg.max_iter {
            let (u, v) = self.apply_map(&bases, (&w.0 .0, &w.1 .0), dt, t_next)?;
            let inc = self.product_norm((&u.sub(&w.0).0, &v.sub(&w.1).0));
            if prev_inc.is_finite() && prev_inc > 0.0 {
                ratios.push(inc / prev_inc);
            }
            prev_inc = inc;
            w = (u, v);
            if inc <= self.cfg.tol {
                let residual = self.residual(&bases, (&w.0 .0, &w.1 .0), dt, t_next)?;
                return Ok(StepOutcome {
                    u: w.0,
                    v: w.1,
                    iterations: it,
                    increment: inc,
                    ratios,
                    residual,
                });
            }
        }
        Err(Error::Nonconvergence {
            iterations: self.cfg.max_iter,
            increment: prev_inc,
            ratio: ratios.last().copied().unwrap_or(f64::NAN),
        })
    }

    /// max over interior test functions of |A x − b(x)| for both components,
    /// with the reaction evaluated at the candidate itself.
    fn residual(
        &mut self,
        bases: &[Vec<f64>; 2],
        candidate: (&[f64], &[f64]),
        dt: f64,
        t_next: f64,
    ) -> Result<f64> {
        let interior = self.ops.gd.interior_dofs().to_vec();
        self.ensure_blocks(dt)?;
        let blocks = &self.cache.as_ref().unwrap().1;
        let mut worst: f64 = 0.0;
        for (which, x) in [candidate.0, candidate.1].into_iter().enumerate() {
            let xi: Vec<f64> = interior.iter().map(|&i| x[i]).collect();
            let ax = blocks[which].a_ii.mul_vec(&xi);
            let b = blocks[which].rhs(&self.ops, which, &bases[which], candidate, t_next);
            for (a, b) in ax.iter().zip(&b) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub picard_iters: usize,
    pub residual: f64,
}

/// All time levels of a discrete solution.
#[derive(Clone, Debug)]
pub struct SpaceTimeSolution {
    pub grid: TimeGrid,
    pub u: Vec<DiscreteField>,
    pub v: Vec<DiscreteField>,
    pub log: Vec<StepLog>,
}

/// Marches the scheme over `grid`, handing every time level (including the
/// initial one) to `observe` instead of storing it.
pub fn march_with(
    gd: &GradientDiscretisation,
    problem: &ProblemSpec,
    grid: &TimeGrid,
    cfg: PicardConfig,
    mut observe: impl FnMut(usize, &DiscreteField, &DiscreteField),
) -> Result<Vec<StepLog>> {
    let mut stepper = TimeStepper::new(gd, problem, cfg)?;
    let (mut u, mut v) = stepper.initial_state();
    observe(0, &u, &v);
    let mut log = Vec::with_capacity(grid.n_steps());
    for n in 0..grid.n_steps() {
        let outcome = stepper
            .solve_step((&u, &v), grid.step(n), grid.time(n + 1))
            .map_err(|e| Error::AtTimeLevel {
                level: n + 1,
                source: Box::new(e),
            })?;
        log.push(StepLog {
            step: n + 1,
            picard_iters: outcome.iterations,
            residual: outcome.residual,
        });
        u = outcome.u;
        v = outcome.v;
        observe(n + 1, &u, &v);
    }
    Ok(log)
}

pub fn march(
    gd: &GradientDiscretisation,
    problem: &ProblemSpec,
    grid: &TimeGrid,
    cfg: PicardConfig,
) -> Result<SpaceTimeSolution> {
    let mut us = Vec::with_capacity(grid.n_steps() + 1);
    let mut vs = Vec::with_capacity(grid.n_steps() + 1);
    let log = march_with(gd, problem, grid, cfg, |_, u, v| {
        us.push(u.clone());
        vs.push(v.clone());
    })?;
    Ok(SpaceTimeSolution {
        grid: grid.clone(),
        u: us,
        v: vs,
        log,
    })
}

#[cfg(test)]
mod tests;
