//! Refinement studies: error norms against an exact solution, observed
//! rates, and report output.

mod report;

pub use report::{emit_report, read_report_csv, write_report_csv, CsvRow};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gd::{DiscreteField, GradientDiscretisation, SchemeKind};
use crate::hmm::{build_hmm, build_p1};
use crate::mesh::{generate_family, Mesh, MeshFamily};
use crate::problems::{ExactSolution, ProblemSpec};
use crate::solver::{march_with, PicardConfig, SpaceTimeSolution, StepLog, TimeGrid};

/// Builds the discretisation of `kind` on `mesh`; `stab` only affects HMM.
/// P1 on a mesh with non-triangular cells uses its fan triangulation.
pub fn build_discretisation(
    kind: SchemeKind,
    mesh: Arc<Mesh>,
    stab: f64,
) -> Result<GradientDiscretisation> {
    match kind {
        SchemeKind::Hmm => build_hmm(mesh, stab),
        SchemeKind::P1 if mesh.cells().iter().all(|c| c.len() == 3) => build_p1(mesh),
        SchemeKind::P1 => build_p1(Arc::new(mesh.triangulated()?)),
        SchemeKind::Custom => Err(Error::Validation(
            "custom discretisations cannot be built from a scheme name".into(),
        )),
    }
}

/// Errors of one run against the exact solution.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    /// max_n ‖ū(tⁿ) − Π uⁿ‖ / ‖ū(tⁿ)‖
    pub err_u: f64,
    pub err_v: f64,
    /// (Σ δt ‖∇ū(tⁿ⁺¹) − ∇_D uⁿ⁺¹‖²)^½ / (Σ δt ‖∇ū(tⁿ⁺¹)‖²)^½
    pub err_gu: f64,
    pub err_gv: f64,
    /// ‖u_ini − Π J_D u_ini‖
    pub e0_u: f64,
    pub e0_v: f64,
}

/// Accumulates [`ErrorNorms`] one time level at a time.
pub struct ErrorAccumulator<'a> {
    gd: &'a GradientDiscretisation,
    grid: &'a TimeGrid,
    exact: &'a [ExactSolution; 2],
    l2: [f64; 2],
    grad_err_sq: [f64; 2],
    grad_ref_sq: [f64; 2],
    e0: [f64; 2],
    failure: Option<Error>,
}

impl<'a> ErrorAccumulator<'a> {
    pub fn new(
        gd: &'a GradientDiscretisation,
        grid: &'a TimeGrid,
        exact: &'a [ExactSolution; 2],
    ) -> Self {
        ErrorAccumulator {
            gd,
            grid,
            exact,
            l2: [0.0; 2],
            grad_err_sq: [0.0; 2],
            grad_ref_sq: [0.0; 2],
            e0: [0.0; 2],
            failure: None,
        }
    }

    /// Adds time level `n`.
    pub fn observe(&mut self, n: usize, u: &DiscreteField, v: &DiscreteField) {
        let t = self.grid.time(n);
        for (c, w) in [u, v].into_iter().enumerate() {
            let ex = &self.exact[c];
            let sampled = self.gd.sample_cells(|p| (ex.value)(p, t));
            let pi = self.gd.reconstruct(&w.0);
            let diff: Vec<f64> = sampled.iter().zip(&pi).map(|(a, b)| a - b).collect();
            let denom = self.gd.l2_norm(&sampled);
            if denom == 0.0 {
                self.failure.get_or_insert(Error::Normalization(format!(
                    "exact solution component {} has zero norm at t = {t}",
                    c + 1
                )));
                continue;
            }
            self.l2[c] = self.l2[c].max(self.gd.l2_norm(&diff) / denom);
            if n == 0 {
                self.e0[c] = self
                    .gd
                    .reconstruction_error_fine(&w.0, |p| (ex.value)(p, 0.0));
            } else {
                let dt = self.grid.step(n - 1);
                let err = self.gd.grad_error(&w.0, |p| (ex.gradient)(p, t));
                let zero = vec![0.0; w.len()];
                let reference = self.gd.grad_error(&zero, |p| (ex.gradient)(p, t));
                self.grad_err_sq[c] += dt * err * err;
                self.grad_ref_sq[c] += dt * reference * reference;
            }
        }
    }

    pub fn finish(self) -> Result<ErrorNorms> {
        if let Some(e) = self.failure {
            return Err(e);
        }
        let mut grad = [0.0; 2];
        for (c, g) in grad.iter_mut().enumerate() {
            *g = if self.grid.n_steps() == 0 {
                0.0
            } else if self.grad_ref_sq[c] == 0.0 {
                return Err(Error::Normalization(format!(
                    "exact gradient of component {} vanishes on the whole grid",
                    c + 1
                )));
            } else {
                (self.grad_err_sq[c] / self.grad_ref_sq[c]).sqrt()
            };
        }
        Ok(ErrorNorms {
            err_u: self.l2[0],
            err_v: self.l2[1],
            err_gu: grad[0],
            err_gv: grad[1],
            e0_u: self.e0[0],
            e0_v: self.e0[1],
        })
    }
}

/// Error norms of a stored solution.
pub fn error_norms(
    gd: &GradientDiscretisation,
    solution: &SpaceTimeSolution,
    exact: &[ExactSolution; 2],
) -> Result<ErrorNorms> {
    if solution.u.len() != solution.grid.n_steps() + 1 || solution.v.len() != solution.u.len() {
        return Err(Error::Validation(
            "solution does not cover every time level".into(),
        ));
    }
    let mut acc = ErrorAccumulator::new(gd, &solution.grid, exact);
    for (n, (u, v)) in solution.u.iter().zip(&solution.v).enumerate() {
        acc.observe(n, u, v);
    }
    acc.finish()
}

/// Observed order between consecutive levels; log₂ when h exactly halves.
pub fn observed_rate(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    let ratio = h_coarse / h_fine;
    if (ratio - 2.0).abs() <= 1e-12 {
        (e_coarse / e_fine).log2()
    } else {
        (e_coarse / e_fine).ln() / ratio.ln()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DtScaling {
    /// δt ∝ h
    Linear,
    /// δt ∝ h²
    Quadratic,
}

impl DtScaling {
    pub fn power(self) -> i32 {
        match self {
            DtScaling::Linear => 1,
            DtScaling::Quadratic => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DtScaling::Linear => "linear",
            DtScaling::Quadratic => "quadratic",
        }
    }
}

impl fmt::Display for DtScaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DtScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(DtScaling::Linear),
            "quadratic" => Ok(DtScaling::Quadratic),
            other => Err(Error::Domain(format!(
                "unknown dt scaling `{other}` (expected linear or quadratic)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceConfig {
    pub dt_scaling: DtScaling,
    /// Steps on the coarsest level; by default ⌈T / h₀^p⌉.
    pub steps0: Option<usize>,
    pub stab: f64,
    pub picard: PicardConfig,
    /// Run levels on separate threads.
    pub parallel: bool,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            dt_scaling: DtScaling::Quadratic,
            steps0: None,
            stab: 1.0,
            picard: PicardConfig::default(),
            parallel: true,
        }
    }
}

impl ConvergenceConfig {
    /// Steps at `level` given the coarsest mesh size: N₀ · 2^{pℓ}.
    pub fn steps_at(&self, level: u32, final_time: f64, h0: f64) -> usize {
        let p = self.dt_scaling.power();
        let n0 = self
            .steps0
            .unwrap_or_else(|| (final_time / h0.powi(p) - 1e-9).ceil().max(1.0) as usize);
        n0 << (p as u32 * level)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h: f64,
    pub n_dofs: usize,
    pub n_steps: usize,
    pub errors: ErrorNorms,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub problem: String,
    pub scheme: SchemeKind,
    pub family: MeshFamily,
    pub dt_scaling: DtScaling,
    /// Ordered by decreasing h.
    pub rows: Vec<ConvergenceRow>,
    /// Picard statistics per level.
    pub logs: Vec<Vec<StepLog>>,
}

impl ConvergenceReport {
    /// Rates of (err_u, err_v, err_gu, err_gv) between rows i and i+1.
    pub fn rates(&self) -> Vec<[f64; 4]> {
        self.rows
            .windows(2)
            .map(|w| {
                let (a, b) = (&w[0], &w[1]);
                let r = |x: f64, y: f64| observed_rate(x, y, a.h, b.h);
                [
                    r(a.errors.err_u, b.errors.err_u),
                    r(a.errors.err_v, b.errors.err_v),
                    r(a.errors.err_gu, b.errors.err_gu),
                    r(a.errors.err_gv, b.errors.err_gv),
                ]
            })
            .collect()
    }
}

/// Marches `problem` on levels 0..levels of `family` and measures errors.
pub fn run_convergence(
    problem: &ProblemSpec,
    scheme: SchemeKind,
    family: MeshFamily,
    levels: u32,
    cfg: &ConvergenceConfig,
) -> Result<ConvergenceReport> {
    if levels < 2 {
        return Err(Error::Validation(format!(
            "a refinement study needs at least 2 levels, got {levels}"
        )));
    }
    let exact = problem.exact.as_ref().ok_or_else(|| {
        Error::Validation(format!("problem `{}` has no exact solution", problem.name))
    })?;
    cfg.picard.validate()?;
    let meshes: Vec<Arc<Mesh>> = (0..levels)
        .map(|l| Arc::new(generate_family(family, l)))
        .collect();
    let h0 = meshes[0].h_max();

    let run_level = |level: u32| -> Result<(ConvergenceRow, Vec<StepLog>)> {
        let mesh = meshes[level as usize].clone();
        let h = mesh.h_max();
        let gd = build_discretisation(scheme, mesh, cfg.stab)?;
        let n_steps = cfg.steps_at(level, problem.final_time, h0);
        let grid = TimeGrid::uniform(problem.final_time, n_steps)?;
        let mut acc = ErrorAccumulator::new(&gd, &grid, exact);
        let log = march_with(&gd, problem, &grid, cfg.picard, |n, u, v| {
            acc.observe(n, u, v)
        })?;
        let errors = acc.finish()?;
        Ok((
            ConvergenceRow {
                level,
                h,
                n_dofs: gd.n_dofs(),
                n_steps,
                errors,
            },
            log,
        ))
    };
    let wrap = |level: u32, r: Result<(ConvergenceRow, Vec<StepLog>)>| {
        r.map_err(|e| Error::AtRefinement {
            level: level as usize,
            source: Box::new(e),
        })
    };

    let results: Vec<Result<(ConvergenceRow, Vec<StepLog>)>> = if cfg.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..levels)
                .map(|l| {
                    let run_level = &run_level;
                    s.spawn(move || run_level(l))
                })
                .collect();
            handles
                .into_iter()
                .zip(0..levels)
                .map(|(h, l)| wrap(l, h.join().expect("refinement level panicked")))
                .collect()
        })
    } else {
        (0..levels).map(|l| wrap(l, run_level(l))).collect()
    };

    let mut rows = Vec::with_capacity(levels as usize);
    let mut logs = Vec::with_capacity(levels as usize);
    for r in results {
        let (row, log) = r?;
        rows.push(row);
        logs.push(log);
    }
    Ok(ConvergenceReport {
        problem: problem.name.clone(),
        scheme,
        family,
        dt_scaling: cfg.dt_scaling,
        rows,
        logs,
    })
}
