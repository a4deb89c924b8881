use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rdgdm_core::gd::{affine_vector_probes, diagnose, scalar_probes, write_diagnostics_csv};
use rdgdm_core::harness::{
    build_discretisation, emit_report, run_convergence, ConvergenceConfig, DtScaling,
};
use rdgdm_core::mesh::load_mesh;
use rdgdm_core::solver::{march_with, write_snapshot, write_solver_log, PicardConfig, StepLog};
use rdgdm_core::sparse::LinearSolverKind;
use rdgdm_core::{
    generate_family, Error, Mesh, MeshFamily, ProblemSpec, Result, SchemeKind, TimeGrid,
};

#[derive(Parser)]
#[command(
    name = "rdgdm",
    version,
    about = "Gradient schemes for anisotropic reaction-diffusion systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Refinement study against an exact solution: report.csv, report.svg, solver_log.csv.
    Converge(ConvergeArgs),
    /// C_D, S_D and W_D indicators of one discretisation as CSV.
    Diagnose(DiagnoseArgs),
    /// Single run with snapshot export.
    Solve(SolveArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Hmm,
    P1,
}

impl From<Scheme> for SchemeKind {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Hmm => SchemeKind::Hmm,
            Scheme::P1 => SchemeKind::P1,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Triangular,
    Hexagonal,
    Cartesian,
}

impl From<Family> for MeshFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Triangular => MeshFamily::Triangular,
            Family::Hexagonal => MeshFamily::Hexagonal,
            Family::Cartesian => MeshFamily::Cartesian,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scaling {
    Linear,
    Quadratic,
}

#[derive(Args)]
struct SolverArgs {
    /// Picard tolerance in the product gradient norm.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// HMM stabilisation weight.
    #[arg(long, default_value_t = 1.0)]
    stab: f64,
    /// Clamp reaction arguments to the problem's Lipschitz box.
    #[arg(long)]
    clamp: bool,
    /// Refuse steps above the contraction bound.
    #[arg(long)]
    guard: bool,
    /// Use conjugate gradients with this relative tolerance instead of Cholesky.
    #[arg(long)]
    cg: Option<f64>,
}

impl SolverArgs {
    fn picard(&self) -> PicardConfig {
        PicardConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            contraction_guard: self.guard,
            linear_solver: self
                .cg
                .map_or(LinearSolverKind::Direct, LinearSolverKind::cg),
        }
    }

    fn problem(&self, name: &str) -> Result<ProblemSpec> {
        let p = ProblemSpec::by_name(name)?;
        Ok(if self.clamp {
            p.with_clamped_reactions()
        } else {
            p
        })
    }
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, value_enum, default_value = "hmm")]
    scheme: Scheme,
    #[arg(long, value_enum, default_value = "triangular")]
    family: Family,
    /// Number of refinement levels (at least 2).
    #[arg(long, default_value_t = 4)]
    levels: u32,
    #[arg(long, value_enum, default_value = "quadratic")]
    dt_scaling: Scaling,
    /// Time steps on the coarsest level (default ⌈T / h₀^p⌉).
    #[arg(long)]
    steps0: Option<usize>,
    /// Run levels one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long, value_enum, default_value = "cartesian")]
    family: Family,
    #[arg(long, default_value_t = 0)]
    level: u32,
    /// Read the mesh from a file instead of generating it.
    #[arg(long)]
    mesh: Option<PathBuf>,
}

impl MeshArgs {
    fn build(&self) -> Result<(Arc<Mesh>, String)> {
        match &self.mesh {
            Some(path) => {
                let mesh = load_mesh(path).map_err(|e| match e {
                    Error::Io(io) => Error::Io(io::Error::new(
                        io.kind(),
                        format!("{}: {io}", path.display()),
                    )),
                    other => other,
                })?;
                Ok((Arc::new(mesh), path.display().to_string()))
            }
            None => Ok((
                Arc::new(generate_family(self.family.into(), self.level)),
                MeshFamily::from(self.family).name().to_string(),
            )),
        }
    }
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long, value_enum, default_value = "hmm")]
    scheme: Scheme,
    #[command(flatten)]
    mesh: MeshArgs,
    #[arg(long, default_value_t = 1.0)]
    stab: f64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, value_enum, default_value = "hmm")]
    scheme: Scheme,
    #[command(flatten)]
    mesh: MeshArgs,
    /// Number of time steps.
    #[arg(long, default_value_t = 64)]
    steps: usize,
    /// Final time (defaults to the problem's).
    #[arg(long)]
    final_time: Option<f64>,
    /// Write a snapshot every this many steps (the final level is always written).
    #[arg(long, default_value_t = 0)]
    every: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn converge(args: &ConvergeArgs) -> Result<()> {
    let problem = args.solver.problem(&args.problem)?;
    let cfg = ConvergenceConfig {
        dt_scaling: match args.dt_scaling {
            Scaling::Linear => DtScaling::Linear,
            Scaling::Quadratic => DtScaling::Quadratic,
        },
        steps0: args.steps0,
        stab: args.solver.stab,
        picard: args.solver.picard(),
        parallel: !args.sequential,
    };
    let report = run_convergence(
        &problem,
        args.scheme.into(),
        args.family.into(),
        args.levels,
        &cfg,
    )?;
    let (csv, svg) = emit_report(&report, &args.out)?;
    let entries: Vec<(u32, StepLog)> = report
        .rows
        .iter()
        .zip(&report.logs)
        .flat_map(|(row, log)| log.iter().map(move |e| (row.level, *e)))
        .collect();
    let mut log = create(&args.out.join("solver_log.csv"))?;
    write_solver_log(&mut log, &entries)?;
    log.flush()?;

    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:>6} {:>11} {:>8} {:>6} {:>11} {:>11} {:>11} {:>11}",
        "level", "h", "dofs", "steps", "err_u", "err_v", "err_gu", "err_gv"
    )?;
    for row in &report.rows {
        let e = &row.errors;
        writeln!(
            out,
            "{:>6} {:>11.4e} {:>8} {:>6} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e}",
            row.level, row.h, row.n_dofs, row.n_steps, e.err_u, e.err_v, e.err_gu, e.err_gv
        )?;
    }
    for (i, r) in report.rates().iter().enumerate() {
        writeln!(
            out,
            "rates {}->{}: {:.3} {:.3} {:.3} {:.3}",
            i,
            i + 1,
            r[0],
            r[1],
            r[2],
            r[3]
        )?;
    }
    writeln!(out, "wrote {} and {}", csv.display(), svg.display())?;
    Ok(())
}

fn run_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let (mesh, name) = args.mesh.build()?;
    let gd = build_discretisation(args.scheme.into(), mesh, args.stab)?;
    let diag = diagnose(&gd, &scalar_probes(), &affine_vector_probes())?;
    match &args.out {
        Some(path) => {
            let mut f = create(path)?;
            write_diagnostics_csv(&mut f, &gd, &name, args.mesh.level, &diag)?;
            f.flush()?;
        }
        None => write_diagnostics_csv(io::stdout().lock(), &gd, &name, args.mesh.level, &diag)?,
    }
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<()> {
    let problem = args.solver.problem(&args.problem)?;
    let (mesh, _) = args.mesh.build()?;
    let gd = build_discretisation(args.scheme.into(), mesh, args.solver.stab)?;
    let grid = TimeGrid::uniform(args.final_time.unwrap_or(problem.final_time), args.steps)?;
    std::fs::create_dir_all(&args.out)?;
    let n_steps = grid.n_steps();
    let mut written = Vec::new();
    let mut failure = None;
    let log = march_with(&gd, &problem, &grid, args.solver.picard(), |n, u, v| {
        let due = n == n_steps || (args.every > 0 && n % args.every == 0);
        if !due || failure.is_some() {
            return;
        }
        let path = args.out.join(format!("snapshot_{n:06}.csv"));
        let res = create(&path).and_then(|mut f| {
            write_snapshot(&mut f, &gd, u, v)?;
            f.flush()?;
            Ok(())
        });
        match res {
            Ok(()) => written.push(path),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let entries: Vec<(u32, StepLog)> = log.iter().map(|e| (args.mesh.level, *e)).collect();
    let mut f = create(&args.out.join("solver_log.csv"))?;
    write_solver_log(&mut f, &entries)?;
    f.flush()?;
    let iters: usize = log.iter().map(|e| e.picard_iters).sum();
    println!(
        "{} steps, {} dofs, {} Picard iterations, {} snapshots in {}",
        n_steps,
        gd.n_dofs(),
        iters,
        written.len(),
        args.out.display()
    );
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_nonconvergence() {
        2
    } else if e.is_validation() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Converge(a) => converge(a),
        Command::Diagnose(a) => run_diagnose(a),
        Command::Solve(a) => solve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
