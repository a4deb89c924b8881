use std::sync::Arc;

use super::*;
use crate::hmm::{build_hmm, build_p1};
use crate::mesh::{generate_family, Mesh, MeshFamily};
use crate::problems::{anis_mms, heat_sanity, ProblemSpec, TensorField};

/// Λ = I, F₁ = −a u, F₂ = −a v, zero Dirichlet data, initial data `init`.
fn linear_decay(a: f64, init: f64) -> ProblemSpec {
    let identity: TensorField = Arc::new(|_| [[1.0, 0.0], [0.0, 1.0]]);
    ProblemSpec {
        name: "linear-decay".into(),
        lambda: [identity.clone(), identity],
        lambda_bounds: [(1.0, 1.0), (1.0, 1.0)],
        reactions: [Arc::new(move |u, _| -a * u), Arc::new(move |_, v| -a * v)],
        lipschitz: a,
        clamp_box: f64::INFINITY,
        clamp_reactions: false,
        initial: [Arc::new(move |_| init), Arc::new(move |_| init)],
        exact: None,
        sources: None,
        dirichlet: [Arc::new(|_, _| 0.0), Arc::new(|_, _| 0.0)],
        final_time: 1.0,
    }
}

fn unit_square_cell() -> Arc<Mesh> {
    Arc::new(
        Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![vec![0, 1, 2, 3]],
        )
        .unwrap(),
    )
}

fn tight() -> PicardConfig {
    PicardConfig {
        tol: 1e-14,
        ..PicardConfig::default()
    }
}

#[test]
fn stable_step_formula() {
    let dt = max_stable_dt(2.0, 0.5, 1.0, 3.0).unwrap();
    assert!((dt - 2.0 / (4.0 * 0.25 * 4.0)).abs() < 1e-15);
    assert_eq!(max_stable_dt(0.0, 0.5, 1.0, 1.0).unwrap(), f64::INFINITY);
    assert!(max_stable_dt(1.0, 0.0, 1.0, 1.0).is_err());
    assert!(max_stable_dt(1.0, 1.0, -1.0, 1.0).is_err());
    assert!(max_stable_dt(-1.0, 1.0, 1.0, 1.0).is_err());
    // At the bound the factor is 2 / (λ̲₁ + λ̲₂).
    let q = contraction_factor(dt, 2.0, 0.5, [1.0, 3.0]);
    assert!((q - 0.5).abs() < 1e-14);
}

#[test]
fn single_cell_recurrence() {
    // One interior DOF (the cell), boundary faces pinned to zero. With HMM
    // ‖∇w‖² = 8 for a unit cell value, each step is u ← u / (1 + δt (a + 8)).
    let gd = build_hmm(unit_square_cell(), 1.0).unwrap();
    let a = 1.0;
    let problem = linear_decay(a, 1.0);
    let n = 64;
    let grid = TimeGrid::uniform(1.0, n).unwrap();
    let sol = march(&gd, &problem, &grid, tight()).unwrap();
    let dt = 1.0 / n as f64;
    let mut expect = 1.0;
    for step in 1..=n {
        expect /= 1.0 + dt * (a + 8.0);
        assert!((sol.u[step].0[0] - expect).abs() < 1e-12, "step {step}");
        assert!((sol.v[step].0[0] - expect).abs() < 1e-12, "step {step}");
    }
}

#[test]
fn zero_data_stays_zero() {
    let gd = build_hmm(Arc::new(generate_family(MeshFamily::Cartesian, 0)), 1.0).unwrap();
    let sol = march(
        &gd,
        &linear_decay(1.0, 0.0),
        &TimeGrid::uniform(0.5, 5).unwrap(),
        tight(),
    )
    .unwrap();
    for (u, v) in sol.u.iter().zip(&sol.v) {
        assert!(u.0.iter().chain(&v.0).all(|&x| x == 0.0));
    }
    assert!(sol.log.iter().all(|l| l.picard_iters == 1));
}

#[test]
fn zero_reaction_needs_one_effective_iteration() {
    let gd = build_hmm(Arc::new(generate_family(MeshFamily::Cartesian, 0)), 1.0).unwrap();
    let problem = heat_sanity();
    let mut stepper = TimeStepper::new(&gd, &problem, PicardConfig::default()).unwrap();
    let (u0, v0) = stepper.initial_state();
    let out = stepper.solve_step((&u0, &v0), 0.01, 0.01).unwrap();
    assert_eq!(out.iterations, 2);
    assert!(out.increment <= 1e-14);
}

#[test]
fn assembled_system_matches_picard_map() {
    let gd = build_hmm(Arc::new(generate_family(MeshFamily::Cartesian, 0)), 1.0).unwrap();
    let problem = anis_mms().with_clamped_reactions();
    let mut stepper = TimeStepper::new(&gd, &problem, tight()).unwrap();
    let (u0, v0) = stepper.initial_state();
    let (dt, t1) = (0.01, 0.01);
    let (u1, v1) = stepper.picard_step((&u0, &v0), (&u0, &v0), dt, t1).unwrap();
    for (which, field) in [(0, &u1), (1, &v1)] {
        let prev = if which == 0 { &u0 } else { &v0 };
        let sys =
            assemble_linear_step(stepper.operators(), which, prev, (&u0, &v0), dt, t1).unwrap();
        assert!(sys.matrix.asymmetry() < 1e-12);
        let x = gd.restrict_interior(&field.0);
        let ax = sys.matrix.mul_vec(&x);
        let scale = sys.rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        for (a, b) in ax.iter().zip(&sys.rhs) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
    }
    assert!(assemble_linear_step(stepper.operators(), 0, &u0, (&u0, &v0), 0.0, t1).is_err());
}

#[test]
fn boundary_dofs_carry_dirichlet_data() {
    let gd = build_p1(Arc::new(generate_family(MeshFamily::Triangular, 0))).unwrap();
    let problem = anis_mms().with_clamped_reactions();
    let sol = march(
        &gd,
        &problem,
        &TimeGrid::uniform(0.1, 2).unwrap(),
        PicardConfig::default(),
    )
    .unwrap();
    let exact = problem.exact.as_ref().unwrap();
    let pts = gd.dof_points();
    for (n, u) in sol.u.iter().enumerate() {
        let t = sol.grid.time(n);
        for &i in gd.boundary_dofs() {
            assert_eq!(u.0[i], (exact[0].value)(pts[i], t));
        }
    }
}

#[test]
fn guard_refuses_large_steps() {
    let gd = build_hmm(Arc::new(generate_family(MeshFamily::Cartesian, 0)), 1.0).unwrap();
    let problem = anis_mms().with_clamped_reactions();
    let cfg = PicardConfig {
        contraction_guard: true,
        ..PicardConfig::default()
    };
    let mut stepper = TimeStepper::new(&gd, &problem, cfg).unwrap();
    let bound = stepper.max_stable_dt().unwrap();
    let (u0, v0) = stepper.initial_state();
    match stepper.solve_step((&u0, &v0), 2.0 * bound, 2.0 * bound) {
        Err(Error::StepSize { dt, bound: b }) => {
            assert_eq!(dt, 2.0 * bound);
            assert_eq!(b, bound);
        }
        other => panic!("expected a step size error, got {other:?}"),
    }
    assert!(stepper
        .solve_step((&u0, &v0), 0.5 * bound, 0.5 * bound)
        .is_ok());
}

#[test]
fn nonconvergence_is_reported() {
    let gd = build_hmm(Arc::new(generate_family(MeshFamily::Cartesian, 0)), 1.0).unwrap();
    let problem = anis_mms().with_clamped_reactions();
    let cfg = PicardConfig {
        tol: 1e-14,
        max_iter: 2,
        ..PicardConfig::default()
    };
    let err = march(&gd, &problem, &TimeGrid::uniform(0.1, 1).unwrap(), cfg).unwrap_err();
    assert!(err.is_nonconvergence());
    assert!(matches!(err, Error::AtTimeLevel { level: 1, .. }));
}

#[test]
fn direct_and_cg_agree() {
    let gd = build_hmm(Arc::new(generate_family(MeshFamily::Hexagonal, 0)), 1.0).unwrap();
    let problem = anis_mms().with_clamped_reactions();
    let grid = TimeGrid::uniform(0.1, 4).unwrap();
    let direct = march(&gd, &problem, &grid, PicardConfig::default()).unwrap();
    let cg = march(
        &gd,
        &problem,
        &grid,
        PicardConfig {
            linear_solver: LinearSolverKind::cg(1e-13),
            ..PicardConfig::default()
        },
    )
    .unwrap();
    let last = grid.n_steps();
    let diff = gd.grad_norm(&direct.u[last].sub(&cg.u[last]).0);
    assert!(
        diff <= 1e-9 * gd.grad_norm(&direct.u[last].0),
        "diff {diff}"
    );
}

#[test]
fn zero_step_grid_returns_initial_state() {
    let gd = build_hmm(unit_square_cell(), 1.0).unwrap();
    let sol = march(
        &gd,
        &linear_decay(1.0, 2.0),
        &TimeGrid::uniform(0.0, 0).unwrap(),
        tight(),
    )
    .unwrap();
    assert_eq!(sol.u.len(), 1);
    assert_eq!(sol.u[0].0[0], 2.0);
    assert!(sol.log.is_empty());
}

#[test]
fn snapshot_and_log_csv() {
    let gd = build_hmm(unit_square_cell(), 1.0).unwrap();
    let sol = march(
        &gd,
        &linear_decay(1.0, 1.0),
        &TimeGrid::uniform(1.0, 2).unwrap(),
        tight(),
    )
    .unwrap();
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &gd, &sol.u[2], &sol.v[2]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("cell,x,y,u,v"));
    assert!(lines
        .next()
        .unwrap()
        .starts_with("0,5.0000000000000000e-1,5.0000000000000000e-1,"));
    let mut buf = Vec::new();
    let entries: Vec<_> = sol.log.iter().map(|l| (3, *l)).collect();
    write_solver_log(&mut buf, &entries).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("level,step,picard_iters,residual\n3,1,"));
}
