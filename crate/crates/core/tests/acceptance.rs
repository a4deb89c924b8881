//! Acceptance criteria 1-7. Each prints one PASS/FAIL line; the test fails
//! if any criterion fails.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdgdm_core::gd::{affine_vector_probes, compute_sd, compute_wd, estimate_cd, scalar_probes};
use rdgdm_core::harness::{
    build_discretisation, run_convergence, write_report_csv, ConvergenceConfig, ConvergenceReport,
    DtScaling,
};
use rdgdm_core::hmm::{build_hmm, build_p1};
use rdgdm_core::mesh::Mesh;
use rdgdm_core::problems::{anis_mms, heat_sanity, ProblemSpec, TensorField};
use rdgdm_core::solver::{contraction_factor, march, TimeStepper};
use rdgdm_core::{generate_family, Error, MeshFamily, PicardConfig, SchemeKind, TimeGrid};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn errors_of(report: &ConvergenceReport) -> Vec<[f64; 4]> {
    report
        .rows
        .iter()
        .map(|r| {
            [
                r.errors.err_u,
                r.errors.err_v,
                r.errors.err_gu,
                r.errors.err_gv,
            ]
        })
        .collect()
}

fn csv_of(report: &ConvergenceReport) -> Vec<u8> {
    let mut buf = Vec::new();
    write_report_csv(&mut buf, report).unwrap();
    buf
}

/// Published errors (err_u, err_v, err_gu, err_gv) per level.
const REFERENCE: [[f64; 4]; 4] = [
    [0.004738288, 0.005458805, 0.069660264, 0.076321506],
    [0.0013162825, 0.001343458, 0.035359614, 0.035358391],
    [0.0004082468, 0.000356627, 0.0176641949, 0.0176643386],
    [0.0001064975, 0.000105361, 0.0088303991, 0.008830754],
];

fn criterion_1() -> Outcome {
    let cfg = ConvergenceConfig::default();
    let report = run_convergence(
        &anis_mms(),
        SchemeKind::Hmm,
        MeshFamily::Triangular,
        4,
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    let rates = report.rates();
    let mut problems = Vec::new();
    for (i, r) in rates.iter().enumerate() {
        if !(r[0] >= 1.6 && r[1] >= 1.6) {
            problems.push(format!("L2 rates {:.3}/{:.3} at step {i}", r[0], r[1]));
        }
        if !(0.85..=1.15).contains(&r[2]) || !(0.85..=1.15).contains(&r[3]) {
            problems.push(format!(
                "gradient rates {:.3}/{:.3} at step {i}",
                r[2], r[3]
            ));
        }
    }
    for (l, (got, want)) in errors_of(&report).iter().zip(REFERENCE).enumerate() {
        for j in 0..4 {
            let q = got[j] / want[j];
            if !(0.2..=5.0).contains(&q) {
                problems.push(format!("level {l} error {j} off by {q:.2}x"));
            }
        }
    }
    let summary = format!(
        "rates u {:.2?} v {:.2?} gu {:.2?} gv {:.2?}",
        rates.iter().map(|r| r[0]).collect::<Vec<_>>(),
        rates.iter().map(|r| r[1]).collect::<Vec<_>>(),
        rates.iter().map(|r| r[2]).collect::<Vec<_>>(),
        rates.iter().map(|r| r[3]).collect::<Vec<_>>(),
    );
    ensure(
        problems.is_empty(),
        format!("{summary} {}", problems.join("; ")),
    )
}

fn hexagonal_report(parallel: bool) -> Result<ConvergenceReport, Error> {
    let cfg = ConvergenceConfig {
        parallel,
        ..ConvergenceConfig::default()
    };
    run_convergence(&anis_mms(), SchemeKind::Hmm, MeshFamily::Hexagonal, 3, &cfg)
}

fn criterion_2(report: &ConvergenceReport) -> Outcome {
    let errs = errors_of(report);
    let decreasing = errs.windows(2).all(|w| (0..4).all(|j| w[1][j] < w[0][j]));
    let rates = report.rates();
    let slopes_ok = rates.iter().all(|r| r[2] >= 0.9 && r[3] >= 0.9);
    ensure(
        decreasing && slopes_ok,
        format!(
            "strictly decreasing: {decreasing}, gradient slopes {:.3?}",
            rates.iter().map(|r| [r[2], r[3]]).collect::<Vec<_>>()
        ),
    )
}

fn criterion_3() -> Outcome {
    let cfg = ConvergenceConfig {
        dt_scaling: DtScaling::Linear,
        ..ConvergenceConfig::default()
    };
    let report = run_convergence(
        &anis_mms(),
        SchemeKind::Hmm,
        MeshFamily::Triangular,
        4,
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    let consts: Vec<f64> = report
        .rows
        .iter()
        .map(|r| (r.errors.err_u + r.errors.err_v + r.errors.err_gu + r.errors.err_gv) / r.h)
        .collect();
    let spread = consts.iter().copied().fold(0.0, f64::max)
        / consts.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(
        spread <= 2.0,
        format!("sum/h = {consts:.3?}, spread {spread:.3}"),
    )
}

fn criterion_4() -> Outcome {
    let gd = build_hmm(Arc::new(generate_family(MeshFamily::Cartesian, 0)), 1.0)
        .map_err(|e| e.to_string())?;
    let problem = anis_mms().with_clamped_reactions();
    let c_d = estimate_cd(&gd).map_err(|e| e.to_string())?;
    let mut stepper =
        TimeStepper::new(&gd, &problem, PicardConfig::default()).map_err(|e| e.to_string())?;
    let bound = stepper.max_stable_dt().map_err(|e| e.to_string())?;
    let dt = 0.5 * bound;
    let factor = contraction_factor(dt, problem.lipschitz, c_d, problem.lambda_min());
    let (u0, v0) = stepper.initial_state();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut pair = || {
            let mut f = |base: &rdgdm_core::DiscreteField| {
                let mut w = base.clone();
                for &i in gd.interior_dofs() {
                    w.0[i] += rng.gen_range(-1.0..1.0);
                }
                w
            };
            (f(&u0), f(&v0))
        };
        let (w, z) = (pair(), pair());
        let gw = stepper
            .picard_step((&u0, &v0), (&w.0, &w.1), dt, dt)
            .map_err(|e| e.to_string())?;
        let gz = stepper
            .picard_step((&u0, &v0), (&z.0, &z.1), dt, dt)
            .map_err(|e| e.to_string())?;
        let num = stepper.product_norm((&gw.0.sub(&gz.0).0, &gw.1.sub(&gz.1).0));
        let den = stepper.product_norm((&w.0.sub(&z.0).0, &w.1.sub(&z.1).0));
        worst = worst.max(num / den);
    }
    let guarded = PicardConfig {
        contraction_guard: true,
        ..PicardConfig::default()
    };
    let mut guarded = TimeStepper::new(&gd, &problem, guarded).map_err(|e| e.to_string())?;
    let refused = matches!(
        guarded.solve_step((&u0, &v0), 1.5 * bound, 1.5 * bound),
        Err(Error::StepSize { .. })
    );
    ensure(
        worst <= factor + 1e-6 && refused,
        format!("C_D {c_d:.4}, bound {bound:.4e}, worst ratio {worst:.4} vs factor {factor:.4}, guard refused: {refused}"),
    )
}

fn single_cell_recurrence() -> Result<f64, String> {
    let mesh = Mesh::new(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![vec![0, 1, 2, 3]],
    )
    .map_err(|e| e.to_string())?;
    let gd = build_hmm(Arc::new(mesh), 1.0).map_err(|e| e.to_string())?;
    let identity: TensorField = Arc::new(|_| [[1.0, 0.0], [0.0, 1.0]]);
    let problem = ProblemSpec {
        name: "single-cell".into(),
        lambda: [identity.clone(), identity],
        lambda_bounds: [(1.0, 1.0), (1.0, 1.0)],
        reactions: [Arc::new(|u, _| -u), Arc::new(|_, v| -v)],
        lipschitz: 1.0,
        clamp_box: f64::INFINITY,
        clamp_reactions: false,
        initial: [Arc::new(|_| 1.0), Arc::new(|_| 1.0)],
        exact: None,
        sources: None,
        dirichlet: [Arc::new(|_, _| 0.0), Arc::new(|_, _| 0.0)],
        final_time: 1.0,
    };
    // One cell DOF: ‖∇_D w‖² = 8 w² for this cell, |K| = 1.
    let k = gd.stiffness_matrix(|_| [[1.0, 0.0], [0.0, 1.0]]).get(0, 0);
    let cfg = PicardConfig {
        tol: 1e-14,
        ..PicardConfig::default()
    };
    let sol = march(&gd, &problem, &TimeGrid::uniform(1.0, 64).unwrap(), cfg)
        .map_err(|e| e.to_string())?;
    let dt = 1.0 / 64.0;
    let mut u = 1.0;
    let mut worst: f64 = 0.0;
    for n in 1..=64 {
        u /= 1.0 + dt * (1.0 + k);
        worst = worst
            .max((sol.u[n].0[0] - u).abs())
            .max((sol.v[n].0[0] - u).abs());
    }
    Ok(worst)
}

fn criterion_5() -> Outcome {
    let worst = single_cell_recurrence()?;
    let gd = build_hmm(Arc::new(generate_family(MeshFamily::Cartesian, 2)), 1.0)
        .map_err(|e| e.to_string())?;
    let t = 0.05;
    let sol = march(
        &gd,
        &heat_sanity(),
        &TimeGrid::uniform(t, 64).unwrap(),
        PicardConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let ratio = gd.pi_norm(&sol.u[64].0) / gd.pi_norm(&sol.u[0].0);
    let expect = (-2.0 * std::f64::consts::PI.powi(2) * t).exp();
    let rel = (ratio / expect - 1.0).abs();
    ensure(
        worst <= 1e-12 && rel <= 0.1,
        format!(
            "recurrence error {worst:.2e}, heat decay {ratio:.5} vs {expect:.5} ({:.2}%)",
            100.0 * rel
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_poincare: f64 = 0.0;
    for (scheme, family) in [
        (SchemeKind::Hmm, MeshFamily::Hexagonal),
        (SchemeKind::P1, MeshFamily::Triangular),
    ] {
        let gd = build_discretisation(scheme, Arc::new(generate_family(family, 1)), 1.0)
            .map_err(|e| e.to_string())?;
        let c_d = estimate_cd(&gd).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let x: Vec<f64> = (0..gd.interior_dofs().len())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let w = gd.extend_interior(&x);
            worst_poincare = worst_poincare.max(gd.pi_norm(&w.0) / (c_d * gd.grad_norm(&w.0)));
        }
    }
    ok &= worst_poincare <= 1.0 + 1e-8;
    notes.push(format!("max ‖Πw‖/(C_D‖∇w‖) {worst_poincare:.4}"));

    let mut worst_wd: f64 = 0.0;
    for level in 0..2 {
        let gd = build_p1(Arc::new(generate_family(MeshFamily::Triangular, level)))
            .map_err(|e| e.to_string())?;
        for probe in affine_vector_probes() {
            worst_wd = worst_wd.max(
                compute_wd(&gd, &*probe.field, &*probe.divergence).map_err(|e| e.to_string())?,
            );
        }
    }
    ok &= worst_wd <= 1e-12;
    notes.push(format!("P1 W_D max {worst_wd:.2e}"));

    let mut worst_affine: f64 = 0.0;
    for family in MeshFamily::ALL {
        let gd = build_hmm(Arc::new(generate_family(family, 1)), 1.0).map_err(|e| e.to_string())?;
        let w = gd.interpolate(|p| 0.3 - 1.7 * p[0] + 2.2 * p[1]);
        worst_affine = worst_affine.max(gd.grad_error(&w.0, |_| [-1.7, 2.2]));
    }
    ok &= worst_affine <= 1e-12;
    notes.push(format!("HMM affine error {worst_affine:.2e}"));

    let probe = &scalar_probes()[0];
    let mut sd = Vec::new();
    for level in 0..4 {
        let gd = build_hmm(Arc::new(generate_family(MeshFamily::Cartesian, level)), 1.0)
            .map_err(|e| e.to_string())?;
        sd.push(
            compute_sd(&gd, &*probe.value, &*probe.gradient)
                .map_err(|e| e.to_string())?
                .value(),
        );
    }
    let ratios: Vec<f64> = sd.windows(2).map(|w| w[1] / w[0]).collect();
    ok &= ratios.iter().all(|r| (0.3..=0.7).contains(r));
    notes.push(format!("S_D ratios {ratios:.3?}"));

    ensure(ok, notes.join(", "))
}

fn criterion_7(first: &ConvergenceReport) -> Outcome {
    let again = hexagonal_report(true).map_err(|e| e.to_string())?;
    let sequential = hexagonal_report(false).map_err(|e| e.to_string())?;
    let a = csv_of(first);
    let same = a == csv_of(&again) && a == csv_of(&sequential);
    ensure(
        same,
        format!("{} bytes, identical across 3 runs: {same}", a.len()),
    )
}

fn main() {
    let hex = hexagonal_report(true);
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "triangular rates and magnitudes", criterion_1()),
        (
            2,
            "hexagonal monotone decay",
            hex.as_ref()
                .map_err(|e| e.to_string())
                .and_then(criterion_2),
        ),
        (3, "first-order error bound", criterion_3()),
        (4, "Picard contraction and guard", criterion_4()),
        (5, "oracle equivalence", criterion_5()),
        (6, "indicator suite", criterion_6()),
        (
            7,
            "determinism",
            hex.as_ref()
                .map_err(|e| e.to_string())
                .and_then(criterion_7),
        ),
    ];
    let mut failed = Vec::new();
    for (n, name, outcome) in &results {
        match outcome {
            Ok(msg) => println!("criterion {n} ({name}): PASS {msg}"),
            Err(msg) => {
                println!("criterion {n} ({name}): FAIL {msg}");
                failed.push(*n);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
