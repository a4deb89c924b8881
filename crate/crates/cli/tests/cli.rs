use std::path::Path;
use std::process::{Command, Output};

fn rdgdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdgdm"))
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn converge_writes_report_plot_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = rdgdm(&[
        "converge",
        "--problem",
        "heat-sanity",
        "--scheme",
        "p1",
        "--family",
        "cartesian",
        "--levels",
        "2",
        "--dt-scaling",
        "quadratic",
        "--stab",
        "1",
        "--tol",
        "1e-10",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("h,err_u,rate_u,err_v,rate_v,err_gu,rate_gu,err_gv,rate_gv,e0_u,e0_v")
    );
    assert_eq!(lines.count(), 2);
    assert!(std::fs::read_to_string(out.join("report.svg"))
        .unwrap()
        .contains("<svg"));
    let log = std::fs::read_to_string(out.join("solver_log.csv")).unwrap();
    assert!(log.starts_with("level,step,picard_iters,residual\n0,1,"));
}

#[test]
fn converge_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            "converge",
            "--problem",
            "anis-mms",
            "--family",
            "hexagonal",
            "--levels",
            "2",
            "--out",
            path(&out),
        ];
        args.extend_from_slice(extra);
        assert!(rdgdm(&args).status.success());
        std::fs::read(out.join("report.csv")).unwrap()
    };
    let a = run("a", &[]);
    assert_eq!(a, run("b", &["--sequential"]));
}

#[test]
fn diagnose_prints_indicator_table() {
    let o = rdgdm(&[
        "diagnose",
        "--scheme",
        "hmm",
        "--family",
        "cartesian",
        "--level",
        "0",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("gd,mesh,level,n_dofs,c_d,probe,s_d,w_d"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.starts_with("hmm,cartesian,0,208,")));
}

#[test]
fn solve_exports_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let o = rdgdm(&[
        "solve",
        "--problem",
        "fhn-demo",
        "--family",
        "triangular",
        "--level",
        "0",
        "--steps",
        "4",
        "--every",
        "2",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for n in [0, 2, 4] {
        let snap =
            std::fs::read_to_string(dir.path().join(format!("snapshot_{n:06}.csv"))).unwrap();
        assert!(snap.starts_with("cell,x,y,u,v\n"));
        assert_eq!(snap.lines().count(), 171);
    }
    assert!(!dir.path().join("snapshot_000001.csv").exists());
}

#[test]
fn solve_accepts_a_mesh_file() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("square.mesh");
    std::fs::write(
        &mesh,
        "vertices 4\n0 0 0\n1 1 0\n2 1 1\n3 0 1\ncells 1\n0 0 1 2 3\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = rdgdm(&[
        "solve",
        "--problem",
        "heat-sanity",
        "--mesh",
        path(&mesh),
        "--steps",
        "2",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let snap = std::fs::read_to_string(out.join("snapshot_000002.csv")).unwrap();
    assert_eq!(snap.lines().count(), 2);
}

#[test]
fn nonconvergence_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = rdgdm(&[
        "solve",
        "--problem",
        "anis-mms",
        "--steps",
        "1",
        "--max-iter",
        "2",
        "--tol",
        "1e-14",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("did not converge"));
}

#[test]
fn validation_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    for args in [
        vec!["solve", "--problem", "unknown", "--out", d],
        vec![
            "converge",
            "--problem",
            "anis-mms",
            "--levels",
            "1",
            "--out",
            d,
        ],
        vec![
            "converge",
            "--problem",
            "fhn-demo",
            "--levels",
            "2",
            "--out",
            d,
        ],
        vec![
            "converge",
            "--problem",
            "anis-mms",
            "--scheme",
            "fem",
            "--out",
            d,
        ],
        vec!["diagnose", "--stab", "0"],
        vec![
            "solve",
            "--problem",
            "anis-mms",
            "--clamp",
            "--guard",
            "--steps",
            "2",
            "--out",
            d,
        ],
    ] {
        let o = rdgdm(&args);
        assert_eq!(
            o.status.code(),
            Some(3),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn malformed_mesh_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("bad.mesh");
    std::fs::write(&mesh, "vertices 2\n0 0 0\n1 x 0\n").unwrap();
    let o = rdgdm(&["diagnose", "--mesh", path(&mesh)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn help_exits_cleanly() {
    let o = rdgdm(&["--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("converge"));
}
