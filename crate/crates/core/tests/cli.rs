use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rsot::geometry::{atomize, geodesic, DensityField, QuadratureSpec, SimplicialMesh};
use rsot::measures::{load_point_cloud, write_point_cloud, write_source};
use tempfile::TempDir;

fn rsot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsot")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture_1d(dir: &Path) -> (PathBuf, PathBuf) {
    let n = 1024;
    let src = dir.join("source.csv");
    let pts: Vec<_> = (0..n).map(|i| [(i as f64 + 0.5) / n as f64, 0.0, 0.0]).collect();
    write_point_cloud(&src, 1, &pts, &vec![1.0 / n as f64; n]).unwrap();
    let tgt = dir.join("target.csv");
    fs::write(&tgt, "x,weight\n0.2,0.25\n0.8,0.75\n").unwrap();
    (src, tgt)
}

fn read_potential(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn solve_1d_fixture() {
    let d = TempDir::new().unwrap();
    let (src, tgt) = fixture_1d(d.path());
    let out = d.path().join("out");
    let o = rsot(&["solve", "--source", s(&src), "--target", s(&tgt), "--epsilon", "1e-3", "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let psi = read_potential(&out.join("potential.csv"));
    assert!((psi[1] - psi[0] - 0.15).abs() <= 5e-3, "{psi:?}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let mut keys: Vec<_> = report.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(
        keys,
        ["converged", "cutoff_history", "epsilon_stages", "evaluations", "grad_l1", "iterations_per_level", "wall_ms"]
    );
    assert_eq!(report["converged"], true);
}

#[test]
fn solve_not_converged_and_missing_file() {
    let d = TempDir::new().unwrap();
    let (src, tgt) = fixture_1d(d.path());
    let out = d.path().join("out");
    let o = rsot(&["solve", "--source", s(&src), "--target", s(&tgt), "--max-iter", "0", "-o", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(out.join("report.json").exists());
    let o = rsot(&["solve", "--source", s(&src), "--target", s(&d.path().join("nope.csv")), "-o", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));
}

#[test]
fn config_file_precedence_and_unknown_keys() {
    let d = TempDir::new().unwrap();
    let (src, tgt) = fixture_1d(d.path());
    let out = d.path().join("out");
    let cfg = d.path().join("run.cfg");
    fs::write(&cfg, format!("source = {}\ntarget = {}\nmax_iter = 0\n", s(&src), s(&tgt))).unwrap();
    assert_eq!(code(&rsot(&["solve", "-c", s(&cfg), "-o", s(&out)])), 2);
    assert_eq!(code(&rsot(&["solve", "-c", s(&cfg), "--set", "max_iter=100", "-o", s(&out)])), 0);
    assert_eq!(code(&rsot(&["solve", "-c", s(&cfg), "--set", "max_iter=0", "--max-iter", "100", "-o", s(&out)])), 0);
    assert_eq!(code(&rsot(&["solve", "-c", s(&cfg), "--set", "bogus=1", "-o", s(&out)])), 1);
    fs::write(&cfg, "epsilom = 0.1\n").unwrap();
    assert_eq!(code(&rsot(&["solve", "-c", s(&cfg), "-o", s(&out)])), 1);
}

#[test]
fn hierarchy_levels_and_determinism() {
    let d = TempDir::new().unwrap();
    let input = d.path().join("cloud.csv");
    let pts: Vec<_> = (0..64).map(|i| [(i % 8) as f64 / 7.0, (i / 8) as f64 / 7.0, 0.0]).collect();
    write_point_cloud(&input, 2, &pts, &vec![1.0 / 64.0; 64]).unwrap();
    let a = d.path().join("a");
    let b = d.path().join("b");
    for dir in [&a, &b] {
        let o = rsot(&["hierarchy", "--input", s(&input), "--sizes", "4,16,64", "--seed", "5", "-o", s(dir)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest = fs::read_to_string(a.join("levels.txt")).unwrap();
    let files: Vec<&str> = manifest.lines().collect();
    assert_eq!(files.len(), 3);
    let sizes: Vec<usize> = files.iter().map(|f| load_point_cloud(a.join(f)).unwrap().points.len()).collect();
    assert_eq!(sizes, [4, 16, 64]);
    for f in files {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let o = rsot(&["hierarchy", "--input", s(&input), "--sizes", "100", "-o", s(&a)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn register_single_target() {
    let d = TempDir::new().unwrap();
    let (src, _) = fixture_1d(d.path());
    let tgt = d.path().join("one.csv");
    fs::write(&tgt, "0.3,1.0\n").unwrap();
    let field = d.path().join("field.txt");
    fs::write(&field, "2.0\n".repeat(1024)).unwrap();
    let out = d.path().join("out");
    let o = rsot(&["register", "--source", s(&src), "--target", s(&tgt), "--field", s(&field), "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let map = load_point_cloud(out.join("barycentric_map.csv")).unwrap();
    assert!(map.points.iter().all(|p| (p[0] - 0.3).abs() < 1e-12));
    for a in ["000", "025", "050", "075", "100"] {
        assert!(out.join(format!("interp_{a}.csv")).exists());
    }
    let mean = load_point_cloud(out.join("field_target_mean.csv")).unwrap();
    assert_eq!(mean.weights, vec![2.0]);
}

#[test]
fn barycenter_unit_square_centroid() {
    let d = TempDir::new().unwrap();
    let mesh = SimplicialMesh::unit_square(16).unwrap();
    let atoms = atomize(&mesh, &DensityField::constant(&mesh, 1.0).unwrap(), QuadratureSpec::new(1).unwrap()).unwrap();
    let src = d.path().join("square.csv");
    write_source(&src, &atoms).unwrap();
    let out = d.path().join("out");
    let o = rsot(&["barycenter", "--sources", s(&src), "--n-b", "1", "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let y = load_point_cloud(out.join("barycenter.csv")).unwrap().points[0];
    assert!((y[0] - 0.5).abs() < 1e-3 && (y[1] - 0.5).abs() < 1e-3, "{y:?}");
    assert!(out.join("trace.csv").exists());
}

#[test]
fn bluenoise_two_points() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("out");
    let o = rsot(&["bluenoise", "--n", "2", "--subdivisions", "2", "--seed", "3", "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p = load_point_cloud(out.join("points.csv")).unwrap().points;
    assert!((geodesic(&p[0], &p[1]) - std::f64::consts::PI).abs() < 0.05);
}

#[test]
fn validate_runs_checks() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("out");
    let o = rsot(&["validate", "--instances", "4", "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(out.join("validate.json").exists());
    let dup = d.path().join("dup.csv");
    fs::write(&dup, "0.1,0.5\n0.1,0.5\n").unwrap();
    let o = rsot(&["validate", "--instances", "2", "--target", s(&dup), "-o", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("coincide"));
}

#[test]
fn workers_do_not_change_results() {
    let d = TempDir::new().unwrap();
    let (src, tgt) = fixture_1d(d.path());
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for (w, dir) in [("1", &a), ("3", &b)] {
        let o = rsot(&["solve", "--source", s(&src), "--target", s(&tgt), "--workers", w, "-o", s(dir)]);
        assert_eq!(code(&o), 0);
    }
    let (pa, pb) = (read_potential(&a.join("potential.csv")), read_potential(&b.join("potential.csv")));
    for (x, y) in pa.iter().zip(&pb) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
    }
}
