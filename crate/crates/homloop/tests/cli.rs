use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn homloop(args: &[&str], dir: &Path, config: &str, envs: &[(&str, &str)]) -> Output {
    let cfg = dir.join("exp.toml");
    fs::write(&cfg, config).unwrap();
    let mut c = Command::new(env!("CARGO_BIN_EXE_homloop"));
    c.args(args).arg("--config").arg(&cfg).arg("--out").arg(dir.join("out"));
    c.env_remove("HOMLOOP_THREADS");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

const DUFFING: &str = "[system]\nbuiltin = \"duffing\"\n";

#[test]
fn classify_duffing() {
    let tmp = TempDir::new().unwrap();
    let o = homloop(&["classify"], tmp.path(), DUFFING, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&tmp.path().join("out/classify.json"));
    assert_eq!(v["scenario"], "S1");
    assert_eq!(v["f2_ok"], true);
    for k in ["beta", "varpi", "delta", "mu", "mu1", "mu2"] {
        assert!(v["cascade"][k].is_number(), "{k}");
    }
}

#[test]
fn melnikov_damping_column() {
    let tmp = TempDir::new().unwrap();
    let cfg = "[system]\nbuiltin = \"duffing\"\nperturbation = \"damping\"\n[session]\nalpha_samples = 16\n";
    let o = homloop(&["melnikov"], tmp.path(), cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("out/melnikov.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("# varpi=")));
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("alpha,M"));
    let mut n = 0;
    for l in lines {
        let m: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!((m + 1.2).abs() < 1e-9, "{l}");
        n += 1;
    }
    assert_eq!(n, 17);
    assert!(!csv.contains('\r'));
}

#[test]
fn melnikov_without_g_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let o = homloop(&["melnikov"], tmp.path(), DUFFING, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("system.perturbation"));
}

#[test]
fn negative_grid_entry_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!("{DUFFING}[session]\nd_grid = [1e-3, -1e-4]\n");
    let o = homloop(&["loop"], tmp.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("session.d_grid[1]"));
}

#[test]
fn malformed_toml_and_unknown_keys() {
    let tmp = TempDir::new().unwrap();
    let o = homloop(&["classify"], tmp.path(), "[system\nbuiltin=", &[]);
    assert_eq!(o.status.code(), Some(1));
    let o = homloop(&["classify"], tmp.path(), "[system]\nbuiltin = \"duffing\"\nwhatever = 1\n", &[]);
    assert_eq!(o.status.code(), Some(1));
    let o = homloop(&["classify"], tmp.path(), "[system]\nbuiltin = \"duffing\"\n[session]\nmu = 0.5\n", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("session.mu"));
}

#[test]
fn loop_output_is_byte_identical_across_runs_and_threads() {
    let cfg = format!("{DUFFING}[session]\nd_grid = [1e-2, 1e-3, 1e-4]\ntau_grid = [0.0, 1.0]\n");
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let oa = homloop(&["loop"], a.path(), &cfg, &[("HOMLOOP_THREADS", "1")]);
    let ob = homloop(&["loop", "--threads", "3"], b.path(), &cfg, &[]);
    assert!(oa.status.success() && ob.status.success());
    let ca = fs::read(a.path().join("out/loops.csv")).unwrap();
    let cb = fs::read(b.path().join("out/loops.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    // header + 3 d × 2 τ × 2 directions
    assert_eq!(rows.len(), 13);
    assert_eq!(rows[0].split(',').count(), rows[1].split(',').count());
}

#[test]
fn bad_thread_count_from_env() {
    let tmp = TempDir::new().unwrap();
    let o = homloop(&["classify"], tmp.path(), DUFFING, &[("HOMLOOP_THREADS", "lots")]);
    assert!(!o.status.success());
}

#[test]
fn barriers_band_failure_exits_two() {
    let tmp = TempDir::new().unwrap();
    let o = homloop(&["barriers"], tmp.path(), DUFFING, &[]);
    assert_eq!(o.status.code(), Some(2));
    let v = read_json(&tmp.path().join("out/barriers.json"));
    assert!(v.is_object());
    assert!(tmp.path().join("out/barriers.csv").exists());
}

#[test]
fn inline_polynomial_duffing_matches_builtin() {
    let inline = r#"
[system]
switch = [{ c = -1.0, j = 1 }]
[system.f_plus]
x1 = [{ c = 1.0, j = 1 }]
x2 = [{ c = 1.0, i = 1 }, { c = -1.0, i = 2 }]
[system.g]
x2 = [{ c = -1.0, j = 1 }]
"#;
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let oa = homloop(&["melnikov"], a.path(), inline, &[]);
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    let ob = homloop(&["melnikov"], b.path(), "[system]\nbuiltin = \"duffing\"\nperturbation = \"damping\"\n", &[]);
    assert!(ob.status.success());
    let col = |p: &Path| -> Vec<f64> {
        fs::read_to_string(p).unwrap().lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
    };
    let ma = col(&a.path().join("out/melnikov.csv"));
    let mb = col(&b.path().join("out/melnikov.csv"));
    assert_eq!(ma.len(), mb.len());
    for (x, y) in ma.iter().zip(&mb) {
        assert!((x - y).abs() < 1e-9);
    }
    let o = homloop(&["classify"], a.path(), inline, &[]);
    assert!(o.status.success());
    assert_eq!(read_json(&a.path().join("out/classify.json"))["scenario"], "S1");
}

#[test]
fn stability_on_contracting_loop() {
    let tmp = TempDir::new().unwrap();
    let o = homloop(&["stability"], tmp.path(), "[system]\nbuiltin = \"duffing-contracting\"\n", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&tmp.path().join("out/stability.json"));
    assert_eq!(v["prediction"], "stable_inside");
}
