use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const HOMOGENEOUS: &str = r#"{
    "lattice": {"a1": [1, 0], "a2": [0, 1]},
    "background_n2": 2.1,
    "beta": 0.7,
    "cutoff": 4,
    "bands": 6,
    "kpath": {"vertices": [{"label": "G", "xi": [0, 0]}, {"label": "X", "xi": [3.141592653589793, 0]},
                           {"label": "M", "xi": [3.141592653589793, 3.141592653589793]}], "samples": 3},
    "seed": 11
}"#;

const ROD: &str = r#"{
    "lattice": {"a1": [1, 0], "a2": [0, 1]},
    "background_n2": 1.0,
    "regions": [{"polygon": [[0.3, 0.3], [0.7, 0.3], [0.7, 0.7], [0.3, 0.7]], "n2": 13.0}],
    "beta": 1.0,
    "cutoff": 4,
    "bands": 4,
    "kpath": {"vertices": [{"label": "G", "xi": [0, 0]}, {"label": "X", "xi": [3.141592653589793, 0]}], "samples": 3},
    "seed": 5
}"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

fn pcf(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcf"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

/// Data rows of a CSV written by `pcf`: comment lines and the header dropped.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn bands_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), ROD);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(pcf(&["bands"], &cfg, &a).status.success());
    assert!(pcf(&["bands"], &cfg, &b).status.success());
    for name in ["bands.csv", "gaps.csv", "bands.gp"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let head = fs::read_to_string(a.join("bands.csv")).unwrap();
    assert!(head.starts_with("# pcf bands seed=5"));
}

#[test]
fn homogeneous_bands_match_free_space_parabolas() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), HOMOGENEOUS);
    let out = tmp.path().join("out");
    assert!(pcf(&["bands"], &cfg, &out).status.success());
    let data = rows(&out.join("bands.csv"));
    assert_eq!(data.len(), 7 * 6);
    let (n2, beta) = (2.1, 0.7);
    for row in &data {
        assert_eq!(row.len(), 6);
        let xi: [f64; 2] = [row[2].parse().unwrap(), row[3].parse().unwrap()];
        let band: usize = row[4].parse().unwrap();
        let got: f64 = row[5].parse().unwrap();
        let mut exact = Vec::new();
        for m1 in -6..=6 {
            for m2 in -6..=6 {
                let k = [xi[0] + 2.0 * std::f64::consts::PI * m1 as f64, xi[1] + 2.0 * std::f64::consts::PI * m2 as f64];
                let v = (k[0] * k[0] + k[1] * k[1] + beta * beta) / n2;
                exact.extend([v, v]);
            }
        }
        exact.sort_by(f64::total_cmp);
        assert!((got - exact[band]).abs() <= 1e-8 * exact[band], "xi {xi:?} band {band}: {got} vs {}", exact[band]);
    }
}

#[test]
fn homogeneous_validate_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), HOMOGENEOUS);
    let out = tmp.path().join("out");
    let run = pcf(&["validate"], &cfg, &out);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let data = rows(&out.join("validate.csv"));
    assert!(data.iter().any(|r| r[0] == "homogeneous_exact"));
    assert!(data.iter().all(|r| r.len() == 4 && r[3] == "PASS"), "{data:?}");
}

#[test]
fn cornerless_exponents_are_smooth() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), HOMOGENEOUS);
    let out = tmp.path().join("out");
    assert!(pcf(&["exponents"], &cfg, &out).status.success());
    let text = fs::read_to_string(out.join("exponents.csv")).unwrap();
    assert!(rows(&out.join("exponents.csv")).is_empty());
    assert_eq!(text.lines().last(), Some("# sigma_epsilon=smooth"));
}

#[test]
fn rod_exponents_list_every_corner() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), ROD);
    let out = tmp.path().join("out");
    assert!(pcf(&["exponents"], &cfg, &out).status.success());
    let data = rows(&out.join("exponents.csv"));
    assert_eq!(data.len(), 4);
    for r in &data {
        let lambda: f64 = r[4].parse().unwrap();
        assert!(lambda > 0.5 && lambda < 1.0);
    }
}

#[test]
fn field_and_converge_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ROD.replace("\"seed\": 5", "\"seed\": 5, \"ladder\": [2, 3, 4], \"converge_points\": [[1.0, 0.5]]");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    assert!(pcf(&["field"], &cfg, &out).status.success());
    assert_eq!(rows(&out.join("field.csv")).len(), 32 * 32);
    assert!(pcf(&["converge"], &cfg, &out).status.success());
    let conv = rows(&out.join("converge.csv"));
    assert_eq!(conv.len(), 4 * 3);
    assert!(conv.iter().all(|r| r.len() == 7));
    assert_eq!(rows(&out.join("orders.csv")).len(), 4);
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let bad = ROD.replace("\"n2\": 13.0", "\"n2\": -13.0");
    let cfg = write_config(tmp.path(), &bad);
    let run = pcf(&["bands"], &cfg, &out);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("regions[0].n2"));
    assert!(!out.exists());

    let cfg = write_config(tmp.path(), "{\"lattice\": ");
    let run = pcf(&["bands"], &cfg, &out);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("syntax error"));

    let run = pcf(&["bands"], &tmp.path().join("missing.json"), &out);
    assert_eq!(run.status.code(), Some(2));

    let cfg = write_config(tmp.path(), ROD);
    let run = pcf(&["converge"], &cfg, &out);
    assert_eq!(run.status.code(), Some(2), "converge without a ladder");
}

#[test]
fn failed_writes_leave_no_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), ROD);
    let out = tmp.path().join("out");
    fs::create_dir_all(out.join("gaps.csv")).unwrap();
    let run = pcf(&["bands"], &cfg, &out);
    assert_eq!(run.status.code(), Some(3));
    assert!(!out.join("bands.csv").exists());
    assert!(!out.join("bands.gp").exists());
}
