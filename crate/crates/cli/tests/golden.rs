//! Pins one full synthetic pipeline run. Regenerate the files after an
//! intended output change with `LEXPHASE_UPDATE_GOLDEN=1 cargo test -p
//! lexphase-cli --test golden`.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

/// Metrics computed with exact arithmetic only; compared byte for byte.
const EXACT_CSVS: [&str; 4] = ["D_correct", "D_incorrect", "V_uniq_incorrect", "mean_len"];

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn run_pipeline(out: &Path) {
    let code = lexphase_cli::run_from_args([
        "lexphase",
        "all",
        "--synth",
        "--out",
        out.to_str().unwrap(),
        "--seeds",
        "7,8",
        "--set",
        "synth.checkpoints=40",
        "--set",
        r#"synth.generator={kind="consolidation", t_star=20.0, ramp=2.0, windows_per_sample=60}"#,
    ]);
    assert_eq!(code, 0);
}

/// Equal structure and strings; numbers equal within a relative 1e-9.
fn assert_close(a: &Value, b: &Value, path: &str) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            let tol = 1e-9 * x.abs().max(y.abs()).max(1.0);
            assert!((x - y).abs() <= tol, "{path}: {x} vs {y}");
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len(), "{path}: length");
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                assert_close(p, q, &format!("{path}[{i}]"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            let kx: Vec<_> = x.keys().collect();
            let ky: Vec<_> = y.keys().collect();
            assert_eq!(kx, ky, "{path}: keys");
            for (k, v) in x {
                assert_close(v, &y[k], &format!("{path}.{k}"));
            }
        }
        _ => assert_eq!(a, b, "{path}"),
    }
}

#[test]
fn synthetic_pipeline_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path());
    let golden = golden_dir();
    let produced: Vec<(String, PathBuf)> = EXACT_CSVS
        .iter()
        .map(|m| {
            (
                format!("{m}.csv"),
                dir.path().join(format!("report/csv/{m}.csv")),
            )
        })
        .chain([(
            "transition_report.json".to_string(),
            dir.path().join("transition_report.json"),
        )])
        .collect();

    if std::env::var_os("LEXPHASE_UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(&golden).unwrap();
        for (name, path) in &produced {
            fs::copy(path, golden.join(name)).unwrap();
        }
        return;
    }

    for (name, path) in &produced[..EXACT_CSVS.len()] {
        let want = fs::read_to_string(golden.join(name)).unwrap();
        let got = fs::read_to_string(path).unwrap();
        assert!(got == want, "{name} differs from its golden file");
    }
    let want: Value =
        serde_json::from_str(&fs::read_to_string(golden.join("transition_report.json")).unwrap())
            .unwrap();
    let got: Value = serde_json::from_str(&fs::read_to_string(&produced[4].1).unwrap()).unwrap();
    assert_close(&got, &want, "transition_report");
}
