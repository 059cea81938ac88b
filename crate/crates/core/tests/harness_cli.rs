use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn small_config(extra: Value) -> Value {
    let mut cfg = json!({
        "dataset": {
            "generate": {
                "n_train": 3,
                "n_test": 2,
                "episode": {"duration": 3.0}
            }
        },
        "lifting": {"state_dim": 2, "monomial_degree": 2, "n_delays": 2},
        "alpha_grid": {"count": 4, "log_min": -2.0, "log_max": 2.0},
        "folds": 3
    });
    merge(&mut cfg, extra);
    cfg
}

fn merge(a: &mut Value, b: Value) {
    match (a, b) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                merge(a.entry(k).or_insert(Value::Null), v);
            }
        }
        (a, b) => *a = b,
    }
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clkoop"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn manifest_hash(dir: &Path) -> String {
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    m["hash"].as_str().unwrap().to_string()
}

#[test]
fn generate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", &small_config(json!({})));
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    ok(&run(&["generate", "--seed", "7"], &cfg, &a));
    ok(&run(&["generate", "--seed", "7"], &cfg, &b));
    ok(&run(&["generate", "--seed", "8"], &cfg, &c));
    assert_eq!(manifest_hash(&a), manifest_hash(&b));
    assert_ne!(manifest_hash(&a), manifest_hash(&c));
    for name in ["train_000.csv", "test_001.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }
    assert_ne!(std::fs::read(a.join("train_000.csv")).unwrap(), std::fs::read(c.join("train_000.csv")).unwrap());
}

#[test]
fn invalid_configuration_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        &small_config(json!({"dataset": {"generate": {"episode": {"duration": -1.0}}}})),
    );
    let out = run(&["generate"], &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duration"));
    let out = run(&["sweep"], &tmp.path().join("missing.json"), &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_score_and_rewrap() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let gen = write_config(tmp.path(), "gen.json", &small_config(json!({})));
    ok(&run(&["generate"], &gen, &data));

    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &small_config(json!({"dataset": {"dir": data.to_str().unwrap()}})),
    );
    let sweep_dir = tmp.path().join("sweep");
    ok(&run(&["sweep"], &cfg, &sweep_dir));
    let sweep = std::fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(lines.next().unwrap(), "alpha,method,rho_cl,rho_plant,r2_cl,r2_plant");
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.split(',').count() == 6));
    assert!(sweep_dir.join("sweep_detail.csv").exists());

    let score_cfg = write_config(
        tmp.path(),
        "score.json",
        &small_config(json!({
            "dataset": {"dir": data.to_str().unwrap()},
            "score": {"sweep_csv": sweep_dir.join("sweep.csv").to_str().unwrap()}
        })),
    );
    let score_dir = tmp.path().join("score");
    ok(&run(&["score"], &score_cfg, &score_dir));
    let table = std::fs::read_to_string(score_dir.join("table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,selection,alpha,target,r2_mean,r2_std,nrmse_mean,nrmse_std"
    );
    assert_eq!(lines.count(), 8);
    for label in ["edmd_plant", "edmd_closed_loop", "cl_edmd_plant", "cl_edmd_closed_loop"] {
        let res: Value =
            serde_json::from_str(&std::fs::read_to_string(score_dir.join(format!("score_{label}.json"))).unwrap())
                .unwrap();
        assert!(res["alpha"].as_f64().unwrap() > 0.0);
        assert!(score_dir.join(format!("eigenvalues_{label}.json")).exists());
    }
    // same scores with the sweep recomputed in process
    let again = tmp.path().join("score2");
    ok(&run(&["score"], &cfg, &again));
    assert_eq!(table, std::fs::read_to_string(again.join("table.csv")).unwrap());

    let rewrap_dir = tmp.path().join("rewrap");
    ok(&run(&["rewrap"], &gen, &rewrap_dir));
    let csv = std::fs::read_to_string(rewrap_dir.join("rewrap.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "lambda_re,lambda_im,stage,path");
    let body: Vec<_> = lines.collect();
    for stage in ["before", "after"] {
        for path in ["constrained", "lstsq"] {
            assert!(body.iter().any(|l| l.ends_with(&format!(",{stage},{path}"))));
        }
    }
    let res: Value = serde_json::from_str(&std::fs::read_to_string(rewrap_dir.join("rewrap.json")).unwrap()).unwrap();
    assert!(res["constrained"]["max_displacement"].as_f64().unwrap() <= 1e-9);
}
