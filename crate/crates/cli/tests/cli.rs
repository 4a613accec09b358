use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_catembed"));
    c.env_remove("CATEMBED_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let o = run(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Synthetic bundle with a trimmed config so a full pipeline run stays quick.
fn small_bundle(dir: &Path) -> PathBuf {
    let params = dir.join("synth_params.json");
    std::fs::write(&params, r#"{"n_runs": 12, "disks_per_run": 6, "seed": 5}"#).unwrap();
    let data = dir.join("data");
    ok(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--params",
        params.to_str().unwrap(),
    ]);
    let cfg_path = data.join("config.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg["eval"] = serde_json::json!({"k": 3, "fractions": [0.5, 1.0]});
    cfg["gbt"] = serde_json::json!({"n_rounds": 30});
    for v in cfg["variants"].as_array_mut().unwrap() {
        for enc in v["encoders"].as_object_mut().unwrap().values_mut() {
            if enc["type"] == "doc2vec" {
                enc["params"] = serde_json::json!({"epochs": 200});
            }
        }
    }
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    cfg_path
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bundle(dir.path());
    let inputs_before = files_under(cfg.parent().unwrap());
    let (a, b) = (dir.path().join("run_a"), dir.path().join("run_b"));
    for out in [&a, &b] {
        ok(&[
            "pipeline",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let (fa, fb) = (files_under(&a), files_under(&b));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(v == &fb[k], "{} differs between runs", k.display());
    }
    // no subcommand mutates its inputs
    assert_eq!(inputs_before, files_under(cfg.parent().unwrap()));

    let names = [
        "original",
        "doc2vec_sh",
        "doc2vec_sh_r",
        "minilm_sh",
        "mpnet_sh",
    ];
    for n in names {
        for f in [
            "aggregate.csv",
            "folds.csv",
            "importance.csv",
            "gain.csv",
            "model.json",
        ] {
            assert!(fa.contains_key(&Path::new(n).join(f)), "missing {n}/{f}");
        }
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fa[Path::new("manifest.json")]).unwrap();
    assert_eq!(manifest["command"], "pipeline");
    assert_eq!(manifest["seed"], 5);
    assert!(
        manifest["inputs"]["dataset"]["sha256"]
            .as_str()
            .unwrap()
            .len()
            == 64
    );
    assert!(manifest["outputs"]["original/aggregate.csv"].is_string());
    assert!(manifest["inputs"]["minilm_sh/insert_shape"].is_object());
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bundle(dir.path());
    let c = cfg.to_str().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&[
        "evaluate",
        "--config",
        c,
        "--variant",
        "original",
        "--out",
        a.to_str().unwrap(),
    ]);
    ok(&[
        "evaluate",
        "--config",
        c,
        "--variant",
        "original",
        "--seed",
        "99",
        "--out",
        b.to_str().unwrap(),
    ]);
    let read = |d: &Path| std::fs::read(d.join("original/folds.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
}

#[test]
fn similarity_of_standin_table_is_12_by_12() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--out", data.to_str().unwrap()]);
    let table = data.join("tables/minilm_standin.csv");
    let out = dir.path().join("sim");
    ok(&[
        "similarity",
        "--table",
        table.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(out.join("similarity.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 13);
    assert!(lines.iter().all(|l| l.split(',').count() == 13));
}

#[test]
fn reduce_and_embed_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bundle(dir.path());
    let table = cfg.parent().unwrap().join("tables/mpnet_standin.csv");
    let r = dir.path().join("pca");
    ok(&[
        "reduce",
        "--table",
        table.to_str().unwrap(),
        "--method",
        "pca",
        "--k",
        "2",
        "--out",
        r.to_str().unwrap(),
    ]);
    let reduced = std::fs::read_to_string(r.join("reduced.csv")).unwrap();
    assert_eq!(reduced.lines().next().unwrap().split(',').count(), 3);
    assert!(r.join("explained_variance.csv").exists());

    let e = dir.path().join("emb");
    ok(&[
        "embed",
        "--config",
        cfg.to_str().unwrap(),
        "--variant",
        "doc2vec_sh",
        "--out",
        e.to_str().unwrap(),
    ]);
    assert!(e.join("doc2vec_sh/insert_shape.csv").exists());
}

#[test]
fn parse_iso_writes_features() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("iso");
    ok(&[
        "parse-iso",
        "CNMG120408",
        "ZNMG120408",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(out.join("iso_features.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("CNMG120408,rhombus 80 degrees,80,0,"));
    assert!(rows[2].starts_with("ZNMG120408,,,0,") && rows[2].ends_with(",shape_description"));
}

#[test]
fn failures_emit_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = run(&[
        "pipeline",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        "x",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"]["kind"], "io");

    let cfg = small_bundle(dir.path());
    let o = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--variant",
        "ghost",
        "--out",
        "x",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "config");

    let o = run(&[
        "parse-iso",
        "  ",
        "--out",
        dir.path().join("iso").to_str().unwrap(),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "insert_code");
}
