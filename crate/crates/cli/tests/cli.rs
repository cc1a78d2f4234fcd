use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

const TINY: [&str; 6] = ["--chains", "1", "--iter", "300", "--warmup", "150"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_yieldfusion")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_error(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let last = text.lines().last().expect("an error line");
    serde_json::from_str(last).expect("machine-parsable error")
}

fn beirut() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/beirut_summary.json").display().to_string()
}

fn small_synth(dir: &Path, preset: &str) -> String {
    let p = dir.join(format!("{preset}.json"));
    let o = run(&["synth", "--preset", preset, "--seed", "3", "-o", p.to_str().unwrap()]);
    assert!(o.status.success());
    p.display().to_string()
}

#[test]
fn bundled_summary_file_matches_the_library() {
    let d = yieldfusion::data::load_dataset(beirut()).unwrap();
    assert_eq!(d, yieldfusion::data::beirut_summary_dataset());
}

#[test]
fn bma_is_not_a_fit_method() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["fit", "--data", &beirut(), "--method", "bma", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_error(&o);
    assert!(e["message"].as_str().unwrap().contains("fuse-posthoc"));
    assert!(!out.exists());
}

#[test]
fn missing_data_file_leaves_no_outputs() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["fit", "--data", "/nonexistent/d.json", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
    assert_eq!(stderr_error(&o)["code"], 2);
    assert!(!out.exists());
}

#[test]
fn unknown_flags_are_usage_errors() {
    let o = run(&["fit", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_error(&o)["error"], "usage");
}

#[test]
fn fit_writes_summary_and_manifest() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("fit");
    let data = beirut();
    let mut args = vec!["fit", "--data", &data, "--method", "dirichlet", "--seed", "7", "-o", out.to_str().unwrap()];
    args.extend(TINY);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("summary.json"));
    let y = s["params"].as_array().unwrap().iter().find(|p| p["name"] == "yield_kt").unwrap();
    for k in ["mode", "median", "mean", "hdi_95"] {
        assert!(!y[k].is_null(), "{k}");
    }
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "fit");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["iter"], 300);
    for f in m["outputs"].as_array().unwrap() {
        assert!(Path::new(f.as_str().unwrap()).exists());
    }
    let tw = json(&out.join("trust_weights.json"));
    assert!(tw["seismic"]["median"].is_number() && tw["crater"]["q95"].is_number());
}

#[test]
fn config_file_sits_under_explicit_flags() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"chains": 1, "iter": 400, "warmup": 200, "method": "single"}"#).unwrap();
    let out = dir.path().join("fit");
    let o = run(&["fit", "--config", cfg.to_str().unwrap(), "--data", &beirut(), "--iter", "300", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["config"]["iter"], 300);
    assert_eq!(m["config"]["warmup"], 200);
    assert_eq!(m["config"]["method"], "single");

    std::fs::write(&cfg, r#"{"itr": 400}"#).unwrap();
    let o = run(&["fit", "--config", cfg.to_str().unwrap(), "--data", &beirut(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_counts_and_sidecar_manifest() {
    let dir = tempdir().unwrap();
    let p = small_synth(dir.path(), "sar_biased");
    let d = yieldfusion::data::load_dataset(&p).unwrap();
    assert_eq!((d.sar.len(), d.vlm.len()), (120, 160));
    assert!(dir.path().join("sar_biased.json.manifest.json").exists());
    let o = run(&["synth", "--preset", "nope", "-o", dir.path().join("x.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_error(&o)["message"].as_str().unwrap().contains("base_clean"));
}

#[test]
fn stress_is_byte_reproducible() {
    let dir = tempdir().unwrap();
    let go = |name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["stress", "--scenario", "base_clean", "--methods", "plain,dirichlet", "--replicates", "2", "--seed", "1"];
        args.extend(TINY);
        args.extend(["-o", out.to_str().unwrap()]);
        let o = run(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("ablation.csv")).unwrap()
    };
    let (a, b) = (go("a"), go("b"));
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);

    let o = run(&["stress", "--scenario", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr_error(&o)["message"].as_str().unwrap().to_string();
    assert!(msg.contains("sar_heavy_tail") && msg.contains("dependence_06"));
}

#[test]
fn sweep_ppc_loo_and_posthoc_outputs() {
    let dir = tempdir().unwrap();
    let data = small_synth(dir.path(), "base_clean");
    let sub = |n: &str| dir.path().join(n).display().to_string();

    let mut args = vec!["sweep-alpha".to_string(), "--data".into(), data.clone(), "-o".into(), sub("sweep")];
    args.extend(TINY.iter().map(|s| s.to_string()));
    let o = run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep/alpha_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);

    let mut args = vec!["ppc", "--data", &data, "--modality", "crater", "--draws", "100", "-o"];
    let ppc_dir = sub("ppc");
    args.push(&ppc_dir);
    args.extend(TINY);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("ppc/ppc.json"));
    for k in ["p_bayes", "mid_p", "se"] {
        assert!(r[0][k].is_number(), "{k}");
    }

    let loo_dir = sub("loo");
    let mut args = vec!["loo", "--data", &data, "-o", &loo_dir];
    args.extend(TINY);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(json(&dir.path().join("loo/loo.json"))["spearman"].is_number());

    let ph_dir = sub("posthoc");
    let mut args = vec!["fuse-posthoc", "--data", &data, "--bma-draws", "500", "-o", &ph_dir];
    args.extend(TINY);
    let o = run(&args);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(3));
    let r = json(&dir.path().join("posthoc/posthoc.json"));
    assert!(r["bma"]["median_kt"].is_number() && r["ci"]["var"].is_number());
    assert_eq!(std::fs::read_to_string(dir.path().join("posthoc/bma_draws.csv")).unwrap().lines().count(), 501);
}

#[test]
fn sarprep_round_trip() {
    let dir = tempdir().unwrap();
    let r = yieldfusion::sarprep::Raster::from_fn(200, 200, -2000.0, -2000.0, 20.0, |i, j| {
        let (x, y) = (-2000.0 + 20.0 * (j as f64 + 0.5), -2000.0 + 20.0 * (i as f64 + 0.5));
        (150.0 / x.hypot(y)).min(1.0)
    })
    .unwrap();
    let rp = dir.path().join("d.txt");
    yieldfusion::sarprep::write_raster(&r, &rp).unwrap();
    let out = dir.path().join("boxes.json");
    let o = run(&["sarprep", "--raster", rp.to_str().unwrap(), "--epicenter", "0,0", "--percentile", "50", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d = yieldfusion::data::load_dataset(&out).unwrap();
    assert!(!d.sar.is_empty());
    assert!(d.sar.iter().all(|b| (200.0..=8000.0).contains(&b.range_m)));

    let o = run(&["sarprep", "--raster", rp.to_str().unwrap(), rp.to_str().unwrap(), "--epicenter", "0,0", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
