use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;
use yieldfusion::data::{load_dataset, save_dataset};
use yieldfusion::diagnostics::summarize;
use yieldfusion::sarprep::{composite, read_raster, spikead, zonal_aggregate, SpikeAdConfig, SpikeMode, ZonalConfig};
use yieldfusion::synth::{generate, preset, ScenarioConfig, ScenarioPreset};
use yieldfusion::validation::{
    alpha_sweep, bma_fuse, ci_fuse, fixed_gamma_weights, loo_kl, ppc, run_ablation, single_modality_inputs, softmax, write_ablation_csv,
    write_alpha_csv, write_mechanism_csv, AblationConfig, FitConfig, FittedModel, DEFAULT_ALPHAS,
};
use yieldfusion::{stats, Dataset, FusionMethod, MagnitudeLink, Modality, PriorConfig};

use crate::settings::{parse_list, CliError, CliResult, Settings};
use crate::{Cli, Command};

pub fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a pool built earlier in the process keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = cli.config.as_deref();
    match cli.command {
        Command::Fit { data, method, weights, nuts, out } => {
            let mut s = Settings::new("fit", config)?;
            let seed = s.pick("seed", cli.seed, 0u64)?;
            let dataset = load(&mut s, &data)?;
            let name = s.pick("method", method, "dirichlet".to_string())?;
            let parsed = FusionMethod::parse(&name).ok_or_else(|| CliError::Usage(format!("unknown method {name:?}; expected dirichlet, single, fixed or plain")))?;
            if !parsed.is_joint() {
                return Err(CliError::Usage(format!("method {name} is a post-hoc fuser without a joint density; use `yieldfusion fuse-posthoc`")));
            }
            let weights = match weights {
                Some(w) => Some(parse_list(&w, "weight", |t| t.parse::<f64>().ok())?),
                None => None,
            };
            let weights: Option<Vec<f64>> = s.pick("weights", weights.map(Some), None)?;
            let prior = s.pick("prior", None, PriorConfig::default())?;
            let nuts = s.nuts(&nuts, seed, false)?;
            let out = s.pick("out", out, PathBuf::from("fit_out"))?;
            s.reject_unused()?;
            let cfg = FitConfig { nuts, prior };
            let method = match (parsed, weights) {
                (FusionMethod::FixedGamma(_), Some(w)) if w.len() == 4 => FusionMethod::FixedGamma([w[0], w[1], w[2], w[3]]),
                (FusionMethod::FixedGamma(_), Some(w)) => return Err(CliError::Usage(format!("--weights needs 4 values, got {}", w.len()))),
                (FusionMethod::FixedGamma(_), None) => FusionMethod::FixedGamma(fixed_gamma_weights(&dataset, &cfg)?),
                (m, _) => m,
            };
            if let FusionMethod::FixedGamma(w) = method {
                s.record("fixed_weights", &w);
            }
            let model = FittedModel::run(&dataset, method, &cfg)?;
            fs::create_dir_all(&out)?;
            let outputs = write_fit(&model, &out)?;
            s.finish(seed, &outputs, &out.join("manifest.json"))?;
            if model.fit.diagnostic_failure() {
                return Err(CliError::Diagnostic(format!("{:.1}% divergent transitions; outputs kept in {}", 100.0 * model.fit.divergence_rate(), out.display())));
            }
            Ok(())
        }
        Command::Stress { scenario, methods, replicates, bma_draws, nuts, out } => {
            let mut s = Settings::new("stress", config)?;
            let seed = s.pick("seed", cli.seed, 0u64)?;
            let scenario = s.pick("scenario", scenario, "all".to_string())?;
            let presets = if scenario == "all" {
                ScenarioPreset::ALL.to_vec()
            } else {
                let valid: Vec<&str> = ScenarioPreset::ALL.iter().map(|p| p.name()).collect();
                parse_list(&scenario, "scenario", ScenarioPreset::parse)
                    .map_err(|e| CliError::Usage(format!("{e}; valid scenarios: {}, all", valid.join(", "))))?
            };
            let methods = s.pick("methods", methods, "single,fixed,bma,dirichlet".to_string())?;
            let methods = parse_list(&methods, "method", FusionMethod::parse)?;
            let n_replicates = s.pick("replicates", replicates, 20usize)?;
            let bma_draws = s.pick("bma_draws", bma_draws, 4000usize)?;
            let prior = s.pick("prior", None, PriorConfig::default())?;
            let nuts = s.nuts(&nuts, seed, true)?;
            let out = s.pick("out", out, PathBuf::from("stress_out"))?;
            s.reject_unused()?;
            let cfg = AblationConfig { fit: FitConfig { nuts, prior }, n_replicates, master_seed: seed, bma_draws };
            let (mut rows, mut mechanism, mut records) = (Vec::new(), Vec::new(), Vec::new());
            for p in presets {
                let o = run_ablation(p, &methods, &cfg)?;
                rows.extend(o.rows);
                mechanism.extend(o.mechanism);
                records.push(json!({ "scenario": p.name(), "replicates": o.replicates }));
            }
            fs::create_dir_all(&out)?;
            let paths = [out.join("ablation.csv"), out.join("mechanism.csv"), out.join("replicates.json")];
            write_ablation_csv(&rows, BufWriter::new(File::create(&paths[0])?))?;
            write_mechanism_csv(&mechanism, BufWriter::new(File::create(&paths[1])?))?;
            write_json(&paths[2], &records)?;
            s.finish(seed, &paths, &out.join("manifest.json"))
        }
        Command::Synth { preset: name, inference_links, out } => {
            let mut s = Settings::new("synth", config)?;
            let seed = s.pick("seed", cli.seed, 0u64)?;
            let name = s.pick("preset", name, "base_clean".to_string())?;
            let p = ScenarioPreset::parse(&name).ok_or_else(|| {
                let valid: Vec<&str> = ScenarioPreset::ALL.iter().map(|p| p.name()).collect();
                CliError::Usage(format!("unknown preset {name:?}; valid presets: {}", valid.join(", ")))
            })?;
            let links = s.pick("inference_links", inference_links.then_some(true), false)?;
            let out = s.pick("out", out, PathBuf::from("synth.json"))?;
            s.reject_unused()?;
            let mut cfg = ScenarioConfig { seed, ..preset(p) };
            if links {
                cfg = cfg.with_inference_links(&MagnitudeLink::default());
            }
            s.record("scenario", &cfg);
            let d = generate(&cfg)?;
            ensure_parent(&out)?;
            save_dataset(&d, &out)?;
            s.finish(seed, std::slice::from_ref(&out), &sidecar(&out))
        }
        Command::Ppc { data, modality, draws, nuts, out } => {
            let mut s = Settings::new("ppc", config)?;
            let seed = s.pick("seed", cli.seed, 0u64)?;
            let dataset = load(&mut s, &data)?;
            let modality: Option<String> = s.pick("modality", modality.map(Some), None)?;
            let mods = match modality {
                Some(m) => vec![parse_modality(&m)?],
                None => dataset.modalities(),
            };
            let draws = s.pick("draws", draws, 1000usize)?;
            let prior = s.pick("prior", None, PriorConfig::default())?;
            let nuts = s.nuts(&nuts, seed, false)?;
            let out = s.pick("out", out, PathBuf::from("ppc_out"))?;
            s.reject_unused()?;
            if let Some(m) = mods.iter().find(|m| !dataset.has(**m)) {
                return Err(CliError::Core(yieldfusion::Error::MissingModality(m.name())));
            }
            let model = FittedModel::run(&dataset, FusionMethod::DirichletGamma, &FitConfig { nuts, prior })?;
            let results = mods.iter().map(|m| ppc(&model, &dataset, *m, draws, seed)).collect::<yieldfusion::Result<Vec<_>>>()?;
            fs::create_dir_all(&out)?;
            let path = out.join("ppc.json");
            write_json(&path, &results)?;
            s.finish(seed, &[path], &out.join("manifest.json"))?;
            diagnostic_gate(&model)
        }
        Command::Loo { data, nuts, out } => {
            let mut s = Settings::new("loo", config)?;
            let seed = s.pick("seed", cli.seed, 0u64)?;
            let dataset = load(&mut s, &data)?;
            let prior = s.pick("prior", None, PriorConfig::default())?;
            let nuts = s.nuts(&nuts, seed, false)?;
            let out = s.pick("out", out, PathBuf::from("loo_out"))?;
            s.reject_unused()?;
            let r = loo_kl(&dataset, &FitConfig { nuts, prior })?;
            fs::create_dir_all(&out)?;
            let path = out.join("loo.json");
            write_json(&path, &r)?;
            s.finish(seed, &[path], &out.join("manifest.json"))
        }
        Command::SweepAlpha { data, alphas, nuts, out } => {
            let mut s = Settings::new("sweep-alpha", config)?;
            let seed = s.pick("seed", cli.seed, 0u64)?;
            let dataset = load(&mut s, &data)?;
            let alphas = match alphas {
                Some(a) => Some(parse_list(&a, "alpha", |t| t.parse::<f64>().ok())?),
                None => None,
            };
            let alphas = s.pick("alphas", alphas, DEFAULT_ALPHAS.to_vec())?;
            let prior = s.pick("prior", None, PriorConfig::default())?;
            let nuts = s.nuts(&nuts, seed, true)?;
            let out = s.pick("out", out, PathBuf::from("sweep_out"))?;
            s.reject_unused()?;
            let rows = alpha_sweep(&dataset, &alphas, &FitConfig { nuts, prior })?;
            fs::create_dir_all(&out)?;
            let paths = [out.join("alpha_sweep.csv"), out.join("alpha_sweep.json")];
            write_alpha_csv(&rows, BufWriter::new(File::create(&paths[0])?))?;
            write_json(&paths[1], &rows)?;
            s.finish(seed, &paths, &out.join("manifest.json"))
        }
        Command::Sarprep {
            raster,
            epicenter,
            mode,
            window,
            mad_threshold,
            iterations,
            composite: comp,
            box_px,
            annuli,
            r_inner,
            r_outer,
            percentile,
            out,
        } => {
            let mut s = Settings::new("sarprep", config)?;
            let seed = s.pick("seed", cli.seed, 0u64)?;
            let xy = parse_list(&epicenter, "epicenter coordinate", |t| t.parse::<f64>().ok())?;
            if xy.len() != 2 {
                return Err(CliError::Usage(format!("--epicenter needs x,y, got {epicenter:?}")));
            }
            s.record("epicenter", &xy);
            s.record("raster", &raster);
            let d = SpikeAdConfig::default();
            let mode = match s.pick("mode", mode, "spatial".to_string())?.as_str() {
                "spatial" => SpikeMode::Spatial,
                "temporal" => SpikeMode::Temporal,
                other => return Err(CliError::Usage(format!("unknown mode {other:?}; expected spatial or temporal"))),
            };
            let spike = SpikeAdConfig {
                window: s.pick("window", window, d.window)?,
                mad_threshold: s.pick("mad_threshold", mad_threshold, d.mad_threshold)?,
                iterations: s.pick("iterations", iterations, d.iterations)?,
                mode,
            };
            let z = ZonalConfig::default();
            let zonal = ZonalConfig {
                box_px: s.pick("box_px", box_px, z.box_px)?,
                n_annuli: s.pick("annuli", annuli, z.n_annuli)?,
                r_inner_m: s.pick("r_inner", r_inner, z.r_inner_m)?,
                r_outer_m: s.pick("r_outer", r_outer, z.r_outer_m)?,
                percentile: s.pick("percentile", percentile, z.percentile)?,
            };
            let comp = s.pick("composite", comp.then_some(true), false)?;
            let out = s.pick("out", out, PathBuf::from("sar_boxes.json"))?;
            s.reject_unused()?;
            spike.check().map_err(|e| CliError::Usage(e.to_string()))?;
            let stack = raster.iter().map(read_raster).collect::<yieldfusion::Result<Vec<_>>>()?;
            if stack.len() > 1 && !comp {
                return Err(CliError::Usage("several rasters need --composite to form one damage map".into()));
            }
            let cleaned = spikead(&stack, &spike)?;
            let damage = if comp { composite(&cleaned.rasters)? } else { cleaned.rasters[0].clone() };
            let agg = zonal_aggregate(&damage, (xy[0], xy[1]), &zonal)?;
            if agg.boxes.is_empty() {
                return Err(CliError::Core(yieldfusion::Error::Raster("no boxes fall inside the annuli".into())));
            }
            let dataset = Dataset {
                sar: agg.boxes,
                meta: json!({
                    "sarprep": {
                        "annulus": agg.annulus,
                        "skipped_annuli": agg.skipped_annuli,
                        "despeckle_changes": cleaned.changed,
                    }
                }),
                ..Dataset::default()
            };
            ensure_parent(&out)?;
            save_dataset(&dataset, &out)?;
            s.finish(seed, std::slice::from_ref(&out), &sidecar(&out))
        }
        Command::FusePosthoc { data, fuser, bma_draws, nuts, out } => {
            let mut s = Settings::new("fuse-posthoc", config)?;
            let seed = s.pick("seed", cli.seed, 0u64)?;
            let dataset = load(&mut s, &data)?;
            let fuser = s.pick("fuser", fuser, "both".to_string())?;
            let (do_bma, do_ci) = match fuser.as_str() {
                "bma" => (true, false),
                "ci" => (false, true),
                "both" => (true, true),
                other => return Err(CliError::Usage(format!("unknown fuser {other:?}; expected bma, ci or both"))),
            };
            let bma_draws = s.pick("bma_draws", bma_draws, 4000usize)?;
            let prior = s.pick("prior", None, PriorConfig::default())?;
            let nuts = s.nuts(&nuts, seed, false)?;
            let out = s.pick("out", out, PathBuf::from("posthoc_out"))?;
            s.reject_unused()?;
            let inputs = single_modality_inputs(&dataset, &FitConfig { nuts, prior })?;
            let weights = softmax(&inputs.iter().map(|i| i.elpd).collect::<Vec<_>>());
            let mut report = serde_json::Map::new();
            report.insert(
                "inputs".into(),
                json!(inputs
                    .iter()
                    .zip(&weights)
                    .map(|(i, w)| json!({
                        "modality": i.modality,
                        "elpd": i.elpd,
                        "weight": w,
                        "median_kt": stats::median(&i.yield_draws),
                        "diagnostic_failure": i.diagnostic_failure,
                    }))
                    .collect::<Vec<_>>()),
            );
            fs::create_dir_all(&out)?;
            let mut outputs = Vec::new();
            if do_bma {
                let pooled = bma_fuse(&inputs, bma_draws)?;
                report.insert(
                    "bma".into(),
                    json!({ "median_kt": stats::median(&pooled), "mean_kt": stats::mean(&pooled), "hdi_95": stats::hdi(&pooled, 0.95)? }),
                );
                let path = out.join("bma_draws.csv");
                let mut w = BufWriter::new(File::create(&path)?);
                writeln!(w, "yield_kt")?;
                for v in &pooled {
                    writeln!(w, "{v}")?;
                }
                w.flush()?;
                outputs.push(path);
            }
            if do_ci {
                let c = ci_fuse(&inputs)?;
                report.insert("ci".into(), json!({ "mean_kt": c.mean, "var": c.var, "interval_95": c.interval_95() }));
            }
            let path = out.join("posthoc.json");
            write_json(&path, &report)?;
            outputs.push(path);
            s.finish(seed, &outputs, &out.join("manifest.json"))?;
            match inputs.iter().find(|i| i.diagnostic_failure) {
                Some(i) => Err(CliError::Diagnostic(format!("{} single-modality fit failed its sampler diagnostics", i.modality.name()))),
                None => Ok(()),
            }
        }
    }
}

fn load(s: &mut Settings, path: &Path) -> CliResult<Dataset> {
    s.record("data", &path);
    load_dataset(path).map_err(|e| match e {
        yieldfusion::Error::Io(io) => CliError::Usage(format!("cannot read {}: {io}", path.display())),
        other => CliError::Core(other),
    })
}

fn parse_modality(s: &str) -> CliResult<Modality> {
    Modality::parse(s).ok_or_else(|| CliError::Usage(format!("unknown modality {s:?}; expected seismic, crater, sar or vlm")))
}

fn diagnostic_gate(model: &FittedModel) -> CliResult<()> {
    if model.fit.diagnostic_failure() {
        Err(CliError::Diagnostic(format!("{:.1}% divergent transitions", 100.0 * model.fit.divergence_rate())))
    } else {
        Ok(())
    }
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn ensure_parent(p: &Path) -> CliResult<()> {
    if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(v).expect("output serializes"))?;
    Ok(())
}

fn quantiles(v: &[f64]) -> serde_json::Value {
    let s = stats::sorted(v);
    json!({
        "mean": stats::mean(v),
        "q05": stats::quantile_sorted(&s, 0.05),
        "q25": stats::quantile_sorted(&s, 0.25),
        "median": stats::quantile_sorted(&s, 0.5),
        "q75": stats::quantile_sorted(&s, 0.75),
        "q95": stats::quantile_sorted(&s, 0.95),
    })
}

fn write_fit(model: &FittedModel, out: &Path) -> CliResult<Vec<PathBuf>> {
    let fit = &model.fit;
    let summary = summarize(fit)?;
    let draws = out.join("draws.csv");
    fit.write_csv(BufWriter::new(File::create(&draws)?))?;

    let summary_path = out.join("summary.json");
    write_json(&summary_path, &summary)?;

    let rows: Vec<_> = fit.rows().map(|r| model.density.unpack(r)).collect();
    let trust: serde_json::Map<String, serde_json::Value> = model
        .density
        .modalities()
        .iter()
        .map(|m| (m.name().to_string(), quantiles(&rows.iter().map(|p| p.gamma[m.index()]).collect::<Vec<_>>())))
        .collect();
    let trust_path = out.join("trust_weights.json");
    write_json(&trust_path, &trust)?;

    let finite = |f: fn(&yieldfusion::diagnostics::ParamSummary) -> f64| summary.params.iter().map(f).filter(|v| v.is_finite());
    let diag = json!({
        "n_draws": fit.n_draws(),
        "n_divergent": fit.n_divergent(),
        "divergence_rate": fit.divergence_rate(),
        "mean_accept_stat": fit.mean_accept_stat(),
        "max_rhat": finite(|p| p.rhat).fold(f64::NAN, f64::max),
        "min_ess_bulk": finite(|p| p.ess_bulk).fold(f64::NAN, f64::min),
        "diagnostic_failure": fit.diagnostic_failure(),
    });
    let diag_path = out.join("diagnostics.json");
    write_json(&diag_path, &diag)?;

    let y = model.yield_draws();
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let grid = stats::linspace(lo, hi, 256);
    let dens = stats::kde_on_grid(&y, stats::silverman_bandwidth(&y), &grid);
    let dens_path = out.join("yield_density.csv");
    let mut w = BufWriter::new(File::create(&dens_path)?);
    writeln!(w, "yield_kt,density")?;
    for (g, d) in grid.iter().zip(&dens) {
        writeln!(w, "{g},{d}")?;
    }
    w.flush()?;
    Ok(vec![draws, summary_path, trust_path, diag_path, dens_path])
}
