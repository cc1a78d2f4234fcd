use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use yieldfusion::stats::spearman;
use yieldfusion::synth::{preset, ScenarioConfig, ScenarioPreset};
use yieldfusion::validation::{
    bma_fuse, ci_fuse_moments, kl_divergence, ppc_pvalues, replicate_seeds, run_ablation_config, AblationConfig, FitConfig,
    PosthocInput,
};
use yieldfusion::{FusionMethod, Modality, NutsConfig};

fn normals(n: usize, shift: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| shift + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect()
}

#[test]
fn kl_between_shifted_unit_normals() {
    // closed form for N(0,1) || N(1,1) is 1/2
    let kl = kl_divergence(&normals(10_000, 0.0, 1), &normals(10_000, 1.0, 2)).unwrap();
    assert!((kl - 0.5).abs() < 0.05, "{kl}");
    let p = normals(10_000, 0.0, 3);
    assert!(kl_divergence(&p, &p).unwrap() < 1e-3);
}

#[test]
fn kl_rejects_degenerate_inputs() {
    assert!(kl_divergence(&[1.0], &[1.0, 2.0]).is_err());
    assert!(kl_divergence(&[1.0; 50], &[1.0; 50]).is_err());
}

#[test]
fn spearman_of_reversed_ranks() {
    let r = spearman(&[0.2, 0.3, 0.1, 0.4], &[0.3, 0.2, 0.4, 0.1]).unwrap();
    assert!((r + 1.0).abs() < 1e-12);
}

fn input(m: Modality, elpd: f64, value: f64) -> PosthocInput {
    PosthocInput { modality: m, yield_draws: vec![value; 10], elpd, diagnostic_failure: false }
}

#[test]
fn bma_counts() {
    let equal: Vec<_> = Modality::ALL.iter().enumerate().map(|(i, m)| input(*m, -1.0, i as f64)).collect();
    let pooled = bma_fuse(&equal, 4000).unwrap();
    assert_eq!(pooled.len(), 4000);
    for i in 0..4 {
        assert_eq!(pooled.iter().filter(|v| **v == i as f64).count(), 1000);
    }
    let mut dominated = equal.clone();
    dominated[2].elpd = 49.0;
    let pooled = bma_fuse(&dominated, 4000).unwrap();
    assert_eq!(pooled.len(), 4000);
    assert!(pooled.iter().all(|v| *v == 2.0));
    let uneven = [input(Modality::Seismic, 0.0, 0.0), input(Modality::Crater, 0.3, 1.0), input(Modality::Sar, 0.7, 2.0)];
    for n in [1, 7, 999, 4000] {
        assert_eq!(bma_fuse(&uneven, n).unwrap().len(), n);
    }
}

#[test]
fn covariance_intersection_properties() {
    let one = ci_fuse_moments(&[(0.3, 0.01)]).unwrap();
    assert_eq!((one.mean, one.var), (0.3, 0.01));
    let same = ci_fuse_moments(&[(0.3, 0.01); 4]).unwrap();
    assert!((same.var - 0.01).abs() < 1e-15);
    let mixed = ci_fuse_moments(&[(0.2, 0.01), (0.6, 0.04)]).unwrap();
    assert!(mixed.mean > 0.2 && mixed.mean < 0.6);
    assert!(mixed.var <= 0.04 && mixed.var > 0.0);
    assert!(ci_fuse_moments(&[(0.2, 0.0)]).is_err());
    let (lo, hi) = same.interval_95();
    assert!((hi - lo - 2.0 * 1.959964 * 0.1).abs() < 1e-6);
}

#[test]
fn mid_p_tie_convention() {
    let (p, mid, _) = ppc_pvalues(&[1.0; 10], &[1.0; 10]).unwrap();
    assert_eq!(p, 1.0);
    assert_eq!(mid, 0.5);
}

#[test]
fn replicate_seeds_are_stable_and_distinct() {
    let a = replicate_seeds(7, 20);
    assert_eq!(a, replicate_seeds(7, 20));
    assert_eq!(&replicate_seeds(7, 5)[..], &a[..5]);
    let mut s = a.clone();
    s.sort();
    s.dedup();
    assert_eq!(s.len(), 20);
}

#[test]
fn ablation_is_reproducible() {
    let base = ScenarioConfig { n_sar: 20, n_vlm: 20, ..preset(ScenarioPreset::BaseClean) };
    let cfg = AblationConfig {
        fit: FitConfig { nuts: NutsConfig { n_chains: 1, n_iter: 300, n_warmup: 150, ..NutsConfig::reduced(0) }, ..Default::default() },
        n_replicates: 2,
        master_seed: 5,
        bma_draws: 200,
    };
    let methods = [FusionMethod::PlainProduct, FusionMethod::DirichletGamma];
    let a = run_ablation_config("tiny", &base, None, &methods, &cfg).unwrap();
    let b = run_ablation_config("tiny", &base, None, &methods, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a.replicates).unwrap(), serde_json::to_string(&b.replicates).unwrap());
    assert_eq!(a.rows.len(), 2);
    assert_eq!(a.mechanism.len(), 4);
    let mut csv = Vec::new();
    yieldfusion::validation::write_ablation_csv(&a.rows, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
}
