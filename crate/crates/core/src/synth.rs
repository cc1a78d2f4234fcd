//! Synthetic four-modality datasets for the stress scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::data::{CraterObs, Dataset, SarBox, SeismicObs, VlmRecord, N_BINS};
use crate::error::{Error, Result};
use crate::likelihood::vlm_bin_probs;
use crate::physics::{self, MagnitudeLink, YieldKt};

/// Attempts at drawing an in-range site before giving up.
pub const MAX_REDRAWS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub y_true_kt: f64,
    pub n_sar: usize,
    pub nu_gen: f64,
    pub delta_bias_dex: f64,
    pub sigma_sar_gen: f64,
    pub n_vlm: usize,
    pub eta_mislabel: f64,
    pub rho: f64,
    pub seismic_a: f64,
    pub seismic_b: f64,
    pub sigma_m_gen: f64,
    pub crater_c: f64,
    pub crater_d: f64,
    pub sigma_c_gen: f64,
    pub r_min_m: f64,
    pub r_max_m: f64,
    pub p50_gen_kpa: f64,
    pub k_gen: f64,
    pub sdex_gen: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            y_true_kt: 0.30,
            n_sar: 120,
            nu_gen: 8.0,
            delta_bias_dex: 0.0,
            sigma_sar_gen: 40.0,
            n_vlm: 160,
            eta_mislabel: 0.0,
            rho: 0.0,
            seismic_a: 3.0,
            seismic_b: -1.2,
            sigma_m_gen: 0.10,
            crater_c: 1.0,
            crater_d: 1.2,
            sigma_c_gen: 0.05,
            r_min_m: 300.0,
            r_max_m: 6000.0,
            p50_gen_kpa: 60.0,
            k_gen: 2.0,
            sdex_gen: 0.15,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioPreset {
    BaseClean,
    SarHeavyTail,
    SarBiased,
    VlmNoisy,
    Dependence06,
}

impl ScenarioPreset {
    pub const ALL: [ScenarioPreset; 5] = [
        ScenarioPreset::BaseClean,
        ScenarioPreset::SarHeavyTail,
        ScenarioPreset::SarBiased,
        ScenarioPreset::VlmNoisy,
        ScenarioPreset::Dependence06,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioPreset::BaseClean => "base_clean",
            ScenarioPreset::SarHeavyTail => "sar_heavy_tail",
            ScenarioPreset::SarBiased => "sar_biased",
            ScenarioPreset::VlmNoisy => "vlm_noisy",
            ScenarioPreset::Dependence06 => "dependence_06",
        }
    }

    pub fn parse(s: &str) -> Option<ScenarioPreset> {
        ScenarioPreset::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Modality index of the deliberately corrupted channel, if any.
    pub fn corrupted(self) -> Option<crate::data::Modality> {
        use crate::data::Modality;
        match self {
            ScenarioPreset::SarHeavyTail | ScenarioPreset::SarBiased => Some(Modality::Sar),
            ScenarioPreset::VlmNoisy => Some(Modality::Vlm),
            _ => None,
        }
    }

    pub fn config(self) -> ScenarioConfig {
        let base = ScenarioConfig::default();
        match self {
            ScenarioPreset::BaseClean => base,
            ScenarioPreset::SarHeavyTail => ScenarioConfig { nu_gen: 2.5, ..base },
            ScenarioPreset::SarBiased => ScenarioConfig { delta_bias_dex: 0.35, ..base },
            ScenarioPreset::VlmNoisy => ScenarioConfig { eta_mislabel: 0.10, ..base },
            ScenarioPreset::Dependence06 => ScenarioConfig { rho: 0.6, ..base },
        }
    }
}

pub fn preset(p: ScenarioPreset) -> ScenarioConfig {
    p.config()
}

impl ScenarioConfig {
    /// Replace the seismic and crater generator links with the inference links,
    /// giving a well-specified scenario.
    pub fn with_inference_links(self, link: &MagnitudeLink) -> Self {
        ScenarioConfig {
            seismic_a: std::f64::consts::LN_10 / link.beta,
            seismic_b: -link.alpha / link.beta,
            crater_c: 1.0 / 3.0,
            crater_d: 2.0,
            ..self
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_sar == 0 || self.n_vlm == 0 {
            return bad("n_sar and n_vlm must be positive");
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1)");
        }
        if !(self.nu_gen > 2.0) {
            return bad("nu_gen must exceed 2");
        }
        if !(0.0..=1.0).contains(&self.eta_mislabel) {
            return bad("eta_mislabel must lie in [0, 1]");
        }
        if !(self.y_true_kt > 0.0) || !(self.r_min_m > 0.0 && self.r_min_m < self.r_max_m) {
            return bad("need y_true_kt > 0 and 0 < r_min_m < r_max_m");
        }
        if self.sigma_m_gen < 0.0 || self.sigma_c_gen < 0.0 || self.sigma_sar_gen < 0.0 || !(self.sdex_gen > 0.0) {
            return bad("noise scales must be nonnegative and sdex_gen positive");
        }
        if !(self.p50_gen_kpa > 0.0 && self.k_gen > 0.0) {
            return bad("p50_gen_kpa and k_gen must be positive");
        }
        Ok(())
    }
}

/// Standardized residual innovations drawn for one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Innovations {
    pub seismic: f64,
    pub crater: f64,
    /// Student-t innovations of the SAR logits, one per box.
    pub sar: Vec<f64>,
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

fn in_range_site<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig, y: YieldKt, what: &'static str) -> Result<(f64, f64)> {
    for _ in 0..MAX_REDRAWS {
        let r = log_uniform(rng, cfg.r_min_m, cfg.r_max_m);
        if let Ok(p) = physics::kb_incident_overpressure(r, y) {
            return Ok((r, p));
        }
    }
    Err(Error::RedrawLimit(what))
}

/// Generate a dataset together with the residual innovations used.
///
/// Seismic, crater and SAR innovations share one standard normal shock `Z`:
/// each is `sqrt(1 - rho) eta + sqrt(rho) Z`, so any two are correlated at `rho`. The SAR value is then mapped through
/// the Gaussian CDF and the Student-t quantile, so its marginal is exactly
/// `t_nu` while it keeps the shared shock.
pub fn generate_with_innovations(cfg: &ScenarioConfig) -> Result<(Dataset, Innovations)> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let y = YieldKt::new(cfg.y_true_kt)?;
    let l10y = cfg.y_true_kt.log10();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let t = StudentsT::new(0.0, 1.0, cfg.nu_gen).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let shock: f64 = rng.sample(StandardNormal);
    let (keep, load) = ((1.0 - cfg.rho).sqrt(), cfg.rho.sqrt());
    let mixed = |rng: &mut ChaCha8Rng| {
        let e: f64 = rng.sample(StandardNormal);
        keep * e + load * shock
    };

    let e_m = mixed(&mut rng);
    let mw = cfg.seismic_a * l10y + cfg.seismic_b + cfg.sigma_m_gen * e_m;
    let e_c = mixed(&mut rng);
    let z = cfg.crater_c * l10y + cfg.crater_d + cfg.sigma_c_gen * e_c;
    let d = 10f64.powf(z);

    let mut sar = Vec::with_capacity(cfg.n_sar);
    let mut e_sar = Vec::with_capacity(cfg.n_sar);
    for _ in 0..cfg.n_sar {
        let (r, psi) = in_range_site(&mut rng, cfg, y, "SAR range draws")?;
        let lp = physics::psi_to_kpa(psi).log10() + cfg.delta_bias_dex;
        let z_mu = cfg.k_gen * (lp - cfg.p50_gen_kpa.log10());
        let g = mixed(&mut rng);
        let u = unit.cdf(g).clamp(1e-15, 1.0 - 1e-15);
        let e = t.inverse_cdf(u);
        e_sar.push(e);
        let z_obs = z_mu + cfg.sigma_sar_gen / 100.0 * e;
        sar.push(SarBox { range_m: r, damage_pct: 100.0 / (1.0 + (-z_obs).exp()) });
    }

    let mut vlm = Vec::with_capacity(cfg.n_vlm);
    for _ in 0..cfg.n_vlm {
        let (r, psi) = in_range_site(&mut rng, cfg, y, "VLM range draws")?;
        let pi = vlm_bin_probs(psi, cfg.sdex_gen);
        let mut pmf = [0.0; N_BINS];
        for (q, p) in pmf.iter_mut().zip(pi) {
            *q = (1.0 - cfg.eta_mislabel) * p + cfg.eta_mislabel / N_BINS as f64;
        }
        vlm.push(VlmRecord { range_m: r, pmf });
    }

    let data = Dataset {
        seismic: Some(SeismicObs { mw_obs: mw }),
        crater: Some(CraterObs { width_m: d, length_m: d }),
        sar,
        vlm,
        meta: serde_json::json!({ "generator": cfg }),
    };
    Ok((data.validated_inner(false)?, Innovations { seismic: e_m, crater: e_c, sar: e_sar }))
}

/// Generate a dataset from a scenario configuration.
pub fn generate(cfg: &ScenarioConfig) -> Result<Dataset> {
    generate_with_innovations(cfg).map(|(d, _)| d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_expand_to_rows() {
        let b = preset(ScenarioPreset::BaseClean);
        assert_eq!((b.n_sar, b.n_vlm, b.nu_gen, b.delta_bias_dex, b.rho, b.eta_mislabel), (120, 160, 8.0, 0.0, 0.0, 0.0));
        assert_eq!(b.sigma_sar_gen, 40.0);
        assert_eq!(preset(ScenarioPreset::SarHeavyTail), ScenarioConfig { nu_gen: 2.5, ..b.clone() });
        assert_eq!(preset(ScenarioPreset::SarBiased).delta_bias_dex, 0.35);
        assert_eq!(preset(ScenarioPreset::VlmNoisy).eta_mislabel, 0.10);
        assert_eq!(preset(ScenarioPreset::Dependence06).rho, 0.6);
        for p in ScenarioPreset::ALL {
            assert_eq!(ScenarioPreset::parse(p.name()), Some(p));
        }
    }

    #[test]
    fn noise_free_links() {
        let cfg = ScenarioConfig { sigma_m_gen: 0.0, sigma_c_gen: 0.0, sigma_sar_gen: 0.0, sdex_gen: 0.01, ..Default::default() };
        let d = generate(&cfg).unwrap();
        let mw = d.seismic.unwrap().mw_obs;
        // the magnitude validation band rejects negative magnitudes, see below
        assert!((mw - (3.0 * 0.3f64.log10() - 1.2)).abs() < 1e-12);
        let c = d.crater.unwrap();
        assert!((c.width_m.log10() - (0.3f64.log10() + 1.2)).abs() < 1e-12);
        assert_eq!(c.width_m, c.length_m);
        assert!((c.width_m - 4.75).abs() < 0.01);
    }

    #[test]
    fn full_mislabel_is_uniform() {
        let d = generate(&ScenarioConfig { eta_mislabel: 1.0, n_sar: 5, n_vlm: 20, ..Default::default() }).unwrap();
        for r in &d.vlm {
            assert!(r.pmf.iter().all(|q| (q - 1.0 / 9.0).abs() < 1e-15));
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(generate(&ScenarioConfig { rho: 1.0, ..Default::default() }).is_err());
        assert!(generate(&ScenarioConfig { nu_gen: 2.0, ..Default::default() }).is_err());
        assert!(generate(&ScenarioConfig { n_sar: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn redraw_limit() {
        // every range beyond Z_en = 500 at this yield
        let cfg = ScenarioConfig { y_true_kt: 1e-6, r_min_m: 2000.0, r_max_m: 3000.0, ..Default::default() };
        assert!(matches!(generate(&cfg), Err(Error::RedrawLimit(_))));
    }
}
