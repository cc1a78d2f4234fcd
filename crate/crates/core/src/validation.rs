//! Validation battery: predictive checks, leave-one-modality-out KL,
//! fusion ablations, post-hoc fusers and the Dirichlet-concentration sweep.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, StudentsT};

use crate::data::{Dataset, Modality};
use crate::error::{Error, Result};
use crate::likelihood::{vlm_bin_probs, vlm_weights};
use crate::physics::{self, YieldKt};
use crate::posterior::{FusionMethod, JointDensity};
use crate::priors::{DirichletPrior, PriorConfig};
use crate::sampler::{run_nuts, Fit, NutsConfig};
use crate::stats;
use crate::synth::{generate, ScenarioConfig, ScenarioPreset};

/// Sampler and prior settings shared by every refit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub nuts: NutsConfig,
    pub prior: PriorConfig,
}

impl FitConfig {
    pub fn reduced(seed: u64) -> Self {
        FitConfig { nuts: NutsConfig::reduced(seed), prior: PriorConfig::default() }
    }
}

/// A density together with its posterior draws.
#[derive(Clone, Debug)]
pub struct FittedModel {
    pub density: JointDensity,
    pub fit: Fit,
}

impl FittedModel {
    pub fn run(data: &Dataset, method: FusionMethod, cfg: &FitConfig) -> Result<Self> {
        let density = JointDensity::new(data, method, &cfg.prior)?;
        let fit = run_nuts(&density, &cfg.nuts)?;
        Ok(FittedModel { density, fit })
    }

    pub fn yield_draws(&self) -> Vec<f64> {
        self.fit.column("yield_kt").expect("yield is always sampled")
    }

    /// Posterior mean of the effective exponent of every present modality.
    pub fn gamma_mean(&self) -> Vec<(Modality, f64)> {
        let rows: Vec<_> = self.fit.rows().map(|r| self.density.unpack(r)).collect();
        self.density
            .modalities()
            .iter()
            .map(|m| (*m, rows.iter().map(|p| p.gamma[m.index()]).sum::<f64>() / rows.len() as f64))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// posterior predictive checks

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpcResult {
    pub modality: Modality,
    pub discrepancy: String,
    /// Mean over draws of the observed discrepancy (it depends on the parameters).
    pub t_obs: f64,
    pub t_obs_draws: Vec<f64>,
    pub t_rep: Vec<f64>,
    pub p_bayes: f64,
    pub mid_p: f64,
    pub se: f64,
}

/// `(p, mid-p, se)` of paired observed and replicated discrepancies.
pub fn ppc_pvalues(t_obs: &[f64], t_rep: &[f64]) -> Result<(f64, f64, f64)> {
    if t_obs.len() != t_rep.len() || t_obs.is_empty() {
        return Err(Error::InvalidArgument("ppc needs equal, nonzero numbers of observed and replicated values".into()));
    }
    let s = t_obs.len() as f64;
    let (mut ge, mut gt, mut eq) = (0usize, 0usize, 0usize);
    for (o, r) in t_obs.iter().zip(t_rep) {
        if r > o {
            gt += 1;
            ge += 1;
        } else if r == o {
            eq += 1;
            ge += 1;
        }
    }
    let p = ge as f64 / s;
    let mid = (gt as f64 + 0.5 * eq as f64) / s;
    Ok((p, mid, (p * (1.0 - p) / s).sqrt()))
}

fn discrepancy_name(m: Modality) -> &'static str {
    match m {
        Modality::Seismic => "squared standardized magnitude residual",
        Modality::Crater => "squared standardized log-diameter residual",
        Modality::Sar => "mean negative Student-t log density",
        Modality::Vlm => "mean cross-entropy",
    }
}

/// `S` rows spread evenly over the pooled draws.
fn thinned_rows(fit: &Fit, s: usize) -> Vec<&Vec<f64>> {
    let rows: Vec<&Vec<f64>> = fit.rows().collect();
    let n = rows.len();
    (0..s).map(|i| rows[(i * n / s).min(n - 1)]).collect()
}

/// Posterior predictive check of one modality over `s` draws.
///
/// For each draw the modality's data are simulated through its forward model
/// and the discrepancy of the replicate is compared with that of the data at
/// the same parameters. VLM replicates are categorical labels drawn from the
/// predicted bin probabilities.
pub fn ppc(model: &FittedModel, data: &Dataset, modality: Modality, s: usize, seed: u64) -> Result<PpcResult> {
    if !data.modalities().contains(&modality) || !model.density.modalities().contains(&modality) {
        return Err(Error::MissingModality(modality.name()));
    }
    if s == 0 || model.fit.n_draws() == 0 {
        return Err(Error::InvalidArgument("ppc needs at least one draw and one replicate".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let link = *model.density.link();
    let mut t_obs = Vec::with_capacity(s);
    let mut t_rep = Vec::with_capacity(s);
    for row in thinned_rows(&model.fit, s) {
        let p = model.density.unpack(row);
        let y = YieldKt::new(p.yield_kt)?;
        let (o, r) = match modality {
            Modality::Seismic => {
                let mw = data.seismic.as_ref().expect("present").mw_obs;
                let e: f64 = StandardNormal.sample(&mut rng);
                (((mw - link.magnitude(p.yield_kt)) / p.sigma_m).powi(2), e * e)
            }
            Modality::Crater => {
                let c = data.crater.as_ref().expect("present");
                let mu = physics::crater_mu_log10(p.yield_kt);
                let obs: f64 = [c.width_m, c.length_m].iter().map(|d| ((d.log10() - mu) / p.sigma_c).powi(2)).sum();
                let rep: f64 = (0..2).map(|_| StandardNormal.sample(&mut rng)).map(|e: f64| e * e).sum();
                (obs, rep)
            }
            Modality::Sar => {
                let scale = p.sigma_sar / 100.0;
                let t = StudentsT::new(0.0, scale, p.nu).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                let draw_t = rand_distr::StudentT::new(p.nu).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                let mut obs = 0.0;
                let mut rep = 0.0;
                for b in &data.sar {
                    let psi = physics::kb_incident_overpressure(b.range_m, y)?;
                    let z_mu = p.k_slope * (physics::psi_to_kpa(psi).log10() - p.p50_kpa.log10());
                    let q = b.damage_pct / 100.0;
                    let z = (q / (1.0 - q)).ln();
                    let z_rep = z_mu + scale * draw_t.sample(&mut rng);
                    obs -= t.ln_pdf(z - z_mu);
                    rep -= t.ln_pdf(z_rep - z_mu);
                }
                let n = data.sar.len() as f64;
                (obs / n, rep / n)
            }
            Modality::Vlm => {
                let mut obs = 0.0;
                let mut rep = 0.0;
                for r in &data.vlm {
                    let pi = vlm_bin_probs(physics::kb_incident_overpressure(r.range_m, y)?, p.sigma_dex);
                    obs -= r.pmf.iter().zip(&pi).filter(|(q, _)| **q > 0.0).map(|(q, p)| q * p.ln()).sum::<f64>();
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut k = pi.len() - 1;
                    for (j, pj) in pi.iter().enumerate() {
                        acc += pj;
                        if u < acc {
                            k = j;
                            break;
                        }
                    }
                    rep -= pi[k].ln();
                }
                let n = data.vlm.len() as f64;
                (obs / n, rep / n)
            }
        };
        t_obs.push(o);
        t_rep.push(r);
    }
    let (p_bayes, mid_p, se) = ppc_pvalues(&t_obs, &t_rep)?;
    Ok(PpcResult {
        modality,
        discrepancy: discrepancy_name(modality).to_string(),
        t_obs: stats::mean(&t_obs),
        t_obs_draws: t_obs,
        t_rep,
        p_bayes,
        mid_p,
        se,
    })
}

// ---------------------------------------------------------------------------
// KL divergence and leave-one-modality-out

/// Grid size of the KL estimator.
pub const KL_GRID: usize = 512;
/// Density floor applied before taking logs.
pub const KL_FLOOR: f64 = 1e-300;

/// `KL(p || q)` in nats between two sample sets, from Silverman-bandwidth
/// KDEs on a shared grid with trapezoidal integration.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() < 2 || q.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: p.len().min(q.len()) });
    }
    let lo = p.iter().chain(q).copied().fold(f64::INFINITY, f64::min);
    let hi = p.iter().chain(q).copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::ZeroVariance("KL input draws are degenerate".into()));
    }
    let grid = stats::linspace(lo, hi, KL_GRID);
    let dx = grid[1] - grid[0];
    let density = |x: &[f64]| -> Result<Vec<f64>> {
        let bw = stats::silverman_bandwidth(x);
        if !(bw > 0.0) {
            return Err(Error::ZeroVariance("KL input draws are constant".into()));
        }
        let d: Vec<f64> = stats::kde_on_grid(x, bw, &grid).into_iter().map(|v| v.max(KL_FLOOR)).collect();
        let mass = trapezoid(&d, dx);
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::NonFinite("KDE mass"));
        }
        Ok(d.into_iter().map(|v| v / mass).collect())
    };
    let (dp, dq) = (density(p)?, density(q)?);
    let integrand: Vec<f64> = dp.iter().zip(&dq).map(|(a, b)| a * (a.ln() - b.ln())).collect();
    let kl = trapezoid(&integrand, dx);
    if kl < -1e-6 {
        return Err(Error::InvalidArgument(format!("KL estimate {kl} is negative beyond tolerance")));
    }
    Ok(kl.max(0.0))
}

fn trapezoid(y: &[f64], dx: f64) -> f64 {
    dx * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[y.len() - 1]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LooKlResult {
    pub modalities: Vec<Modality>,
    /// `KL(p_full || p_without_k)` of the yield marginal, nats.
    pub kl: Vec<f64>,
    pub gamma_mean: Vec<f64>,
    pub spearman: f64,
}

/// Refit with each modality removed and compare yield marginals to the full fit.
pub fn loo_kl(data: &Dataset, cfg: &FitConfig) -> Result<LooKlResult> {
    let present = data.modalities();
    if present.len() < 2 {
        return Err(Error::InvalidArgument("leave-one-out needs at least two modalities".into()));
    }
    let full = FittedModel::run(data, FusionMethod::DirichletGamma, cfg)?;
    let full_y = full.yield_draws();
    let gamma: Vec<f64> = full.gamma_mean().into_iter().map(|(_, g)| g).collect();
    let kl: Result<Vec<f64>> = present
        .par_iter()
        .map(|m| {
            let reduced = FittedModel::run(&data.without(*m), FusionMethod::DirichletGamma, cfg)?;
            kl_divergence(&full_y, &reduced.yield_draws())
        })
        .collect();
    let kl = kl?;
    let spearman = stats::spearman(&gamma, &kl)?;
    Ok(LooKlResult { modalities: present, kl, gamma_mean: gamma, spearman })
}

// ---------------------------------------------------------------------------
// WAIC, fixed weights and post-hoc fusers

/// Per-observation mean WAIC ELPD (`lppd - p_waic`) of one modality.
///
/// `pointwise[s][i]` is the log-likelihood of observation `i` at draw `s`;
/// observations are averaged with `obs_weights` (normalized here).
pub fn waic_mean_elpd(pointwise: &[Vec<f64>], obs_weights: &[f64]) -> Result<f64> {
    let s = pointwise.len();
    if s < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: s });
    }
    let n = obs_weights.len();
    if pointwise.iter().any(|r| r.len() != n) || n == 0 {
        return Err(Error::InvalidArgument("pointwise rows must match the observation count".into()));
    }
    let wsum: f64 = obs_weights.iter().sum();
    let mut elpd = 0.0;
    for i in 0..n {
        let col: Vec<f64> = pointwise.iter().map(|r| r[i]).collect();
        let m = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lppd = m + (col.iter().map(|v| (v - m).exp()).sum::<f64>() / s as f64).ln();
        let p_waic = stats::variance(&col);
        elpd += obs_weights[i] / wsum * (lppd - p_waic);
    }
    if !elpd.is_finite() {
        return Err(Error::NonFinite("WAIC ELPD"));
    }
    Ok(elpd)
}

/// Softmax of a vector (stable).
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// A single-modality fit reduced to what the post-hoc fusers may use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosthocInput {
    pub modality: Modality,
    pub yield_draws: Vec<f64>,
    /// Per-observation mean WAIC ELPD.
    pub elpd: f64,
    pub diagnostic_failure: bool,
}

impl PosthocInput {
    /// Fit `data` restricted to `modality` and score it by WAIC.
    pub fn fit(data: &Dataset, modality: Modality, cfg: &FitConfig) -> Result<Self> {
        let sub = data.only(modality);
        if sub.modalities().is_empty() {
            return Err(Error::MissingModality(modality.name()));
        }
        let model = FittedModel::run(&sub, FusionMethod::DirichletGamma, cfg)?;
        let mut pointwise = Vec::with_capacity(model.fit.n_draws());
        for row in model.fit.rows() {
            let p = model.density.unpack(row);
            let (_, l) = model.density.modality_logliks(&p)?.pop().expect("one modality");
            pointwise.push(l.per_observation);
        }
        let n = pointwise[0].len();
        let w = if modality == Modality::Vlm { vlm_weights(&sub.vlm) } else { vec![1.0; n] };
        Ok(PosthocInput {
            modality,
            yield_draws: model.yield_draws(),
            elpd: waic_mean_elpd(&pointwise, &w)?,
            diagnostic_failure: model.fit.diagnostic_failure(),
        })
    }
}

/// The four single-modality fits, in modality order.
pub fn single_modality_inputs(data: &Dataset, cfg: &FitConfig) -> Result<Vec<PosthocInput>> {
    if data.modalities().len() != 4 {
        return Err(Error::InvalidArgument("all four modalities are required".into()));
    }
    Modality::ALL.par_iter().map(|m| PosthocInput::fit(data, *m, cfg)).collect()
}

/// Fixed trust weights: softmax of the single-modality mean ELPDs.
pub fn fixed_gamma_weights(data: &Dataset, cfg: &FitConfig) -> Result<[f64; 4]> {
    let inputs = single_modality_inputs(data, cfg)?;
    Ok(weights_from_elpd(&inputs.iter().map(|i| i.elpd).collect::<Vec<_>>()))
}

pub fn weights_from_elpd(elpd: &[f64]) -> [f64; 4] {
    let w = softmax(elpd);
    [w[0], w[1], w[2], w[3]]
}

/// Pooled yield draws with modality `i` contributing `floor(w_i N)` draws,
/// `w_i` proportional to `exp(ELPD_i)`; the remainder goes to the largest weight.
pub fn bma_fuse(inputs: &[PosthocInput], n_total: usize) -> Result<Vec<f64>> {
    if inputs.is_empty() || inputs.iter().any(|i| i.yield_draws.is_empty()) {
        return Err(Error::InvalidArgument("bma needs nonempty draw sets".into()));
    }
    let w = softmax(&inputs.iter().map(|i| i.elpd).collect::<Vec<_>>());
    let mut counts: Vec<usize> = w.iter().map(|v| (v * n_total as f64).floor() as usize).collect();
    let best = w.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).expect("nonempty");
    counts[best] += n_total - counts.iter().sum::<usize>();
    let mut out = Vec::with_capacity(n_total);
    for (inp, c) in inputs.iter().zip(counts) {
        let n = inp.yield_draws.len();
        out.extend((0..c).map(|j| inp.yield_draws[(j * n / c.max(1)) % n]));
    }
    Ok(out)
}

/// Gaussian summary returned by covariance intersection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiSummary {
    pub mean: f64,
    pub var: f64,
}

impl CiSummary {
    pub fn interval_95(&self) -> (f64, f64) {
        let h = 1.959_963_984_540_054 * self.var.sqrt();
        (self.mean - h, self.mean + h)
    }
}

/// Covariance intersection of Gaussian approximations `(mean, var)`.
pub fn ci_fuse_moments(moments: &[(f64, f64)]) -> Result<CiSummary> {
    if moments.is_empty() {
        return Err(Error::InvalidArgument("covariance intersection needs inputs".into()));
    }
    if moments.iter().any(|(m, v)| !m.is_finite() || !(*v > 0.0)) {
        return Err(Error::ZeroVariance("covariance intersection input has zero variance".into()));
    }
    let inv: Vec<f64> = moments.iter().map(|(_, v)| 1.0 / v).collect();
    let total: f64 = inv.iter().sum();
    let omega: Vec<f64> = inv.iter().map(|p| p / total).collect();
    let lambda: f64 = omega.iter().zip(&inv).map(|(o, p)| o * p).sum();
    let num: f64 = omega.iter().zip(moments).map(|(o, (m, v))| o * m / v).sum();
    Ok(CiSummary { mean: num / lambda, var: 1.0 / lambda })
}

/// Covariance intersection of the single-modality yield marginals.
pub fn ci_fuse(inputs: &[PosthocInput]) -> Result<CiSummary> {
    let moments: Vec<(f64, f64)> = inputs
        .iter()
        .map(|i| {
            if i.yield_draws.len() < 2 {
                return Err(Error::TooFewSamples { needed: 2, got: i.yield_draws.len() });
            }
            Ok((stats::mean(&i.yield_draws), stats::variance(&i.yield_draws)))
        })
        .collect::<Result<_>>()?;
    ci_fuse_moments(&moments)
}

// ---------------------------------------------------------------------------
// ablation harness

/// Outcome of one method on one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: String,
    pub excluded: bool,
    pub covered: bool,
    pub hdi_95: (f64, f64),
    pub median: f64,
    /// Posterior-mean exponent per modality (DirichletGamma only).
    pub gamma_mean: Option<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub seed: u64,
    pub outcomes: Vec<MethodOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub scenario: String,
    pub method: String,
    pub n_used: usize,
    pub n_excluded: usize,
    pub coverage: f64,
    pub median_width_kt: f64,
    pub median_rmse_kt: f64,
    pub median_gamma_corrupted: Option<f64>,
}

/// Median posterior-mean exponent of one modality under DirichletGamma.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismRow {
    pub scenario: String,
    pub modality: Modality,
    pub median_gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationOutput {
    pub rows: Vec<AblationRow>,
    pub mechanism: Vec<MechanismRow>,
    pub replicates: Vec<ReplicateRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub fit: FitConfig,
    pub n_replicates: usize,
    pub master_seed: u64,
    /// Posterior draws pooled by the BMA fuser.
    pub bma_draws: usize,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig { fit: FitConfig::reduced(0), n_replicates: 20, master_seed: 0, bma_draws: 4000 }
    }
}

/// Methods reported by default (plain product and CI are runnable but left out).
pub const DEFAULT_ABLATION_METHODS: [FusionMethod; 4] = [
    FusionMethod::SingleTemperature,
    FusionMethod::FixedGamma([0.25; 4]),
    FusionMethod::Bma,
    FusionMethod::DirichletGamma,
];

/// Replicate seeds derived from one master seed.
pub fn replicate_seeds(master_seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    (0..n).map(|_| rng.random()).collect()
}

fn outcome_from_draws(method: FusionMethod, draws: &[f64], truth: f64, excluded: bool) -> Result<MethodOutcome> {
    let hdi = stats::hdi(draws, 0.95)?;
    Ok(MethodOutcome {
        method: method.name().to_string(),
        excluded,
        covered: hdi.0 <= truth && truth <= hdi.1,
        hdi_95: hdi,
        median: stats::median(draws),
        gamma_mean: None,
    })
}

/// Fit every method on one generated dataset.
///
/// `FixedGamma` weights passed here are ignored: the harness estimates them
/// from single-modality WAIC on each replicate.
pub fn run_replicate(scenario: &ScenarioConfig, methods: &[FusionMethod], fit: &FitConfig, bma_draws: usize) -> Result<Vec<MethodOutcome>> {
    let data = generate(scenario)?;
    let truth = scenario.y_true_kt;
    let needs_singles = methods
        .iter()
        .any(|m| matches!(m, FusionMethod::FixedGamma(_) | FusionMethod::Bma | FusionMethod::CovarianceIntersection));
    let singles = if needs_singles { Some(single_modality_inputs(&data, fit)?) } else { None };
    let singles_failed = singles.as_ref().is_some_and(|s| s.iter().any(|i| i.diagnostic_failure));
    methods
        .iter()
        .map(|&method| match method {
            FusionMethod::Bma => {
                let s = singles.as_ref().expect("computed");
                outcome_from_draws(method, &bma_fuse(s, bma_draws)?, truth, singles_failed)
            }
            FusionMethod::CovarianceIntersection => {
                let c = ci_fuse(singles.as_ref().expect("computed"))?;
                let hdi = c.interval_95();
                Ok(MethodOutcome {
                    method: method.name().to_string(),
                    excluded: singles_failed,
                    covered: hdi.0 <= truth && truth <= hdi.1,
                    hdi_95: hdi,
                    median: c.mean,
                    gamma_mean: None,
                })
            }
            FusionMethod::FixedGamma(_) => {
                let s = singles.as_ref().expect("computed");
                let w = weights_from_elpd(&s.iter().map(|i| i.elpd).collect::<Vec<_>>());
                let m = FittedModel::run(&data, FusionMethod::FixedGamma(w), fit)?;
                outcome_from_draws(method, &m.yield_draws(), truth, singles_failed || m.fit.diagnostic_failure())
            }
            _ => {
                let m = FittedModel::run(&data, method, fit)?;
                let mut o = outcome_from_draws(method, &m.yield_draws(), truth, m.fit.diagnostic_failure())?;
                if method == FusionMethod::DirichletGamma {
                    let mut g = [f64::NAN; 4];
                    for (md, v) in m.gamma_mean() {
                        g[md.index()] = v;
                    }
                    o.gamma_mean = Some(g);
                }
                Ok(o)
            }
        })
        .collect()
}

/// Replicated fits of `methods` on fresh datasets from `scenario`.
///
/// Replicates whose fit reports a sampler diagnostic failure are excluded from
/// the aggregates of that method and counted in `n_excluded`.
pub fn run_ablation(scenario: ScenarioPreset, methods: &[FusionMethod], cfg: &AblationConfig) -> Result<AblationOutput> {
    run_ablation_config(scenario.name(), &scenario.config(), scenario.corrupted(), methods, cfg)
}

/// [`run_ablation`] for an arbitrary generator configuration.
pub fn run_ablation_config(
    name: &str,
    base: &ScenarioConfig,
    corrupted: Option<Modality>,
    methods: &[FusionMethod],
    cfg: &AblationConfig,
) -> Result<AblationOutput> {
    if cfg.n_replicates < 2 {
        return Err(Error::InvalidArgument("ablation needs at least two replicates".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods to compare".into()));
    }
    let seeds = replicate_seeds(cfg.master_seed, cfg.n_replicates);
    let replicates: Vec<ReplicateRecord> = seeds
        .par_iter()
        .enumerate()
        .map(|(index, &seed)| {
            let scenario = ScenarioConfig { seed, ..base.clone() };
            let fit = FitConfig { nuts: NutsConfig { seed, ..cfg.fit.nuts.clone() }, prior: cfg.fit.prior.clone() };
            let outcomes = run_replicate(&scenario, methods, &fit, cfg.bma_draws)?;
            Ok(ReplicateRecord { index, seed, outcomes })
        })
        .collect::<Result<_>>()?;

    let truth = base.y_true_kt;
    let mut rows = Vec::new();
    for (j, method) in methods.iter().enumerate() {
        let used: Vec<&MethodOutcome> = replicates.iter().map(|r| &r.outcomes[j]).filter(|o| !o.excluded).collect();
        let n_excluded = replicates.len() - used.len();
        if n_excluded > 0 {
            log::warn!("{name}/{}: {n_excluded} replicate(s) excluded after sampler diagnostic failure", method.name());
        }
        let med = |v: Vec<f64>| if v.is_empty() { f64::NAN } else { stats::median(&v) };
        let gamma_corrupted = match (method, corrupted) {
            (FusionMethod::DirichletGamma, Some(c)) => {
                Some(med(used.iter().filter_map(|o| o.gamma_mean.map(|g| g[c.index()])).collect()))
            }
            _ => None,
        };
        rows.push(AblationRow {
            scenario: name.to_string(),
            method: method.name().to_string(),
            n_used: used.len(),
            n_excluded,
            coverage: if used.is_empty() { f64::NAN } else { used.iter().filter(|o| o.covered).count() as f64 / used.len() as f64 },
            median_width_kt: med(used.iter().map(|o| o.hdi_95.1 - o.hdi_95.0).collect()),
            median_rmse_kt: med(used.iter().map(|o| (o.median - truth).abs()).collect()),
            median_gamma_corrupted: gamma_corrupted,
        });
    }

    let mut mechanism = Vec::new();
    if let Some(j) = methods.iter().position(|m| *m == FusionMethod::DirichletGamma) {
        for m in Modality::ALL {
            let v: Vec<f64> = replicates
                .iter()
                .map(|r| &r.outcomes[j])
                .filter(|o| !o.excluded)
                .filter_map(|o| o.gamma_mean.map(|g| g[m.index()]))
                .filter(|g| g.is_finite())
                .collect();
            if !v.is_empty() {
                mechanism.push(MechanismRow { scenario: name.to_string(), modality: m, median_gamma: stats::median(&v) });
            }
        }
    }
    Ok(AblationOutput { rows, mechanism, replicates })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One CSV line per ablation row.
pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], mut w: W) -> Result<()> {
    writeln!(w, "scenario,method,n_used,n_excluded,coverage,median_width_kt,median_rmse_kt,median_gamma_corrupted")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.6},{:.6},{:.6},{}",
            r.scenario,
            r.method,
            r.n_used,
            r.n_excluded,
            r.coverage,
            r.median_width_kt,
            r.median_rmse_kt,
            opt(r.median_gamma_corrupted)
        )?;
    }
    Ok(())
}

pub fn write_mechanism_csv<W: Write>(rows: &[MechanismRow], mut w: W) -> Result<()> {
    writeln!(w, "scenario,modality,median_gamma")?;
    for r in rows {
        writeln!(w, "{},{},{:.6}", r.scenario, r.modality, r.median_gamma)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Dirichlet concentration sweep

/// Concentrations swept by default.
pub const DEFAULT_ALPHAS: [f64; 6] = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub median_yield: f64,
    pub hdi_95: (f64, f64),
    pub gamma_mean: Vec<(Modality, f64)>,
    /// `KL(p_alpha || p_1)` of the yield marginal.
    pub kl_vs_baseline: f64,
}

impl AlphaRow {
    /// Spread of the posterior-mean exponents (max minus min).
    pub fn dispersion(&self) -> f64 {
        let g: Vec<f64> = self.gamma_mean.iter().map(|(_, v)| *v).collect();
        g.iter().copied().fold(f64::NEG_INFINITY, f64::max) - g.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Modalities ordered from most to least trusted.
    pub fn ranking(&self) -> Vec<Modality> {
        let mut g = self.gamma_mean.clone();
        g.sort_by(|a, b| b.1.total_cmp(&a.1));
        g.into_iter().map(|(m, _)| m).collect()
    }
}

/// Refit the DirichletGamma model under symmetric Dirichlet(alpha) priors.
pub fn alpha_sweep(data: &Dataset, alphas: &[f64], cfg: &FitConfig) -> Result<Vec<AlphaRow>> {
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidArgument("alphas must be positive".into()));
    }
    let fit_at = |alpha: f64| {
        let prior = PriorConfig { gamma: DirichletPrior::symmetric(alpha), ..cfg.prior.clone() };
        FittedModel::run(data, FusionMethod::DirichletGamma, &FitConfig { nuts: cfg.nuts.clone(), prior })
    };
    let models: Vec<FittedModel> = alphas.par_iter().map(|a| fit_at(*a)).collect::<Result<_>>()?;
    let baseline_draws = match alphas.iter().position(|a| *a == 1.0) {
        Some(i) => models[i].yield_draws(),
        None => fit_at(1.0)?.yield_draws(),
    };
    alphas
        .iter()
        .zip(&models)
        .map(|(alpha, m)| {
            let y = m.yield_draws();
            Ok(AlphaRow {
                alpha: *alpha,
                median_yield: stats::median(&y),
                hdi_95: stats::hdi(&y, 0.95)?,
                gamma_mean: m.gamma_mean(),
                kl_vs_baseline: kl_divergence(&y, &baseline_draws)?,
            })
        })
        .collect()
}

pub fn write_alpha_csv<W: Write>(rows: &[AlphaRow], mut w: W) -> Result<()> {
    let mods: Vec<Modality> = rows.first().map(|r| r.gamma_mean.iter().map(|(m, _)| *m).collect()).unwrap_or_default();
    let gcols: Vec<String> = mods.iter().map(|m| format!("gamma_{m}")).collect();
    writeln!(w, "alpha,median_yield_kt,hdi_lo_kt,hdi_hi_kt,{},kl_vs_alpha1", gcols.join(","))?;
    for r in rows {
        let g: Vec<String> = r.gamma_mean.iter().map(|(_, v)| format!("{v:.6}")).collect();
        writeln!(w, "{},{:.6},{:.6},{:.6},{},{:.6}", r.alpha, r.median_yield, r.hdi_95.0, r.hdi_95.1, g.join(","), r.kl_vs_baseline)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mid_p_conventions() {
        let obs = vec![1.0; 10];
        assert_eq!(ppc_pvalues(&obs, &[2.0; 10]).unwrap(), (1.0, 1.0, 0.0));
        let (p, mid, _) = ppc_pvalues(&obs, &[1.0; 10]).unwrap();
        assert_eq!((p, mid), (1.0, 0.5));
        let rep: Vec<f64> = (0..10).map(|i| i as f64 + 0.5).collect();
        let (p, mid, se) = ppc_pvalues(&obs, &rep).unwrap();
        assert_eq!(p, 0.9);
        assert_eq!(mid, 0.9);
        assert!((se - (0.9f64 * 0.1 / 10.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn softmax_saturates() {
        let w = softmax(&[0.0, 0.0, 0.0, -1e3]);
        assert!(w[3] < 1e-300);
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(weights_from_elpd(&[2.0; 4]), [0.25; 4]);
    }

    #[test]
    fn ci_equal_inputs_do_not_shrink() {
        let c = ci_fuse_moments(&[(0.3, 0.01); 4]).unwrap();
        assert!((c.mean - 0.3).abs() < 1e-15);
        assert!((c.var - 0.01).abs() < 1e-15);
        let c = ci_fuse_moments(&[(0.3, 0.01), (5.0, f64::INFINITY)]).unwrap();
        assert!((c.mean - 0.3).abs() < 1e-12);
        assert!(ci_fuse_moments(&[(0.3, 0.0)]).is_err());
    }
}
