//! Joint log-density of the fused model for each fusion method.
//!
//! The sampled vector holds only the unknowns the data can inform: yield,
//! the hyperparameters of the modalities that are present, and the weight
//! coordinates of the chosen method (stick-breaking coordinates for the
//! learned simplex weights, one logit for the single temperature).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Modality};
use crate::error::{Error, Result};
use crate::likelihood::{self, CraterTerm, ModalityLogLik, SarTerm, SeismicTerm, VlmTerm};
use crate::physics::{self, MagnitudeLink};
use crate::priors::{DirichletPrior, ParamVector, PriorConfig};
use crate::scalar::{Dual, Real};
use crate::transform::{stick_breaking_forward, stick_breaking_inverse, ScalarMap, ScalarMaps};

/// How per-modality likelihoods are weighted in the joint density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FusionMethod {
    /// Every likelihood at full weight.
    PlainProduct,
    /// One shared exponent with a Beta prior.
    SingleTemperature,
    /// Constant weights in modality order (seismic, crater, sar, vlm).
    FixedGamma([f64; 4]),
    /// Simplex weights learned under a Dirichlet prior.
    DirichletGamma,
    /// Post-hoc model averaging of single-modality fits.
    Bma,
    /// Post-hoc covariance intersection of single-modality fits.
    CovarianceIntersection,
}

impl FusionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FusionMethod::PlainProduct => "plain",
            FusionMethod::SingleTemperature => "single",
            FusionMethod::FixedGamma(_) => "fixed",
            FusionMethod::DirichletGamma => "dirichlet",
            FusionMethod::Bma => "bma",
            FusionMethod::CovarianceIntersection => "ci",
        }
    }

    /// Parse a method name; `fixed` gets uniform weights until estimated.
    pub fn parse(s: &str) -> Option<FusionMethod> {
        Some(match s {
            "plain" | "plain_product" => FusionMethod::PlainProduct,
            "single" | "single_temperature" => FusionMethod::SingleTemperature,
            "fixed" | "fixed_gamma" => FusionMethod::FixedGamma([0.25; 4]),
            "dirichlet" | "dirichlet_gamma" => FusionMethod::DirichletGamma,
            "bma" => FusionMethod::Bma,
            "ci" | "covariance_intersection" => FusionMethod::CovarianceIntersection,
            _ => return None,
        })
    }

    /// Whether the method defines a joint density (as opposed to a post-hoc fuser).
    pub fn is_joint(&self) -> bool {
        !matches!(self, FusionMethod::Bma | FusionMethod::CovarianceIntersection)
    }
}

/// Names of the eight scalar unknowns, in canonical order.
pub const SCALAR_NAMES: [&str; 8] = ["yield_kt", "sigma_m", "sigma_c", "p50_kpa", "k_slope", "sigma_sar", "nu", "sigma_dex"];

const IDX_YIELD: usize = 0;
const IDX_SIGMA_M: usize = 1;
const IDX_SIGMA_C: usize = 2;
const IDX_P50: usize = 3;
const IDX_K: usize = 4;
const IDX_SIGMA_SAR: usize = 5;
const IDX_NU: usize = 6;
const IDX_SIGMA_DEX: usize = 7;

/// Scalar indices a modality's likelihood depends on, besides yield.
fn hyper_indices(m: Modality) -> &'static [usize] {
    match m {
        Modality::Seismic => &[IDX_SIGMA_M],
        Modality::Crater => &[IDX_SIGMA_C],
        Modality::Sar => &[IDX_P50, IDX_K, IDX_SIGMA_SAR, IDX_NU],
        Modality::Vlm => &[IDX_SIGMA_DEX],
    }
}

/// Decomposition of one density evaluation, for inspection and tests.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DensityTerms {
    /// Priors of the sampled unknowns, including the weight prior.
    pub log_prior: f64,
    /// `ln |det J|` of the unconstrained-to-constrained map.
    pub log_jacobian: f64,
    /// Untempered log-likelihood per modality (modality order; `None` when absent).
    pub loglik: [Option<f64>; 4],
    /// Exponent applied to each modality's likelihood.
    pub weights: [f64; 4],
}

impl DensityTerms {
    pub fn total(&self) -> f64 {
        let lik: f64 = self
            .loglik
            .iter()
            .zip(self.weights)
            .filter_map(|(l, w)| l.map(|l| w * l))
            .sum();
        self.log_prior + self.log_jacobian + lik
    }
}

/// Relative margin keeping the yield interval strictly inside the blast-table range.
const SUPPORT_MARGIN: f64 = 1e-9;

/// Yield interval on which every SAR box and VLM site stays inside the
/// Kingery-Bulmash scaled-distance range.
///
/// Outside it the SAR and VLM likelihoods are zero, so sampling the yield on
/// this interval leaves the posterior unchanged while keeping trajectories
/// off the cliff.
pub fn yield_support(data: &Dataset, upper_kt: f64) -> Result<(f64, f64)> {
    let ranges: Vec<f64> = data.sar.iter().map(|b| b.range_m).chain(data.vlm.iter().map(|r| r.range_m)).collect();
    if ranges.is_empty() {
        return Ok((0.0, upper_kt));
    }
    let offsets = ranges.iter().map(|r| physics::ln_scaled_distance(*r, 0.0));
    let (omin, omax) = offsets.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), o| (a.min(o), b.max(o)));
    let lo = (3.0 * (omax - physics::Z_EN_MAX.ln())).exp() * (1.0 + SUPPORT_MARGIN);
    let hi = ((3.0 * (omin - physics::Z_EN_MIN.ln())).exp() * (1.0 - SUPPORT_MARGIN)).min(upper_kt);
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "no yield below {upper_kt} kt keeps every site inside the blast-table range (need {lo:.4} to {hi:.4} kt)"
        )));
    }
    Ok((lo, hi))
}

/// Joint posterior density over an unconstrained vector.
#[derive(Clone, Debug)]
pub struct JointDensity {
    method: FusionMethod,
    prior: PriorConfig,
    link: MagnitudeLink,
    maps: [ScalarMap; 8],
    present: Vec<Modality>,
    /// Canonical scalar index of each leading coordinate.
    active: Vec<usize>,
    /// Dirichlet concentrations of the present modalities.
    alphas: Vec<f64>,
    seismic: Option<SeismicTerm>,
    crater: Option<CraterTerm>,
    sar: Option<SarTerm>,
    vlm: Option<VlmTerm>,
}

impl JointDensity {
    pub fn new(data: &Dataset, method: FusionMethod, prior: &PriorConfig) -> Result<Self> {
        Self::with_link(data, method, prior, MagnitudeLink::default())
    }

    pub fn with_link(data: &Dataset, method: FusionMethod, prior: &PriorConfig, link: MagnitudeLink) -> Result<Self> {
        match method {
            FusionMethod::Bma => return Err(Error::UnsupportedMethod("bma is a post-hoc fuser; use fuse-posthoc")),
            FusionMethod::CovarianceIntersection => {
                return Err(Error::UnsupportedMethod("covariance intersection is a post-hoc fuser; use fuse-posthoc"))
            }
            FusionMethod::FixedGamma(g) => {
                if g.iter().any(|v| !(*v >= 0.0)) || (g.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument("fixed weights must be nonnegative and sum to 1".into()));
                }
            }
            _ => {}
        }
        prior.check()?;
        let present = data.modalities();
        if present.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut active = vec![IDX_YIELD];
        for m in &present {
            active.extend_from_slice(hyper_indices(*m));
        }
        let sm = ScalarMaps::from_prior(prior);
        let (y_lo, y_hi) = yield_support(data, prior.yield_kt.upper_kt)?;
        Ok(JointDensity {
            method,
            prior: prior.clone(),
            link,
            maps: [ScalarMap::Interval { lo: y_lo, hi: y_hi }, sm.sigma_m, sm.sigma_c, sm.p50_kpa, sm.k_slope, sm.sigma_sar, sm.nu, sm.sigma_dex],
            alphas: present.iter().map(|m| prior.gamma.alpha[m.index()]).collect(),
            present,
            active,
            seismic: data.seismic.as_ref().map(|o| SeismicTerm::new(o, link)),
            crater: data.crater.as_ref().map(CraterTerm::new),
            sar: if data.sar.is_empty() { None } else { Some(SarTerm::new(&data.sar)?) },
            vlm: if data.vlm.is_empty() { None } else { Some(VlmTerm::new(&data.vlm)?) },
        })
    }

    pub fn method(&self) -> FusionMethod {
        self.method
    }

    pub fn prior(&self) -> &PriorConfig {
        &self.prior
    }

    pub fn link(&self) -> &MagnitudeLink {
        &self.link
    }

    pub fn modalities(&self) -> &[Modality] {
        &self.present
    }

    fn n_weight_coords(&self) -> usize {
        match self.method {
            FusionMethod::DirichletGamma => self.present.len() - 1,
            FusionMethod::SingleTemperature => 1,
            _ => 0,
        }
    }

    /// Length of the unconstrained vector.
    pub fn dim(&self) -> usize {
        self.active.len() + self.n_weight_coords()
    }

    /// Names of the entries returned by [`JointDensity::constrain`].
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.active.iter().map(|i| SCALAR_NAMES[*i].to_string()).collect();
        match self.method {
            FusionMethod::DirichletGamma => names.extend(self.present.iter().map(|m| format!("gamma_{}", m.name()))),
            FusionMethod::SingleTemperature => names.push("beta".into()),
            _ => {}
        }
        names
    }

    /// Density at `u`, with an optional breakdown into its parts.
    pub fn eval<T: Real>(&self, u: &[T], mut terms: Option<&mut DensityTerms>) -> T {
        debug_assert_eq!(u.len(), self.dim());
        let p = &self.prior;
        let mut x = [T::zero(); 8];
        let mut lj = T::zero();
        for (uj, &i) in u.iter().zip(&self.active) {
            let (v, l) = self.maps[i].forward(*uj);
            x[i] = v;
            lj = lj + l;
        }
        let mut lp = p.yield_kt.ln_pdf(x[IDX_YIELD]);
        for &i in &self.active[1..] {
            lp = lp
                + match i {
                    IDX_SIGMA_M => p.sigma_m.ln_pdf(x[i]),
                    IDX_SIGMA_C => p.sigma_c.ln_pdf(x[i]),
                    IDX_P50 => p.p50_kpa.ln_pdf(x[i]),
                    IDX_K => p.k_slope.ln_pdf(x[i]),
                    IDX_SIGMA_SAR => p.sigma_sar.ln_pdf(x[i]),
                    IDX_NU => p.nu.ln_pdf(x[i]),
                    _ => p.sigma_dex.ln_pdf(x[i]),
                };
        }

        let nw = self.n_weight_coords();
        let wu = &u[u.len() - nw..];
        let mut w = [T::zero(); 4];
        match self.method {
            FusionMethod::PlainProduct => self.present.iter().for_each(|m| w[m.index()] = T::one()),
            FusionMethod::FixedGamma(g) => self.present.iter().for_each(|m| w[m.index()] = T::lit(g[m.index()])),
            FusionMethod::SingleTemperature => {
                let beta = wu[0].sigmoid();
                lj = lj + wu[0].ln_sigmoid() + (-wu[0]).ln_sigmoid();
                lp = lp + p.beta.ln_pdf(beta);
                self.present.iter().for_each(|m| w[m.index()] = beta);
            }
            FusionMethod::DirichletGamma => {
                if self.present.len() == 1 {
                    w[self.present[0].index()] = T::one();
                } else {
                    let mut g = [T::zero(); 4];
                    let g = &mut g[..self.present.len()];
                    lj = lj + stick_breaking_forward(wu, g);
                    lp = lp + DirichletPrior::ln_pdf(&self.alphas, g);
                    for (m, gm) in self.present.iter().zip(g.iter()) {
                        w[m.index()] = *gm;
                    }
                }
            }
            FusionMethod::Bma | FusionMethod::CovarianceIntersection => unreachable!("rejected at construction"),
        }

        let ln_y = x[IDX_YIELD].ln();
        let mut total = lp + lj;
        let mut lik = [None; 4];
        for m in &self.present {
            let l = match m {
                Modality::Seismic => self.seismic.as_ref().map(|t| t.eval(ln_y, x[IDX_SIGMA_M])),
                Modality::Crater => self.crater.as_ref().map(|t| t.eval(ln_y, x[IDX_SIGMA_C], None)),
                Modality::Sar => self
                    .sar
                    .as_ref()
                    .map(|t| t.eval_local(ln_y, x[IDX_P50], x[IDX_K], x[IDX_SIGMA_SAR], x[IDX_NU])),
                Modality::Vlm => self.vlm.as_ref().map(|t| t.eval_local(ln_y, x[IDX_SIGMA_DEX])),
            }
            .expect("present modality has a term");
            lik[m.index()] = Some(l.value());
            total = total + w[m.index()] * l;
        }
        if let Some(t) = terms.as_deref_mut() {
            t.log_prior = lp.value();
            t.log_jacobian = lj.value();
            t.loglik = lik;
            t.weights = w.map(|v| v.value());
        }
        if total.value().is_nan() {
            return T::neg_infinity();
        }
        total
    }

    pub fn logp(&self, u: &[f64]) -> f64 {
        self.eval(u, None)
    }

    pub fn terms(&self, u: &[f64]) -> DensityTerms {
        let mut t = DensityTerms::default();
        self.eval(u, Some(&mut t));
        t
    }

    fn grad_n<const N: usize>(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        let x: [Dual<N>; N] = std::array::from_fn(|i| Dual::variable(u[i], i));
        let v = self.eval(&x, None);
        if v.re.is_finite() {
            grad.copy_from_slice(&v.eps);
        } else {
            grad.iter_mut().for_each(|g| *g = 0.0);
        }
        v.re
    }

    /// Density and its exact gradient; the gradient is zeroed where the density is not finite.
    pub fn logp_grad(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        match u.len() {
            1 => self.grad_n::<1>(u, grad),
            2 => self.grad_n::<2>(u, grad),
            3 => self.grad_n::<3>(u, grad),
            4 => self.grad_n::<4>(u, grad),
            5 => self.grad_n::<5>(u, grad),
            6 => self.grad_n::<6>(u, grad),
            7 => self.grad_n::<7>(u, grad),
            8 => self.grad_n::<8>(u, grad),
            9 => self.grad_n::<9>(u, grad),
            10 => self.grad_n::<10>(u, grad),
            11 => self.grad_n::<11>(u, grad),
            n => panic!("unsupported dimension {n}"),
        }
    }

    /// Constrained values in [`JointDensity::param_names`] order.
    pub fn constrain(&self, u: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = u.iter().zip(&self.active).map(|(uj, &i)| self.maps[i].forward(*uj).0).collect();
        let wu = &u[self.active.len()..];
        match self.method {
            FusionMethod::DirichletGamma => {
                let mut g = vec![0.0; self.present.len()];
                stick_breaking_forward(wu, &mut g);
                out.extend(g);
            }
            FusionMethod::SingleTemperature => out.push(Real::sigmoid(wu[0])),
            _ => {}
        }
        out
    }

    /// Full parameter vector from a constrained draw.
    ///
    /// Hyperparameters of absent modalities take the prior's central value,
    /// and `gamma` holds the effective exponent of each modality.
    pub fn unpack(&self, c: &[f64]) -> ParamVector {
        let c0 = prior_center(&self.prior);
        let mut s = [c0.yield_kt, c0.sigma_m, c0.sigma_c, c0.p50_kpa, c0.k_slope, c0.sigma_sar, c0.nu, c0.sigma_dex];
        for (v, &i) in c.iter().zip(&self.active) {
            s[i] = *v;
        }
        let rest = &c[self.active.len()..];
        let mut g = [0.0; 4];
        match self.method {
            FusionMethod::DirichletGamma => {
                if self.present.len() == 1 {
                    g[self.present[0].index()] = 1.0;
                } else {
                    for (m, v) in self.present.iter().zip(rest) {
                        g[m.index()] = *v;
                    }
                }
            }
            FusionMethod::SingleTemperature => self.present.iter().for_each(|m| g[m.index()] = rest[0]),
            FusionMethod::PlainProduct => self.present.iter().for_each(|m| g[m.index()] = 1.0),
            FusionMethod::FixedGamma(w) => self.present.iter().for_each(|m| g[m.index()] = w[m.index()]),
            _ => {}
        }
        ParamVector {
            yield_kt: s[0],
            sigma_m: s[1],
            sigma_c: s[2],
            p50_kpa: s[3],
            k_slope: s[4],
            sigma_sar: s[5],
            nu: s[6],
            sigma_dex: s[7],
            gamma: g,
        }
    }

    /// Unconstrained vector for a parameter vector (inverse of `constrain` + `unpack`).
    pub fn unconstrain(&self, p: &ParamVector) -> Result<Vec<f64>> {
        let s = [p.yield_kt, p.sigma_m, p.sigma_c, p.p50_kpa, p.k_slope, p.sigma_sar, p.nu, p.sigma_dex];
        let mut u: Vec<f64> = self.active.iter().map(|&i| self.maps[i].inverse(s[i])).collect();
        match self.method {
            FusionMethod::DirichletGamma if self.present.len() > 1 => {
                let g: Vec<f64> = self.present.iter().map(|m| p.gamma[m.index()]).collect();
                let tot: f64 = g.iter().sum();
                let g: Vec<f64> = g.iter().map(|v| v / tot).collect();
                u.extend(stick_breaking_inverse(&g));
            }
            FusionMethod::SingleTemperature => {
                let b = p.gamma[self.present[0].index()];
                u.push((b / (1.0 - b)).ln());
            }
            _ => {}
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("parameter vector lies on or outside the support boundary".into()));
        }
        Ok(u)
    }

    /// A random starting point drawn from the prior, in unconstrained space.
    pub fn prior_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        loop {
            let mut p = ParamVector::sample_prior(&self.prior, rng);
            match self.method {
                FusionMethod::DirichletGamma => {
                    let g = DirichletPrior::sample(&self.alphas, rng);
                    p.gamma = [0.0; 4];
                    for (m, v) in self.present.iter().zip(g) {
                        p.gamma[m.index()] = v;
                    }
                }
                FusionMethod::SingleTemperature => {
                    let b = self.prior.beta.sample(rng);
                    p.gamma = [b; 4];
                }
                _ => {}
            }
            if let Ok(u) = self.unconstrain(&p) {
                return u;
            }
        }
    }

    /// Untempered log-likelihood of each present modality, with pointwise terms.
    pub fn modality_logliks(&self, p: &ParamVector) -> Result<Vec<(Modality, ModalityLogLik)>> {
        let y = p.yield_kt;
        self.present
            .iter()
            .map(|m| {
                let l = match m {
                    Modality::Seismic => {
                        let t = self.seismic.as_ref().expect("present");
                        let v = t.eval(y.ln(), p.sigma_m);
                        ModalityLogLik { value: v, per_observation: vec![v] }
                    }
                    Modality::Crater => {
                        let mut per = Vec::new();
                        let v = self.crater.as_ref().expect("present").eval(y.ln(), p.sigma_c, Some(&mut per));
                        ModalityLogLik { value: v, per_observation: per }
                    }
                    Modality::Sar => {
                        let t = self.sar.as_ref().expect("present");
                        let mut per = Vec::with_capacity(t.len());
                        let v = t.eval(y.ln(), p.p50_kpa, p.k_slope, p.sigma_sar, p.nu, Some(&mut per));
                        if !v.is_finite() {
                            per = vec![f64::NEG_INFINITY; t.len()];
                        }
                        ModalityLogLik { value: v, per_observation: per }
                    }
                    Modality::Vlm => {
                        let t = self.vlm.as_ref().expect("present");
                        let mut per = Vec::with_capacity(t.len());
                        let v = t.eval(y.ln(), p.sigma_dex, Some(&mut per));
                        if !v.is_finite() {
                            per = vec![f64::NEG_INFINITY; t.len()];
                        }
                        ModalityLogLik { value: v, per_observation: per }
                    }
                };
                Ok((*m, l))
            })
            .collect()
    }

    /// Regime signature of every blast-dependent site, for smoothness checks.
    fn regime_signature(&self, ln_yield: f64) -> Option<(Option<usize>, Option<usize>)> {
        let a = match &self.sar {
            Some(t) => Some(t.regime_signature(ln_yield)?),
            None => None,
        };
        let b = match &self.vlm {
            Some(t) => Some(t.regime_signature(ln_yield)?),
            None => None,
        };
        Some((a, b))
    }

    /// Worst relative disagreement between the exact gradient and 7-point
    /// central differences over `n_points` prior draws.
    ///
    /// Points with a non-finite density, or whose difference stencil would
    /// move a blast site across a KB regime junction, are redrawn.
    pub fn gradient_check(&self, n_points: usize, seed: u64) -> Result<f64> {
        if n_points == 0 {
            return Err(Error::InvalidArgument("gradient_check needs at least one point".into()));
        }
        const H: f64 = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        let mut grad = vec![0.0; d];
        let mut worst: f64 = 0.0;
        let mut done = 0;
        let mut attempts = 0;
        while done < n_points {
            attempts += 1;
            if attempts > 1000 * n_points {
                return Err(Error::RedrawLimit("gradient check support points"));
            }
            let u = self.prior_draw(&mut rng);
            let f0 = self.logp_grad(&u, &mut grad);
            if !f0.is_finite() {
                continue;
            }
            let ln_y_at = |du: f64| self.maps[IDX_YIELD].forward(u[0] + du).0.ln();
            let sig = self.regime_signature(ln_y_at(0.0));
            if sig != self.regime_signature(ln_y_at(-3.0 * H)) || sig != self.regime_signature(ln_y_at(3.0 * H)) {
                continue;
            }
            let mut stencil_ok = true;
            let mut fd = vec![0.0; d];
            for (j, slot) in fd.iter_mut().enumerate() {
                let f = |k: f64| {
                    let mut v = u.clone();
                    v[j] += k * H;
                    self.logp(&v)
                };
                let (f1, f2, f3) = (f(1.0) - f(-1.0), f(2.0) - f(-2.0), f(3.0) - f(-3.0));
                if !(f1.is_finite() && f2.is_finite() && f3.is_finite()) {
                    stencil_ok = false;
                    break;
                }
                *slot = (45.0 * f1 - 9.0 * f2 + f3) / (60.0 * H);
            }
            if !stencil_ok {
                continue;
            }
            for (g, f) in grad.iter().zip(&fd) {
                worst = worst.max((g - f).abs() / f.abs().max(1.0));
            }
            done += 1;
        }
        Ok(worst)
    }
}

/// Central values of each prior, used to fill hyperparameters that no data inform.
pub fn prior_center(p: &PriorConfig) -> ParamVector {
    ParamVector {
        yield_kt: 10f64.powf(p.yield_kt.log10_mu).min(p.yield_kt.upper_kt),
        sigma_m: p.sigma_m.mu.clamp(p.sigma_m.lo, p.sigma_m.hi),
        sigma_c: p.sigma_c.mu.clamp(p.sigma_c.lo, p.sigma_c.hi),
        p50_kpa: p.p50_kpa.mu_ln.exp(),
        k_slope: p.k_slope.scale,
        sigma_sar: p.sigma_sar.mu.clamp(p.sigma_sar.lo, p.sigma_sar.hi),
        nu: p.nu.shift + p.nu.mean,
        sigma_dex: p.sigma_dex.mu.clamp(p.sigma_dex.lo, p.sigma_dex.hi),
        gamma: [0.25; 4],
    }
}

/// Convenience: the joint density of `data` under `method` evaluated at `u`.
pub fn joint_logdensity(data: &Dataset, method: FusionMethod, prior: &PriorConfig, u: &[f64]) -> Result<(f64, Vec<f64>)> {
    let jd = JointDensity::new(data, method, prior)?;
    if u.len() != jd.dim() {
        return Err(Error::InvalidArgument(format!("expected {} coordinates, got {}", jd.dim(), u.len())));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("unconstrained vector"));
    }
    let mut g = vec![0.0; u.len()];
    let v = jd.logp_grad(u, &mut g);
    Ok((v, g))
}

/// Pointwise log-likelihoods of all present modalities at a parameter vector.
pub fn pointwise(data: &Dataset, p: &ParamVector, link: &MagnitudeLink) -> Result<Vec<(Modality, ModalityLogLik)>> {
    let mut out = Vec::new();
    if let Some(o) = &data.seismic {
        out.push((Modality::Seismic, likelihood::seismic_loglik(o, p.yield_kt, p.sigma_m, link)));
    }
    if let Some(o) = &data.crater {
        out.push((Modality::Crater, likelihood::crater_loglik(o, p.yield_kt, p.sigma_c)));
    }
    if !data.sar.is_empty() {
        out.push((Modality::Sar, likelihood::sar_loglik(&data.sar, p.yield_kt, p.p50_kpa, p.k_slope, p.sigma_sar, p.nu)?));
    }
    if !data.vlm.is_empty() {
        out.push((Modality::Vlm, likelihood::vlm_loglik(&data.vlm, p.yield_kt, p.sigma_dex)?));
    }
    Ok(out)
}
