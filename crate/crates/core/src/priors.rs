//! Prior distributions for yield, trust weights and modality hyperparameters.

use std::f64::consts::{LN_10, PI};

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::scalar::Real;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Normal(mu, sd) restricted to `[lo, hi]` and renormalized. Either bound may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncNormal {
    pub mu: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncNormal {
    pub fn new(mu: f64, sd: f64, lo: f64, hi: f64) -> Self {
        TruncNormal { mu, sd, lo, hi }
    }

    fn cdf_bounds(&self) -> (f64, f64) {
        let n = std_normal();
        (n.cdf((self.lo - self.mu) / self.sd), n.cdf((self.hi - self.mu) / self.sd))
    }

    /// `ln` of the retained normal mass.
    pub fn ln_mass(&self) -> f64 {
        let (a, b) = self.cdf_bounds();
        (b - a).ln()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn ln_pdf<T: Real>(&self, x: T) -> T {
        if !self.contains(x.value()) {
            return T::neg_infinity();
        }
        let z = (x - T::lit(self.mu)) / T::lit(self.sd);
        T::lit(-LN_SQRT_2PI - self.sd.ln() - self.ln_mass()) - z * z / T::lit(2.0)
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (a, b) = self.cdf_bounds();
        let u: f64 = rng.random();
        let p = (a + u * (b - a)).clamp(1e-300, 1.0 - 1e-16);
        (self.mu + self.sd * std_normal().inverse_cdf(p)).clamp(self.lo, self.hi)
    }
}

/// `log10 Y ~ TruncNormal(mu, sd, upper = log10 upper_kt)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YieldPrior {
    pub log10_mu: f64,
    pub log10_sd: f64,
    pub upper_kt: f64,
}

impl Default for YieldPrior {
    fn default() -> Self {
        YieldPrior { log10_mu: 0.0, log10_sd: 1.0, upper_kt: 2.75 }
    }
}

impl YieldPrior {
    pub fn log10_dist(&self) -> TruncNormal {
        TruncNormal::new(self.log10_mu, self.log10_sd, f64::NEG_INFINITY, self.upper_kt.log10())
    }

    /// Density of `Y` itself, including the `1 / (Y ln 10)` change of variables.
    pub fn ln_pdf<T: Real>(&self, y: T) -> T {
        if !(y.value() > 0.0 && y.value() <= self.upper_kt) {
            return T::neg_infinity();
        }
        let l = y.log10();
        self.log10_dist().ln_pdf(l) - y.ln() - T::lit(LN_10.ln())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        10f64.powf(self.log10_dist().sample(rng)).min(self.upper_kt)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    pub mu_ln: f64,
    pub sd_ln: f64,
}

impl LogNormal {
    pub fn ln_pdf<T: Real>(&self, x: T) -> T {
        if !(x.value() > 0.0) {
            return T::neg_infinity();
        }
        let lx = x.ln();
        let z = (lx - T::lit(self.mu_ln)) / T::lit(self.sd_ln);
        T::lit(-LN_SQRT_2PI - self.sd_ln.ln()) - lx - z * z / T::lit(2.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>().clamp(1e-300, 1.0 - 1e-16);
        (self.mu_ln + self.sd_ln * std_normal().inverse_cdf(u)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfNormal {
    pub scale: f64,
}

impl HalfNormal {
    pub fn ln_pdf<T: Real>(&self, x: T) -> T {
        if !(x.value() >= 0.0) {
            return T::neg_infinity();
        }
        let z = x / T::lit(self.scale);
        T::lit(0.5 * (2.0 / PI).ln() - self.scale.ln()) - z * z / T::lit(2.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>().min(1.0 - 1e-16);
        self.scale * std_normal().inverse_cdf(0.5 + 0.5 * u)
    }
}

/// `shift + Exponential(mean)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftedExponential {
    pub shift: f64,
    pub mean: f64,
}

impl ShiftedExponential {
    pub fn ln_pdf<T: Real>(&self, x: T) -> T {
        if !(x.value() > self.shift) {
            return T::neg_infinity();
        }
        T::lit(-self.mean.ln()) - (x - T::lit(self.shift)) / T::lit(self.mean)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.shift - self.mean * (1.0 - u).ln()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

impl BetaPrior {
    pub fn ln_pdf<T: Real>(&self, x: T) -> T {
        let v = x.value();
        if !(v > 0.0 && v < 1.0) {
            return T::neg_infinity();
        }
        let ln_b = self.a.ln_gamma_f64() + self.b.ln_gamma_f64() - (self.a + self.b).ln_gamma_f64();
        T::lit(self.a - 1.0) * x.ln() + T::lit(self.b - 1.0) * (T::one() - x).ln() - T::lit(ln_b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = Gamma::new(self.a, 1.0).expect("shape").sample(rng);
        let y = Gamma::new(self.b, 1.0).expect("shape").sample(rng);
        x / (x + y)
    }
}

trait LnGammaF64 {
    fn ln_gamma_f64(self) -> f64;
}

impl LnGammaF64 for f64 {
    fn ln_gamma_f64(self) -> f64 {
        statrs::function::gamma::ln_gamma(self)
    }
}

/// Dirichlet over the trust-weight simplex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletPrior {
    /// Concentrations in modality order (seismic, crater, sar, vlm).
    pub alpha: [f64; 4],
}

impl Default for DirichletPrior {
    fn default() -> Self {
        DirichletPrior { alpha: [1.0; 4] }
    }
}

impl DirichletPrior {
    pub fn symmetric(alpha: f64) -> Self {
        DirichletPrior { alpha: [alpha; 4] }
    }

    /// Log density on the simplex spanned by `alphas` (a subset of modalities).
    pub fn ln_pdf<T: Real>(alphas: &[f64], gamma: &[T]) -> T {
        if gamma.iter().any(|g| !(g.value() > 0.0)) {
            return T::neg_infinity();
        }
        let a0: f64 = alphas.iter().sum();
        let ln_norm = a0.ln_gamma_f64() - alphas.iter().map(|a| a.ln_gamma_f64()).sum::<f64>();
        let mut acc = T::lit(ln_norm);
        for (a, g) in alphas.iter().zip(gamma) {
            if *a != 1.0 {
                acc = acc + T::lit(a - 1.0) * g.ln();
            }
        }
        acc
    }

    pub fn sample<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Vec<f64> {
        let draws: Vec<f64> = alphas
            .iter()
            .map(|a| Gamma::new(*a, 1.0).expect("shape").sample(rng).max(1e-300))
            .collect();
        let s: f64 = draws.iter().sum();
        draws.into_iter().map(|d| d / s).collect()
    }
}

/// Every prior constant, overridable from JSON by field name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub yield_kt: YieldPrior,
    pub sigma_m: TruncNormal,
    pub sigma_c: TruncNormal,
    pub p50_kpa: LogNormal,
    pub k_slope: HalfNormal,
    pub sigma_sar: TruncNormal,
    pub nu: ShiftedExponential,
    pub sigma_dex: TruncNormal,
    pub gamma: DirichletPrior,
    /// Prior on the shared temperature of the single-temperature ablation.
    pub beta: BetaPrior,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            yield_kt: YieldPrior::default(),
            sigma_m: TruncNormal::new(0.13, 0.01, 0.05, 0.30),
            sigma_c: TruncNormal::new(0.08, 0.02, 0.02, 0.15),
            p50_kpa: LogNormal { mu_ln: 60f64.ln(), sd_ln: 0.8 },
            k_slope: HalfNormal { scale: 3.0 },
            sigma_sar: TruncNormal::new(20.0, 10.0, 5.0, 60.0),
            nu: ShiftedExponential { shift: 2.0, mean: 5.0 },
            sigma_dex: TruncNormal::new(0.15, 0.05, 0.05, 0.60),
            gamma: DirichletPrior::default(),
            beta: BetaPrior { a: 4.0, b: 2.0 },
        }
    }
}

impl PriorConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: PriorConfig = serde_json::from_str(s)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        let tns = [
            ("sigma_m", &self.sigma_m),
            ("sigma_c", &self.sigma_c),
            ("sigma_sar", &self.sigma_sar),
            ("sigma_dex", &self.sigma_dex),
        ];
        for (name, t) in tns {
            if !(t.sd > 0.0 && t.lo < t.hi && t.lo >= 0.0 && t.hi.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name}: need sd > 0 and 0 <= lo < hi < inf")));
            }
        }
        if !(self.yield_kt.log10_sd > 0.0 && self.yield_kt.upper_kt > 0.0) {
            return Err(Error::InvalidArgument("yield_kt: need log10_sd > 0 and upper_kt > 0".into()));
        }
        if self.gamma.alpha.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidArgument("gamma.alpha entries must be positive".into()));
        }
        if !(self.nu.mean > 0.0 && self.k_slope.scale > 0.0 && self.p50_kpa.sd_ln > 0.0) {
            return Err(Error::InvalidArgument("scale parameters must be positive".into()));
        }
        Ok(())
    }
}

/// The eleven unknowns of the joint problem, in constrained space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub yield_kt: f64,
    pub sigma_m: f64,
    pub sigma_c: f64,
    pub p50_kpa: f64,
    pub k_slope: f64,
    pub sigma_sar: f64,
    pub nu: f64,
    pub sigma_dex: f64,
    /// Trust weights on the open simplex, order (seismic, crater, sar, vlm).
    pub gamma: [f64; 4],
}

impl ParamVector {
    pub fn sample_prior<R: Rng + ?Sized>(prior: &PriorConfig, rng: &mut R) -> Self {
        let g = DirichletPrior::sample(&prior.gamma.alpha, rng);
        ParamVector {
            yield_kt: prior.yield_kt.sample(rng),
            sigma_m: prior.sigma_m.sample(rng),
            sigma_c: prior.sigma_c.sample(rng),
            p50_kpa: prior.p50_kpa.sample(rng),
            k_slope: prior.k_slope.sample(rng),
            sigma_sar: prior.sigma_sar.sample(rng),
            nu: prior.nu.sample(rng),
            sigma_dex: prior.sigma_dex.sample(rng),
            gamma: [g[0], g[1], g[2], g[3]],
        }
    }
}

/// Joint prior log density of all eleven unknowns (`-inf` outside the support).
///
/// The trust weights contribute the Dirichlet density on the 3-simplex.
pub fn log_prior(p: &ParamVector, prior: &PriorConfig) -> f64 {
    let s = (p.gamma.iter().sum::<f64>() - 1.0).abs();
    if s > 1e-9 {
        return f64::NEG_INFINITY;
    }
    prior.yield_kt.ln_pdf(p.yield_kt)
        + prior.sigma_m.ln_pdf(p.sigma_m)
        + prior.sigma_c.ln_pdf(p.sigma_c)
        + prior.p50_kpa.ln_pdf(p.p50_kpa)
        + prior.k_slope.ln_pdf(p.k_slope)
        + prior.sigma_sar.ln_pdf(p.sigma_sar)
        + prior.nu.ln_pdf(p.nu)
        + prior.sigma_dex.ln_pdf(p.sigma_dex)
        + DirichletPrior::ln_pdf(&prior.gamma.alpha, &p.gamma)
}
