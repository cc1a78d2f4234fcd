//! Per-modality log-likelihoods.
//!
//! Each modality has a prepared evaluator (`*Term`) holding the data-only
//! precomputations, generic over [`Real`] so the same code yields values and
//! exact gradients. The free functions are the plain-`f64` entry points.

use std::f64::consts::{LN_10, PI};

use crate::data::{CraterObs, SarBox, SeismicObs, VlmRecord, N_BINS};
use crate::error::{Error, Result};
use crate::physics::{self, MagnitudeLink, KPA_PER_PSI};
use crate::scalar::{Dual, Real};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// VLM damage-category edges in psi; the outer edges are 0 and infinity.
pub const VLM_EDGES_PSI: [f64; N_BINS + 1] = [0.0, 0.04, 0.16, 0.40, 1.10, 2.10, 3.10, 5.10, 10.0, f64::INFINITY];

/// Representative overpressure per damage category, psi.
pub const VLM_BIN_PSI: [f64; N_BINS] = [0.0, 0.095, 0.28, 0.705, 1.55, 2.55, 4.05, 6.05, 8.0];

/// Entropy-weight clip band after median normalization.
pub const VLM_WEIGHT_CLIP: (f64, f64) = (0.25, 4.0);

/// A modality's log-likelihood with its pointwise contributions.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalityLogLik {
    pub value: f64,
    pub per_observation: Vec<f64>,
}

#[inline]
fn normal_ln_pdf<T: Real>(x: T, mu: T, sd: T) -> T {
    let z = (x - mu) / sd;
    -(sd.ln()) - z * z * T::lit(0.5) - T::lit(LN_SQRT_2PI)
}

// ---------------------------------------------------------------- seismic

#[derive(Clone, Debug)]
pub struct SeismicTerm {
    pub mw_obs: f64,
    pub link: MagnitudeLink,
}

impl SeismicTerm {
    pub fn new(obs: &SeismicObs, link: MagnitudeLink) -> Self {
        SeismicTerm { mw_obs: obs.mw_obs, link }
    }

    pub fn eval<T: Real>(&self, ln_yield: T, sigma_m: T) -> T {
        let mu = self.link.magnitude_from_ln_yield(ln_yield);
        normal_ln_pdf(T::lit(self.mw_obs), mu, sigma_m)
    }
}

pub fn seismic_loglik(obs: &SeismicObs, yield_kt: f64, sigma_m: f64, link: &MagnitudeLink) -> ModalityLogLik {
    let v = SeismicTerm::new(obs, *link).eval(yield_kt.ln(), sigma_m);
    ModalityLogLik { value: v, per_observation: vec![v] }
}

// ----------------------------------------------------------------- crater

#[derive(Clone, Debug)]
pub struct CraterTerm {
    pub log10_dims: [f64; 2],
}

impl CraterTerm {
    pub fn new(obs: &CraterObs) -> Self {
        CraterTerm { log10_dims: [obs.width_m.log10(), obs.length_m.log10()] }
    }

    pub fn eval<T: Real>(&self, ln_yield: T, sigma_c: T, per_obs: Option<&mut Vec<f64>>) -> T {
        // (log10 Y + 6) / 3
        let mu = (ln_yield.scale(1.0 / LN_10)).shift(6.0).scale(1.0 / 3.0);
        let a = normal_ln_pdf(T::lit(self.log10_dims[0]), mu, sigma_c);
        let b = normal_ln_pdf(T::lit(self.log10_dims[1]), mu, sigma_c);
        if let Some(out) = per_obs {
            out.extend([a.value(), b.value()]);
        }
        a + b
    }
}

pub fn crater_loglik(obs: &CraterObs, yield_kt: f64, sigma_c: f64) -> ModalityLogLik {
    let mut per = Vec::with_capacity(2);
    let v = CraterTerm::new(obs).eval(yield_kt.ln(), sigma_c, Some(&mut per));
    ModalityLogLik { value: v, per_observation: per }
}

// -------------------------------------------------------------------- SAR

/// `log10 P_kPa` at a box whose `ln Z_en` is `ln_z`.
#[inline]
fn log10_kpa<T: Real>(ln_z: T) -> Result<T> {
    Ok(physics::kb_ln_psi(ln_z)?.scale(1.0 / LN_10).shift(KPA_PER_PSI.log10()))
}

/// Expected damage percentage from the logistic vulnerability curve.
pub fn sar_vulnerability_mu(range_m: f64, yield_kt: f64, p50_kpa: f64, k_slope: f64) -> Result<f64> {
    let y = physics::YieldKt::new(yield_kt)?;
    let p = physics::psi_to_kpa(physics::kb_incident_overpressure(range_m, y)?);
    Ok(100.0 * Real::sigmoid(k_slope * (p.log10() - p50_kpa.log10())))
}

#[derive(Clone, Debug)]
pub struct SarTerm {
    /// `ln Z_en + ln(Y)/3` per box (independent of yield).
    ln_z_offset: Vec<f64>,
    /// Observed damage logits.
    z_obs: Vec<f64>,
}

impl SarTerm {
    pub fn new(boxes: &[SarBox]) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::EmptyObservations("SAR box list"));
        }
        Ok(SarTerm {
            ln_z_offset: boxes.iter().map(|b| physics::ln_scaled_distance(b.range_m, 0.0)).collect(),
            z_obs: boxes
                .iter()
                .map(|b| {
                    let y = b.damage_pct / 100.0;
                    (y / (1.0 - y)).ln()
                })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.z_obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_obs.is_empty()
    }

    pub fn z_obs(&self) -> &[f64] {
        &self.z_obs
    }

    /// Location logits `K (log10 P_kPa - log10 P50)`; `None` when a box leaves the KB range.
    pub fn locations<T: Real>(&self, ln_yield: T, p50: T, k: T) -> Option<Vec<T>> {
        let third = ln_yield.scale(1.0 / 3.0);
        let lp50 = p50.log10();
        self.ln_z_offset
            .iter()
            .map(|off| log10_kpa(T::lit(*off) - third).ok().map(|lp| k * (lp - lp50)))
            .collect()
    }

    pub fn regime_signature(&self, ln_yield: f64) -> Option<usize> {
        regime_signature(&self.ln_z_offset, ln_yield)
    }

    /// [`SarTerm::eval`] differentiated in its own five inputs, then
    /// spliced into the caller's derivative space.
    pub fn eval_local<T: Real>(&self, ln_yield: T, p50: T, k: T, sigma_sar: T, nu: T) -> T {
        let inputs = [ln_yield, p50, k, sigma_sar, nu];
        let x: [Dual<5>; 5] = std::array::from_fn(|i| Dual::variable(inputs[i].value(), i));
        let v = self.eval(x[0], x[1], x[2], x[3], x[4], None);
        if !v.re.is_finite() {
            return T::lit(v.re);
        }
        T::from_partials(v.re, &inputs, &v.eps)
    }

    /// Mean Student-t log density of the damage logits.
    pub fn eval<T: Real>(&self, ln_yield: T, p50: T, k: T, sigma_sar: T, nu: T, mut per_obs: Option<&mut Vec<f64>>) -> T {
        let third = ln_yield.scale(1.0 / 3.0);
        let lp50 = p50.log10();
        let inv_s = sigma_sar.scale(0.01).recip();
        let inv_nu = nu.recip();
        let half_nu1 = nu.shift(1.0).scale(0.5);
        let norm = half_nu1.ln_gamma() - nu.scale(0.5).ln_gamma() - (nu.scale(PI)).ln().scale(0.5) + inv_s.ln();
        let mut acc = T::zero();
        for (off, z) in self.ln_z_offset.iter().zip(&self.z_obs) {
            let Ok(lp) = log10_kpa(T::lit(*off) - third) else {
                return T::neg_infinity();
            };
            let r = (T::lit(*z) - k * (lp - lp50)) * inv_s;
            let t = (r * r * inv_nu).ln_1p();
            if let Some(out) = per_obs.as_deref_mut() {
                out.push(norm.value() - half_nu1.value() * t.value());
            }
            acc = acc + t;
        }
        let n = self.z_obs.len() as f64;
        norm - half_nu1 * acc.scale(1.0 / n)
    }
}

pub fn sar_loglik(boxes: &[SarBox], yield_kt: f64, p50_kpa: f64, k_slope: f64, sigma_sar: f64, nu: f64) -> Result<ModalityLogLik> {
    let term = SarTerm::new(boxes)?;
    let mut per = Vec::with_capacity(boxes.len());
    let v = term.eval(yield_kt.ln(), p50_kpa, k_slope, sigma_sar, nu, Some(&mut per));
    if v == f64::NEG_INFINITY {
        per = vec![f64::NEG_INFINITY; boxes.len()];
    }
    Ok(ModalityLogLik { value: v, per_observation: per })
}

// -------------------------------------------------------------------- VLM

/// Sum of KB regime indices over sites, `None` if any site is out of range.
///
/// Two yields with the same signature put every site on the same polynomial
/// piece, so the likelihood is smooth between them.
fn regime_signature(ln_z_offset: &[f64], ln_yield: f64) -> Option<usize> {
    ln_z_offset
        .iter()
        .map(|off| physics::regime_index((off - ln_yield / 3.0).exp()))
        .sum()
}

fn interior_log10_edges() -> [f64; N_BINS - 1] {
    let mut c = [0.0; N_BINS - 1];
    for (e, slot) in c.iter_mut().enumerate() {
        *slot = VLM_EDGES_PSI[e + 1].log10();
    }
    c
}

/// `ln pi_k` for all nine bins given `log10 P` (psi) and the spread.
///
/// Uses `sigma(a) - sigma(b) = sigma(a) sigma(-b) (1 - e^(b-a))` so every
/// bin stays finite however narrow the spread.
pub fn vlm_ln_bin_probs<T: Real>(log10_psi: T, sigma_dex: T) -> [T; N_BINS] {
    let c = interior_log10_edges();
    let inv = sigma_dex.recip();
    let x: Vec<T> = c.iter().map(|ce| (T::lit(*ce) - log10_psi) * inv).collect();
    let mut out = [T::zero(); N_BINS];
    out[0] = x[0].ln_sigmoid();
    out[N_BINS - 1] = (-x[N_BINS - 2]).ln_sigmoid();
    for k in 1..N_BINS - 1 {
        let gap = inv.scale(c[k - 1] - c[k]);
        out[k] = x[k].ln_sigmoid() + (-x[k - 1]).ln_sigmoid() + (-(gap.exp_m1())).ln();
    }
    out
}

/// Soft logistic binning of an overpressure into the nine damage categories.
pub fn vlm_bin_probs(p_psi: f64, sigma_dex: f64) -> [f64; N_BINS] {
    vlm_ln_bin_probs(p_psi.log10(), sigma_dex).map(f64::exp)
}

/// Shannon entropy in bits.
pub fn entropy_bits(pmf: &[f64]) -> f64 {
    -pmf.iter().filter(|q| **q > 0.0).map(|q| q * q.log2()).sum::<f64>()
}

pub fn vlm_raw_weight(pmf: &[f64]) -> f64 {
    1.0 / (1.0 + entropy_bits(pmf))
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Entropy weights divided by their median, then clipped.
pub fn vlm_weights(records: &[VlmRecord]) -> Vec<f64> {
    let raw: Vec<f64> = records.iter().map(|r| vlm_raw_weight(&r.pmf)).collect();
    if raw.is_empty() {
        return raw;
    }
    let m = median(&raw);
    raw.into_iter().map(|w| (w / m).clamp(VLM_WEIGHT_CLIP.0, VLM_WEIGHT_CLIP.1)).collect()
}

/// Probability-weighted representative overpressure of a damage PMF.
pub fn vlm_expected_psi(pmf: &[f64; N_BINS]) -> f64 {
    pmf.iter().zip(VLM_BIN_PSI).map(|(q, p)| q * p).sum()
}

#[derive(Clone, Debug)]
pub struct VlmTerm {
    ln_z_offset: Vec<f64>,
    pmf: Vec<[f64; N_BINS]>,
    /// Entropy weights normalized to sum to one.
    weight: Vec<f64>,
    /// Weighted mean PMF, for the data-independent gap terms.
    mean_pmf: [f64; N_BINS],
}

impl VlmTerm {
    pub fn new(records: &[VlmRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyObservations("VLM record list"));
        }
        let w = vlm_weights(records);
        let total: f64 = w.iter().sum();
        let weight: Vec<f64> = w.iter().map(|x| x / total).collect();
        let mut mean_pmf = [0.0; N_BINS];
        for (r, wi) in records.iter().zip(&weight) {
            for k in 0..N_BINS {
                mean_pmf[k] += wi * r.pmf[k];
            }
        }
        Ok(VlmTerm {
            ln_z_offset: records.iter().map(|r| physics::ln_scaled_distance(r.range_m, 0.0)).collect(),
            pmf: records.iter().map(|r| r.pmf).collect(),
            weight,
            mean_pmf,
        })
    }

    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn pmfs(&self) -> &[[f64; N_BINS]] {
        &self.pmf
    }

    /// `log10 P_psi` per record; `None` when a record leaves the KB range.
    pub fn log10_psi<T: Real>(&self, ln_yield: T) -> Option<Vec<T>> {
        let third = ln_yield.scale(1.0 / 3.0);
        self.ln_z_offset
            .iter()
            .map(|off| physics::kb_ln_psi(T::lit(*off) - third).ok().map(|l| l.scale(1.0 / LN_10)))
            .collect()
    }

    pub fn regime_signature(&self, ln_yield: f64) -> Option<usize> {
        regime_signature(&self.ln_z_offset, ln_yield)
    }

    /// [`VlmTerm::eval`] differentiated in `(ln Y, sigma_dex)` only.
    pub fn eval_local<T: Real>(&self, ln_yield: T, sigma_dex: T) -> T {
        let inputs = [ln_yield, sigma_dex];
        let v = self.eval(Dual::<2>::variable(ln_yield.value(), 0), Dual::variable(sigma_dex.value(), 1), None);
        if !v.re.is_finite() {
            return T::lit(v.re);
        }
        T::from_partials(v.re, &inputs, &v.eps)
    }

    /// Entropy-weighted mean cross-entropy term `sum_k q_k ln pi_k`.
    pub fn eval<T: Real>(&self, ln_yield: T, sigma_dex: T, mut per_obs: Option<&mut Vec<f64>>) -> T {
        let c = interior_log10_edges();
        let third = ln_yield.scale(1.0 / 3.0);
        let inv = sigma_dex.recip();
        // ln(1 - exp(-(c_k - c_{k-1}) / sigma)) for interior bins, shared by all records
        let mut gap = [T::zero(); N_BINS];
        for k in 1..N_BINS - 1 {
            gap[k] = (-(inv.scale(c[k - 1] - c[k]).exp_m1())).ln();
        }
        let mut acc = T::zero();
        for ((off, q), w) in self.ln_z_offset.iter().zip(&self.pmf).zip(&self.weight) {
            let Ok(lnp) = physics::kb_ln_psi(T::lit(*off) - third) else {
                return T::neg_infinity();
            };
            let l10 = lnp.scale(1.0 / LN_10);
            // edge e sits between bins e and e+1 (0-based interior edges)
            let mut li = T::zero();
            for (e, ce) in c.iter().enumerate() {
                let (lo_bin, hi_bin) = (q[e], q[e + 1]);
                if lo_bin == 0.0 && hi_bin == 0.0 {
                    continue;
                }
                let x = (T::lit(*ce) - l10) * inv;
                let ls = x.ln_sigmoid();
                // lo_bin * ln σ(x) + hi_bin * ln σ(-x), with ln σ(-x) = ln σ(x) - x
                li = li + ls.scale(lo_bin + hi_bin) - x.scale(hi_bin);
            }
            if let Some(out) = per_obs.as_deref_mut() {
                let g: f64 = (1..N_BINS - 1).map(|k| q[k] * gap[k].value()).sum();
                out.push(li.value() + g);
            }
            acc = acc + li.scale(*w);
        }
        for k in 1..N_BINS - 1 {
            acc = acc + gap[k].scale(self.mean_pmf[k]);
        }
        acc
    }
}

pub fn vlm_loglik(records: &[VlmRecord], yield_kt: f64, sigma_dex: f64) -> Result<ModalityLogLik> {
    let term = VlmTerm::new(records)?;
    let mut per = Vec::with_capacity(records.len());
    let v = term.eval(yield_kt.ln(), sigma_dex, Some(&mut per));
    if v == f64::NEG_INFINITY {
        per = vec![f64::NEG_INFINITY; records.len()];
    }
    Ok(ModalityLogLik { value: v, per_observation: per })
}
