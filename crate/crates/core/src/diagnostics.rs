//! Convergence diagnostics and posterior summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::Fit;
use crate::stats;

fn split_halves(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    chains
        .iter()
        .flat_map(|c| {
            let tail = c.len() - n;
            [c[..n].to_vec(), c[tail..].to_vec()]
        })
        .collect()
}

/// Rank-normalize the pooled draws and restore the chain layout.
fn rank_normalized(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let z = stats::rank_normalize(&pooled);
    let mut out = Vec::with_capacity(chains.len());
    let mut at = 0;
    for c in chains {
        out.push(z[at..at + c.len()].to_vec());
        at += c.len();
    }
    out
}

/// Classic potential scale reduction of equal-length chains.
fn rhat_basic(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| stats::mean(c)).collect();
    let b = n * stats::variance(&means);
    let w = chains.iter().map(|c| stats::variance(c)).sum::<f64>() / m;
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

fn check_shape(chains: &[Vec<f64>]) -> Result<()> {
    if chains.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: chains.len() });
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < 100 {
        return Err(Error::TooFewSamples { needed: 100, got: n });
    }
    Ok(())
}

/// Rank-normalized split-R-hat: the larger of the bulk and folded (tail) values.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    check_shape(chains)?;
    let halves = split_halves(chains);
    let bulk = rhat_basic(&rank_normalized(&halves));
    let pooled: Vec<f64> = halves.iter().flatten().copied().collect();
    let med = stats::median(&pooled);
    let folded: Vec<Vec<f64>> = halves.iter().map(|c| c.iter().map(|v| (v - med).abs()).collect()).collect();
    let tail = rhat_basic(&rank_normalized(&folded));
    let r = bulk.max(tail);
    Ok(if r.is_nan() { f64::INFINITY } else { r })
}

fn autocov(c: &[f64], lag: usize) -> f64 {
    let n = c.len();
    let m = stats::mean(c);
    (0..n - lag).map(|i| (c[i] - m) * (c[i + lag] - m)).sum::<f64>() / n as f64
}

/// Effective sample size of equal-length chains via Geyer's initial monotone sequence.
fn ess_raw(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let total = (m * n) as f64;
    let acov_at = |lag: usize| chains.iter().map(|c| autocov(c, lag)).sum::<f64>() / m as f64;
    let mean_var = acov_at(0) * n as f64 / (n as f64 - 1.0);
    let means: Vec<f64> = chains.iter().map(|c| stats::mean(c)).collect();
    let mut var_plus = mean_var * (n as f64 - 1.0) / n as f64;
    if m > 1 {
        var_plus += stats::variance(&means);
    }
    if !(var_plus > 0.0) {
        return f64::NAN;
    }
    let mut rho = vec![0.0; n + 2];
    let mut rho_even = 1.0;
    rho[0] = rho_even;
    let mut rho_odd = 1.0 - (mean_var - acov_at(1)) / var_plus;
    rho[1] = rho_odd;
    let mut s = 1;
    while s < n - 4 && rho_even + rho_odd > 0.0 {
        rho_even = 1.0 - (mean_var - acov_at(s + 1)) / var_plus;
        rho_odd = 1.0 - (mean_var - acov_at(s + 2)) / var_plus;
        if rho_even + rho_odd >= 0.0 {
            rho[s + 1] = rho_even;
            rho[s + 2] = rho_odd;
        }
        s += 2;
    }
    let max_s = s;
    if rho_even > 0.0 {
        rho[max_s + 1] = rho_even;
    }
    let mut t = 1;
    while t + 3 <= max_s {
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t] {
            rho[t + 1] = 0.5 * (rho[t - 1] + rho[t]);
            rho[t + 2] = rho[t + 1];
        }
        t += 2;
    }
    let tau = -1.0 + 2.0 * rho[..max_s].iter().sum::<f64>() + rho[max_s + 1];
    (total / tau).min(total * total.log10())
}

/// Bulk effective sample size (rank-normalized split chains).
pub fn bulk_ess(chains: &[Vec<f64>]) -> Result<f64> {
    check_shape(chains)?;
    Ok(ess_raw(&rank_normalized(&split_halves(chains))))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub mode: f64,
    pub hdi_95: (f64, f64),
    pub rhat: f64,
    pub ess_bulk: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub params: Vec<ParamSummary>,
    pub n_draws: usize,
    pub n_divergent: usize,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Summaries of every parameter of a fit.
pub fn summarize(fit: &Fit) -> Result<PosteriorSummary> {
    let mut params = Vec::with_capacity(fit.names.len());
    for (j, name) in fit.names.iter().enumerate() {
        let chains = fit.chain_columns(j);
        let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
        let (rhat, ess_bulk) = if chains.len() >= 2 && chains[0].len() >= 100 {
            (split_rhat(&chains)?, bulk_ess(&chains)?)
        } else {
            (f64::NAN, f64::NAN)
        };
        params.push(ParamSummary {
            name: name.clone(),
            mean: stats::mean(&pooled),
            median: stats::median(&pooled),
            mode: stats::kde_mode(&pooled),
            hdi_95: stats::hdi(&pooled, 0.95)?,
            rhat,
            ess_bulk,
        });
    }
    Ok(PosteriorSummary { params, n_draws: fit.n_draws(), n_divergent: fit.n_divergent() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iid(seed: u64, m: usize, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    #[test]
    fn rhat_of_iid_chains() {
        let c = iid(1, 4, 1000);
        assert!(split_rhat(&c).unwrap() < 1.01);
    }

    #[test]
    fn rhat_flags_offset_chain() {
        let mut c = iid(2, 4, 1000);
        c[3].iter_mut().for_each(|v| *v += 10.0);
        assert!(split_rhat(&c).unwrap() > 1.5);
    }

    #[test]
    fn ess_of_iid_draws() {
        let c = iid(3, 4, 1000);
        let e = bulk_ess(&c).unwrap();
        assert!((e / 4000.0 - 1.0).abs() < 0.2, "ess {e}");
    }

    #[test]
    fn ess_of_ar1_matches_theory() {
        // AR(1) with phi = 0.9 has ESS/N = (1 - phi) / (1 + phi)
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi: f64 = 0.9;
        let c: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..5000)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        x = phi * x + (1.0 - phi * phi).sqrt() * e;
                        x
                    })
                    .collect()
            })
            .collect();
        let e = bulk_ess(&c).unwrap() / 20000.0;
        let theory = (1.0 - phi) / (1.0 + phi);
        assert!((e / theory - 1.0).abs() < 0.25, "{e} vs {theory}");
    }

    #[test]
    fn shape_errors() {
        assert!(split_rhat(&iid(5, 1, 500)).is_err());
        assert!(bulk_ess(&iid(5, 4, 50)).is_err());
    }
}
