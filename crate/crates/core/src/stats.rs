//! Sample statistics shared by the sampler summaries and the validation suite.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

/// Linear-interpolation quantile of already sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let n = s.len();
    if n == 1 {
        return s[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn median(x: &[f64]) -> f64 {
    quantile_sorted(&sorted(x), 0.5)
}

/// Silverman's rule-of-thumb bandwidth `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
pub fn silverman_bandwidth(x: &[f64]) -> f64 {
    let s = sorted(x);
    let sd = variance(x).sqrt();
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (x.len() as f64).powf(-0.2)
}

/// Gaussian kernel density estimate evaluated on `grid`.
///
/// Samples are pre-binned onto a fine uniform mesh, which keeps the cost
/// linear in the sample count for the large pooled draw sets used here.
pub fn kde_on_grid(x: &[f64], bandwidth: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (x.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let n_bins = 4096;
    let width = (hi - lo) / n_bins as f64;
    if !(width > 0.0) || width > bandwidth / 20.0 {
        return grid
            .iter()
            .map(|g| x.iter().map(|v| (-0.5 * ((g - v) / bandwidth).powi(2)).exp()).sum::<f64>() * norm)
            .collect();
    }
    // linear binning
    let mut counts = vec![0.0; n_bins + 1];
    for v in x {
        let t = (v - lo) / width;
        let i = (t.floor() as usize).min(n_bins - 1);
        let f = t - i as f64;
        counts[i] += 1.0 - f;
        counts[i + 1] += f;
    }
    grid.iter()
        .map(|g| {
            counts
                .iter()
                .enumerate()
                .filter(|(_, c)| **c > 0.0)
                .map(|(i, c)| {
                    let z = (g - (lo + i as f64 * width)) / bandwidth;
                    if z.abs() > 10.0 {
                        0.0
                    } else {
                        c * (-0.5 * z * z).exp()
                    }
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Location of the peak of the Silverman-bandwidth KDE.
pub fn kde_mode(x: &[f64]) -> f64 {
    let bw = silverman_bandwidth(x);
    if !(bw > 0.0) {
        return median(x);
    }
    let s = sorted(x);
    let grid = linspace(s[0], s[s.len() - 1], 1024);
    let d = kde_on_grid(x, bw, &grid);
    // refine around the coarse peak
    let i = d.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let step = grid[1] - grid[0];
    let fine = linspace(grid[i] - step, grid[i] + step, 65);
    let df = kde_on_grid(x, bw, &fine);
    let j = df.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(j, _)| j).unwrap_or(32);
    fine[j]
}

/// Shortest interval holding `ceil(mass n)` sorted samples; ties go to the leftmost window.
pub fn hdi(x: &[f64], mass: f64) -> Result<(f64, f64)> {
    if x.len() < 100 {
        return Err(Error::TooFewSamples { needed: 100, got: x.len() });
    }
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::InvalidArgument(format!("hdi mass must lie in (0, 1), got {mass}")));
    }
    let s = sorted(x);
    let n = s.len();
    let k = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let mut best = 0;
    let mut width = f64::INFINITY;
    for i in 0..=n - k {
        let w = s[i + k - 1] - s[i];
        if w < width {
            width = w;
            best = i;
        }
    }
    Ok((s[best], s[best + k - 1]))
}

/// Average ranks (1-based), ties sharing their mean rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|a, b| x[*a].total_cmp(&x[*b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument("spearman needs two equal-length vectors of length >= 2".into()));
    }
    let r = pearson(&ranks(a), &ranks(b));
    if r.is_nan() {
        return Err(Error::ZeroVariance("spearman input is constant".into()));
    }
    Ok(r)
}

/// Rank-normalized values `Phi^-1((r - 3/8) / (n + 1/4))` of the pooled input.
pub fn rank_normalize(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    ranks(x).into_iter().map(|r| unit.inverse_cdf((r - 0.375) / (n + 0.25))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    #[test]
    fn hdi_on_uniform_grid() {
        let x: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = hdi(&x, 0.95).unwrap();
        assert_eq!(hi - lo, 94.0);
        assert_eq!(lo, 1.0);
        assert!(hdi(&x[..99], 0.95).is_err());
        assert!(hdi(&x, 1.0).is_err());
    }

    #[test]
    fn hdi_symmetric_and_skewed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (lo, hi) = hdi(&x, 0.95).unwrap();
        assert!((0.5 * (lo + hi) - mean(&x)).abs() < 0.1 * variance(&x).sqrt());
        let e: Vec<f64> = (0..20_000).map(|_| Exp::new(1.0).unwrap().sample(&mut rng)).collect();
        let (lo, _) = hdi(&e, 0.5).unwrap();
        assert!(lo < quantile_sorted(&sorted(&e), 0.05));
    }

    #[test]
    fn quantiles_and_ranks() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(ranks(&[10.0, 20.0, 10.0]), vec![1.5, 3.0, 1.5]);
    }

    #[test]
    fn spearman_examples() {
        let g = [0.278, 0.340, 0.219, 0.163];
        let kl = [0.130, 0.087, 0.180, 0.342];
        assert!((spearman(&g, &kl).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 4.0, 9.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kde_mode_of_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..20_000).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 3.0 + 0.5 * z }).collect();
        assert!((kde_mode(&x) - 3.0).abs() < 0.05);
        // binned and direct evaluation agree
        let bw = silverman_bandwidth(&x);
        let g = linspace(2.0, 4.0, 5);
        let direct: Vec<f64> = g
            .iter()
            .map(|gv| {
                x.iter().map(|v| (-0.5 * ((gv - v) / bw).powi(2)).exp()).sum::<f64>()
                    / (x.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt())
            })
            .collect();
        for (a, b) in kde_on_grid(&x, bw, &g).iter().zip(direct) {
            assert!((a - b).abs() < 1e-3 * b.max(1e-3));
        }
    }
}
