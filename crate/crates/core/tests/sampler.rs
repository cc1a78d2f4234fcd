use yieldfusion::diagnostics::{split_rhat, summarize};
use yieldfusion::stats;
use yieldfusion::{run_nuts, LogDensity, NutsConfig};

struct StdNormal(usize);

impl LogDensity for StdNormal {
    fn dim(&self) -> usize {
        self.0
    }
    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut s = 0.0;
        for (g, v) in grad.iter_mut().zip(x) {
            *g = -v;
            s += v * v;
        }
        -0.5 * s
    }
}

/// Zero-mean Gaussian with covariance [[1, r s], [r s, s^2]].
struct Correlated {
    s: f64,
    r: f64,
}

impl LogDensity for Correlated {
    fn dim(&self) -> usize {
        2
    }
    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (s, r) = (self.s, self.r);
        let det = s * s * (1.0 - r * r);
        // precision matrix
        let (a, b, c) = (s * s / det, -r * s / det, 1.0 / det);
        grad[0] = -(a * x[0] + b * x[1]);
        grad[1] = -(b * x[0] + c * x[1]);
        -0.5 * (a * x[0] * x[0] + 2.0 * b * x[0] * x[1] + c * x[1] * x[1])
    }
}

#[test]
fn standard_normal_11d() {
    let cfg = NutsConfig { n_iter: 3000, n_warmup: 1000, seed: 11, ..Default::default() };
    let fit = run_nuts(&StdNormal(11), &cfg).unwrap();
    for j in 0..11 {
        let chains = fit.chain_columns(j);
        let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
        let m = stats::mean(&pooled);
        let sd = stats::variance(&pooled).sqrt();
        assert!(m.abs() < 0.05, "coord {j} mean {m}");
        assert!((0.95..=1.05).contains(&sd), "coord {j} sd {sd}");
        assert!(split_rhat(&chains).unwrap() < 1.01);
    }
    let a = fit.mean_accept_stat();
    assert!((0.90..=0.99).contains(&a), "accept {a}");
    assert_eq!(fit.n_divergent(), 0);
    let again = run_nuts(&StdNormal(11), &cfg).unwrap();
    assert_eq!(fit, again);
}

#[test]
fn correlated_gaussian_covariance() {
    let (s, r) = (3.0, 0.8);
    let cfg = NutsConfig { n_chains: 4, n_iter: 3500, n_warmup: 1000, seed: 5, ..Default::default() };
    let fit = run_nuts(&Correlated { s, r }, &cfg).unwrap();
    assert_eq!(fit.n_draws(), 10_000);
    let x = fit.column("x0").unwrap();
    let y = fit.column("x1").unwrap();
    let (mx, my) = (stats::mean(&x), stats::mean(&y));
    let n = x.len() as f64 - 1.0;
    let cxx = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
    let cyy = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n;
    let cxy = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    assert!((cxx / 1.0 - 1.0).abs() < 0.05, "cxx {cxx}");
    assert!((cyy / (s * s) - 1.0).abs() < 0.05, "cyy {cyy}");
    assert!((cxy / (r * s) - 1.0).abs() < 0.05, "cxy {cxy}");
}

#[test]
fn summary_of_known_target() {
    let cfg = NutsConfig { n_chains: 2, n_iter: 1500, n_warmup: 500, seed: 2, ..Default::default() };
    let fit = run_nuts(&StdNormal(2), &cfg).unwrap();
    let s = summarize(&fit).unwrap();
    let p = s.get("x0").unwrap();
    assert!(p.hdi_95.0 < -1.7 && p.hdi_95.1 > 1.7);
    assert!(p.mode.abs() < 0.3 && p.median.abs() < 0.1);
    assert!(p.ess_bulk > 500.0);
}

#[test]
fn csv_export_has_chain_column() {
    let cfg = NutsConfig { n_chains: 2, n_iter: 120, n_warmup: 20, seed: 1, ..Default::default() };
    let fit = run_nuts(&StdNormal(2), &cfg).unwrap();
    let mut buf = Vec::new();
    fit.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("chain,x0,x1"));
    assert_eq!(lines.count(), 200);
}
