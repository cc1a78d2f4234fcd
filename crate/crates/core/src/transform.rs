//! Bijections between constrained parameters and the unconstrained sampling space.

use crate::error::{Error, Result};
use crate::priors::{ParamVector, PriorConfig};
use crate::scalar::Real;

/// Map from one unbounded real to a constrained scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarMap {
    /// `lo + (hi - lo) * sigmoid(u)`
    Interval { lo: f64, hi: f64 },
    /// `lo + exp(u)`
    Lower { lo: f64 },
}

impl ScalarMap {
    /// Constrained value and `ln |dx/du|`.
    #[inline]
    pub fn forward<T: Real>(&self, u: T) -> (T, T) {
        match *self {
            ScalarMap::Interval { lo, hi } => {
                let w = hi - lo;
                let s = u.sigmoid();
                let lj = T::lit(w.ln()) + u.ln_sigmoid() + (-u).ln_sigmoid();
                (T::lit(lo) + T::lit(w) * s, lj)
            }
            ScalarMap::Lower { lo } => (T::lit(lo) + u.exp(), u),
        }
    }

    pub fn inverse(&self, x: f64) -> f64 {
        match *self {
            ScalarMap::Interval { lo, hi } => {
                let t = (x - lo) / (hi - lo);
                (t / (1.0 - t)).ln()
            }
            ScalarMap::Lower { lo } => (x - lo).ln(),
        }
    }
}

/// Stick-breaking map from `K - 1` reals to the open `K`-simplex.
///
/// Coordinate `k` is `logit(gamma_k / (1 - sum_{j<k} gamma_j))`, so the
/// barycenter of the 4-simplex maps to `(logit 1/4, logit 1/3, logit 1/2)`.
pub fn stick_breaking_forward<T: Real>(y: &[T], out: &mut [T]) -> T {
    debug_assert_eq!(out.len(), y.len() + 1);
    let mut ln_rem = T::zero();
    let mut lj = T::zero();
    for (k, yk) in y.iter().enumerate() {
        let ln_z = yk.ln_sigmoid();
        let ln_1mz = (-*yk).ln_sigmoid();
        out[k] = (ln_rem + ln_z).exp();
        lj = lj + ln_rem + ln_z + ln_1mz;
        ln_rem = ln_rem + ln_1mz;
    }
    out[y.len()] = ln_rem.exp();
    lj
}

pub fn stick_breaking_inverse(gamma: &[f64]) -> Vec<f64> {
    let mut rem = 1.0;
    let mut y = Vec::with_capacity(gamma.len().saturating_sub(1));
    for g in &gamma[..gamma.len() - 1] {
        let z = g / rem;
        y.push((z / (1.0 - z)).ln());
        rem -= g;
    }
    y
}

/// Coordinate maps for the eight scalar unknowns, derived from the prior bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarMaps {
    pub yield_kt: ScalarMap,
    pub sigma_m: ScalarMap,
    pub sigma_c: ScalarMap,
    pub p50_kpa: ScalarMap,
    pub k_slope: ScalarMap,
    pub sigma_sar: ScalarMap,
    pub nu: ScalarMap,
    pub sigma_dex: ScalarMap,
}

impl ScalarMaps {
    pub fn from_prior(p: &PriorConfig) -> Self {
        let iv = |lo: f64, hi: f64| ScalarMap::Interval { lo, hi };
        ScalarMaps {
            yield_kt: iv(0.0, p.yield_kt.upper_kt),
            sigma_m: iv(p.sigma_m.lo, p.sigma_m.hi),
            sigma_c: iv(p.sigma_c.lo, p.sigma_c.hi),
            p50_kpa: ScalarMap::Lower { lo: 0.0 },
            k_slope: ScalarMap::Lower { lo: 0.0 },
            sigma_sar: iv(p.sigma_sar.lo, p.sigma_sar.hi),
            nu: ScalarMap::Lower { lo: p.nu.shift },
            sigma_dex: iv(p.sigma_dex.lo, p.sigma_dex.hi),
        }
    }

    fn in_order(&self) -> [ScalarMap; 8] {
        [
            self.yield_kt,
            self.sigma_m,
            self.sigma_c,
            self.p50_kpa,
            self.k_slope,
            self.sigma_sar,
            self.nu,
            self.sigma_dex,
        ]
    }
}

fn scalars(p: &ParamVector) -> [f64; 8] {
    [p.yield_kt, p.sigma_m, p.sigma_c, p.p50_kpa, p.k_slope, p.sigma_sar, p.nu, p.sigma_dex]
}

/// The full 11-coordinate unconstrained vector: eight scalars then three stick-breaking coordinates.
pub fn to_unconstrained(p: &ParamVector, maps: &ScalarMaps) -> Result<[f64; 11]> {
    let s = scalars(p);
    if s.iter().chain(p.gamma.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("parameter vector"));
    }
    let mut u = [0.0; 11];
    for (i, (m, v)) in maps.in_order().iter().zip(s).enumerate() {
        u[i] = m.inverse(v);
    }
    let y = stick_breaking_inverse(&p.gamma);
    u[8..].copy_from_slice(&y);
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("parameter vector lies on or outside the support boundary".into()));
    }
    Ok(u)
}

/// Inverse of [`to_unconstrained`], returning `ln |det J|` of the unconstrained-to-constrained map.
pub fn from_unconstrained(u: &[f64; 11], maps: &ScalarMaps) -> Result<(ParamVector, f64)> {
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("unconstrained vector"));
    }
    let mut x = [0.0; 8];
    let mut lj = 0.0;
    for (i, m) in maps.in_order().iter().enumerate() {
        let (v, l) = m.forward(u[i]);
        x[i] = v;
        lj += l;
    }
    let mut g = [0.0; 4];
    lj += stick_breaking_forward(&u[8..], &mut g);
    Ok((
        ParamVector {
            yield_kt: x[0],
            sigma_m: x[1],
            sigma_c: x[2],
            p50_kpa: x[3],
            k_slope: x[4],
            sigma_sar: x[5],
            nu: x[6],
            sigma_dex: x[7],
            gamma: g,
        },
        lj,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::ParamVector;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn barycenter_coordinates() {
        let y = stick_breaking_inverse(&[0.25; 4]);
        let expect = [(1.0f64 / 3.0).ln(), 0.5f64.ln(), 0.0];
        assert!((y[0] - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((y[0] + 1.0986).abs() < 1e-4);
        assert!((y[1] - expect[1]).abs() < 1e-12);
        assert!((y[1] + 0.6931).abs() < 1e-4);
        assert!(y[2].abs() < 1e-12);
    }

    #[test]
    fn round_trip_on_prior_draws() {
        let prior = PriorConfig::default();
        let maps = ScalarMaps::from_prior(&prior);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let p = ParamVector::sample_prior(&prior, &mut rng);
            let Ok(u) = to_unconstrained(&p, &maps) else { continue };
            let (q, _) = from_unconstrained(&u, &maps).unwrap();
            let a = scalars(&p).into_iter().chain(p.gamma);
            let b = scalars(&q).into_iter().chain(q.gamma);
            for (x, y) in a.zip(b) {
                worst = worst.max((x - y).abs() / x.abs().max(1.0));
            }
        }
        assert!(worst < 1e-10, "worst {worst}");
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let maps = ScalarMaps::from_prior(&PriorConfig::default());
        let mut u = [0.0; 11];
        u[3] = f64::NAN;
        assert!(from_unconstrained(&u, &maps).is_err());
    }

    /// Central-difference Jacobian determinant of the 11 -> 11 map, with the
    /// simplex represented by its first three coordinates.
    fn numeric_log_det(u: &[f64; 11], maps: &ScalarMaps) -> f64 {
        let f = |v: &[f64; 11]| {
            let (p, _) = from_unconstrained(v, maps).unwrap();
            let mut out = scalars(&p).to_vec();
            out.extend_from_slice(&p.gamma[..3]);
            out
        };
        let n = 11;
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let h = 1e-5;
            let mut up = *u;
            let mut dn = *u;
            up[j] += h;
            dn[j] -= h;
            let (a, b) = (f(&up), f(&dn));
            for i in 0..n {
                jac[i][j] = (a[i] - b[i]) / (2.0 * h);
            }
        }
        // LU with partial pivoting
        let mut ld = 0.0;
        for c in 0..n {
            let piv = (c..n).max_by(|&a, &b| jac[a][c].abs().partial_cmp(&jac[b][c].abs()).unwrap()).unwrap();
            jac.swap(c, piv);
            let d = jac[c][c];
            ld += d.abs().ln();
            for r in c + 1..n {
                let f = jac[r][c] / d;
                for k in c..n {
                    jac[r][k] -= f * jac[c][k];
                }
            }
        }
        ld
    }

    #[test]
    fn log_jacobian_matches_finite_differences() {
        let maps = ScalarMaps::from_prior(&PriorConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        use rand::Rng;
        for _ in 0..20 {
            let mut u = [0.0; 11];
            for v in u.iter_mut() {
                *v = rng.random_range(-2.0..2.0);
            }
            let (_, lj) = from_unconstrained(&u, &maps).unwrap();
            let num = numeric_log_det(&u, &maps);
            assert!((lj - num).abs() < 1e-5, "{lj} vs {num}");
        }
    }

    proptest! {
        #[test]
        fn stick_breaking_lands_on_simplex(y in proptest::array::uniform3(-30.0f64..30.0)) {
            let mut g = [0.0; 4];
            stick_breaking_forward(&y, &mut g);
            prop_assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(g.iter().all(|v| *v >= 0.0));
        }
    }
}
