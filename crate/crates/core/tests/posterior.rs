use proptest::prelude::*;
use yieldfusion::posterior::{joint_logdensity, pointwise};
use yieldfusion::priors::{log_prior, DirichletPrior};
use yieldfusion::synth::{generate, preset, ScenarioConfig, ScenarioPreset};
use yieldfusion::transform::stick_breaking_forward;
use yieldfusion::{Dataset, Error, FusionMethod, JointDensity, Modality, ParamVector, PriorConfig};

fn small_synthetic() -> Dataset {
    generate(&ScenarioConfig { n_sar: 30, n_vlm: 30, seed: 3, ..preset(ScenarioPreset::BaseClean) }).unwrap()
}

fn point(gamma: [f64; 4]) -> ParamVector {
    ParamVector {
        yield_kt: 0.4,
        sigma_m: 0.14,
        sigma_c: 0.09,
        p50_kpa: 55.0,
        k_slope: 2.2,
        sigma_sar: 25.0,
        nu: 6.0,
        sigma_dex: 0.18,
        gamma,
    }
}

/// `ln |det J|` of `u -> constrain(u)` with the last simplex entry dropped, by central differences.
fn numeric_log_det(jd: &JointDensity, u: &[f64]) -> f64 {
    let d = u.len();
    let h = 1e-6;
    let mut jac = vec![vec![0.0; d]; d];
    for j in 0..d {
        let mut a = u.to_vec();
        let mut b = u.to_vec();
        a[j] += h;
        b[j] -= h;
        let (ca, cb) = (jd.constrain(&a), jd.constrain(&b));
        for i in 0..d {
            jac[i][j] = (ca[i] - cb[i]) / (2.0 * h);
        }
    }
    // LU without pivoting is enough for these well-conditioned block-triangular maps
    let mut ld = 0.0;
    for k in 0..d {
        let piv = jac[k][k];
        ld += piv.abs().ln();
        for i in k + 1..d {
            let f = jac[i][k] / piv;
            for j in k..d {
                jac[i][j] -= f * jac[k][j];
            }
        }
    }
    ld
}

#[test]
fn dirichlet_assembly_identity() {
    let data = small_synthetic();
    let prior = PriorConfig::default();
    let jd = JointDensity::new(&data, FusionMethod::DirichletGamma, &prior).unwrap();
    let p = point([0.25; 4]);
    let u = jd.unconstrain(&p).unwrap();
    let lik: f64 = pointwise(&data, &p, jd.link()).unwrap().iter().map(|(_, l)| 0.25 * l.value).sum();
    let expected = log_prior(&p, &prior) + lik + numeric_log_det(&jd, &u);
    let got = jd.logp(&u);
    assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
    let t = jd.terms(&u);
    assert!((t.total() - got).abs() < 1e-12);
}

#[test]
fn plain_product_reconciles_with_dirichlet_terms() {
    let data = small_synthetic();
    let prior = PriorConfig::default();
    let dir = JointDensity::new(&data, FusionMethod::DirichletGamma, &prior).unwrap();
    let plain = JointDensity::new(&data, FusionMethod::PlainProduct, &prior).unwrap();
    assert_eq!(plain.dim(), 8);
    assert_eq!(dir.dim(), 11);
    let p = point([0.1, 0.2, 0.3, 0.4]);
    let u11 = dir.unconstrain(&p).unwrap();
    let u8 = plain.unconstrain(&p).unwrap();
    assert_eq!(&u11[..8], &u8[..]);
    let t = dir.terms(&u11);
    let mut g = [0.0; 4];
    let stick_lj = stick_breaking_forward(&u11[8..], &mut g);
    let sum_l: f64 = t.loglik.iter().flatten().sum();
    let expected = t.log_prior - 6f64.ln() + (t.log_jacobian - stick_lj) + sum_l;
    assert!((plain.logp(&u8) - expected).abs() < 1e-9);
}

#[test]
fn absent_modalities_leave_the_vector() {
    let data = small_synthetic().restricted(&[Modality::Seismic, Modality::Crater]);
    let prior = PriorConfig::default();
    let jd = JointDensity::new(&data, FusionMethod::DirichletGamma, &prior).unwrap();
    assert_eq!(jd.param_names(), vec!["yield_kt", "sigma_m", "sigma_c", "gamma_seismic", "gamma_crater"]);
    let p = point([0.3, 0.7, 0.0, 0.0]);
    let u = jd.unconstrain(&p).unwrap();
    let t = jd.terms(&u);
    assert!(t.loglik[2].is_none() && t.loglik[3].is_none());
    let expected_prior = prior.yield_kt.ln_pdf(0.4)
        + prior.sigma_m.ln_pdf(0.14)
        + prior.sigma_c.ln_pdf(0.09)
        + DirichletPrior::ln_pdf(&[1.0, 1.0], &[0.3, 0.7]);
    assert!((t.log_prior - expected_prior).abs() < 1e-12);
    // SAR and VLM priors no longer matter
    let mut other = prior.clone();
    other.p50_kpa.mu_ln = 3.0;
    other.sigma_dex.mu = 0.3;
    let jd2 = JointDensity::new(&data, FusionMethod::DirichletGamma, &other).unwrap();
    assert_eq!(jd2.logp(&u), jd.logp(&u));
}

#[test]
fn vanishing_weight_removes_data_dependence() {
    let data = small_synthetic();
    let prior = PriorConfig::default();
    let w = [0.3, 0.3, 1e-7, 0.4 - 1e-7];
    let jd = JointDensity::new(&data, FusionMethod::FixedGamma(w), &prior).unwrap();
    let mut flipped = data.clone();
    flipped.sar.iter_mut().for_each(|b| b.damage_pct = 100.0 - b.damage_pct);
    let jd_flip = JointDensity::new(&flipped, FusionMethod::FixedGamma(w), &prior).unwrap();
    let p = point(w);
    let u = jd.unconstrain(&p).unwrap();
    assert!((jd.logp(&u) - jd_flip.logp(&u)).abs() < 1e-4);

    // against the SAR-free model at matched constrained parameters
    let nosar = data.without(Modality::Sar);
    let jd_nosar = JointDensity::new(&nosar, FusionMethod::FixedGamma(w), &prior).unwrap();
    let un = jd_nosar.unconstrain(&p).unwrap();
    let (a, b) = (jd.terms(&u), jd_nosar.terms(&un));
    let sar_priors = prior.p50_kpa.ln_pdf(55.0) + prior.k_slope.ln_pdf(2.2) + prior.sigma_sar.ln_pdf(25.0) + prior.nu.ln_pdf(6.0);
    let lik = |t: &yieldfusion::posterior::DensityTerms| -> f64 {
        t.loglik.iter().zip(t.weights).filter_map(|(l, w)| l.map(|l| l * w)).sum()
    };
    let diff = (a.log_prior - sar_priors + lik(&a)) - (b.log_prior + lik(&b));
    assert!(diff.abs() < 1e-4, "{diff}");
}

#[test]
fn likelihoods_enter_linearly_in_their_weights() {
    let data = small_synthetic();
    let prior = PriorConfig::default();
    let w1 = [0.1, 0.2, 0.3, 0.4];
    let w2 = [0.4, 0.3, 0.2, 0.1];
    let a = JointDensity::new(&data, FusionMethod::FixedGamma(w1), &prior).unwrap();
    let b = JointDensity::new(&data, FusionMethod::FixedGamma(w2), &prior).unwrap();
    let p = point([0.25; 4]);
    let u = a.unconstrain(&p).unwrap();
    let (ta, tb) = (a.terms(&u), b.terms(&u));
    assert_eq!(ta.loglik, tb.loglik);
    let l: Vec<f64> = ta.loglik.iter().map(|v| v.unwrap()).collect();
    let delta: f64 = (0..4).map(|i| (w1[i] - w2[i]) * l[i]).sum();
    assert!((a.logp(&u) - b.logp(&u) - delta).abs() < 1e-9);
}

#[test]
fn gradients_match_finite_differences() {
    let data = small_synthetic();
    let prior = PriorConfig::default();
    for method in [FusionMethod::DirichletGamma, FusionMethod::SingleTemperature, FusionMethod::PlainProduct] {
        let jd = JointDensity::new(&data, method, &prior).unwrap();
        let err = jd.gradient_check(50, 9).unwrap();
        assert!(err < 1e-5, "{}: {err}", method.name());
    }
    let beirut = yieldfusion::data::beirut_summary_dataset();
    let jd = JointDensity::new(&beirut, FusionMethod::DirichletGamma, &prior).unwrap();
    assert!(jd.gradient_check(20, 1).unwrap() < 1e-5);
}

#[test]
fn post_hoc_fusers_are_rejected() {
    let data = small_synthetic();
    let prior = PriorConfig::default();
    for m in [FusionMethod::Bma, FusionMethod::CovarianceIntersection] {
        assert!(matches!(JointDensity::new(&data, m, &prior), Err(Error::UnsupportedMethod(_))));
    }
    assert!(JointDensity::new(&data, FusionMethod::FixedGamma([0.5, 0.5, 0.5, 0.0]), &prior).is_err());
    assert!(joint_logdensity(&data, FusionMethod::DirichletGamma, &prior, &[0.0; 10]).is_err());
    let (v, g) = joint_logdensity(&data, FusionMethod::DirichletGamma, &prior, &[0.0; 11]).unwrap();
    assert!(v.is_finite() && g.len() == 11);
}

#[test]
fn single_temperature_layout() {
    let data = small_synthetic();
    let jd = JointDensity::new(&data, FusionMethod::SingleTemperature, &PriorConfig::default()).unwrap();
    assert_eq!(jd.dim(), 9);
    assert_eq!(jd.param_names().last().unwrap(), "beta");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn constrain_unconstrain_round_trip(u in proptest::collection::vec(-3.0f64..3.0, 11)) {
        let data = small_synthetic();
        let jd = JointDensity::new(&data, FusionMethod::DirichletGamma, &PriorConfig::default()).unwrap();
        let back = jd.unconstrain(&jd.unpack(&jd.constrain(&u))).unwrap();
        for (a, b) in u.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-7, "{} vs {}", a, b);
        }
    }
}
