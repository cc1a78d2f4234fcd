use proptest::prelude::*;
use yieldfusion::sarprep::{composite, spikead, zonal_aggregate, Raster, SpikeAdConfig, SpikeMode, ZonalConfig};

fn grid(n: usize, f: impl Fn(usize, usize) -> f64) -> Raster {
    Raster::from_fn(n, n, 0.0, 0.0, 10.0, f).unwrap()
}

fn one_pass() -> SpikeAdConfig {
    SpikeAdConfig { iterations: 1, ..Default::default() }
}

#[test]
fn isolated_spike_is_removed() {
    let mut r = grid(21, |_, _| 0.0);
    r.values[10 * 21 + 10] = 100.0;
    let out = spikead(&[r], &one_pass()).unwrap();
    assert!(out.rasters[0].values.iter().all(|v| *v == 0.0));
    assert_eq!(out.changed, vec![1]);
}

#[test]
fn constant_raster_is_untouched() {
    let r = grid(15, |_, _| 0.37);
    let out = spikead(&[r.clone()], &SpikeAdConfig::default()).unwrap();
    assert_eq!(out.rasters[0], r);
    assert_eq!(out.changed, vec![0; 4]);
}

#[test]
fn checkerboard_interior_is_untouched() {
    let n = 31;
    let r = grid(n, |i, j| ((i + j) % 2) as f64);
    let out = spikead(&[r.clone()], &one_pass()).unwrap();
    for i in 5..n - 5 {
        for j in 5..n - 5 {
            assert_eq!(out.rasters[0].get(i, j), r.get(i, j), "({i}, {j})");
        }
    }
}

#[test]
fn temporal_mode_needs_a_stack() {
    let cfg = SpikeAdConfig { mode: SpikeMode::Temporal, ..Default::default() };
    let a = grid(4, |_, _| 1.0);
    assert!(spikead(&[a.clone(), a.clone()], &cfg).is_err());
    let b = Raster::from_fn(4, 5, 0.0, 0.0, 10.0, |_, _| 1.0).unwrap();
    assert!(spikead(&[a.clone(), a.clone(), b], &cfg).is_err());
    let mut spiky = a.clone();
    spiky.values[3] = 50.0;
    let out = spikead(&[a.clone(), spiky, a.clone(), a.clone()], &cfg).unwrap();
    assert!(out.rasters.iter().all(|r| *r == a));
}

#[test]
fn composite_is_scaled_mean() {
    let a = grid(3, |i, _| i as f64);
    let b = grid(3, |_, j| j as f64);
    let c = composite(&[a, b]).unwrap();
    assert_eq!(c.get(2, 2), 1.0);
    assert_eq!(c.get(1, 0), 0.25);
}

#[test]
fn full_damage_boxes_are_all_kept_at_percentile_zero() {
    let r = Raster::from_fn(200, 200, -1000.0, -1000.0, 10.0, |_, _| 1.0).unwrap();
    let cfg = ZonalConfig { percentile: 0.0, ..Default::default() };
    let out = zonal_aggregate(&r, (0.0, 0.0), &cfg).unwrap();
    let expected = (0..20)
        .flat_map(|i| (0..20).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            let (x, y) = (-1000.0 + 100.0 * i as f64 + 50.0, -1000.0 + 100.0 * j as f64 + 50.0);
            (200.0..=8000.0).contains(&f64::hypot(x, y))
        })
        .count();
    assert_eq!(out.boxes.len(), expected);
    assert!(out.boxes.iter().all(|b| b.damage_pct == 100.0));
    assert!(out.annulus.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn inverse_range_field_gives_decreasing_annulus_medians() {
    let r = Raster::from_fn(400, 400, -8000.0, -8000.0, 40.0, |i, j| {
        let (x, y) = (-8000.0 + 40.0 * (j as f64 + 0.5), -8000.0 + 40.0 * (i as f64 + 0.5));
        (100.0 / x.hypot(y)).min(1.0)
    })
    .unwrap();
    let out = zonal_aggregate(&r, (0.0, 0.0), &ZonalConfig::default()).unwrap();
    let n = ZonalConfig::default().n_annuli;
    let mut medians = Vec::new();
    for k in 0..n {
        let mut v: Vec<f64> = out.annulus.iter().zip(&out.boxes).filter(|(a, _)| **a == k).map(|(_, b)| b.damage_pct).collect();
        if v.is_empty() {
            continue;
        }
        v.sort_by(f64::total_cmp);
        medians.push(v[v.len() / 2]);
    }
    assert!(medians.len() >= 10);
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
    assert!(out.skipped_annuli + medians.len() == n);
}

#[test]
fn translation_invariant() {
    let f = |i: usize, j: usize| ((i * 7 + j * 13) % 17) as f64 / 17.0;
    let a = Raster::from_fn(120, 120, 0.0, 0.0, 20.0, f).unwrap();
    let b = Raster::from_fn(120, 120, 5000.0, -300.0, 20.0, f).unwrap();
    let oa = zonal_aggregate(&a, (1200.0, 1200.0), &ZonalConfig::default()).unwrap();
    let ob = zonal_aggregate(&b, (6200.0, 900.0), &ZonalConfig::default()).unwrap();
    assert_eq!(oa.annulus, ob.annulus);
    for (x, y) in oa.boxes.iter().zip(&ob.boxes) {
        assert!((x.range_m - y.range_m).abs() < 1e-6);
        assert_eq!(x.damage_pct, y.damage_pct);
    }
}

#[test]
fn iterating_to_a_fixed_point_is_idempotent() {
    let r = grid(25, |i, j| ((i * 31 + j * 17) % 23) as f64 + if (i * j) % 11 == 3 { 40.0 } else { 0.0 });
    let mut cur = r;
    for _ in 0..100 {
        let out = spikead(&[cur.clone()], &one_pass()).unwrap();
        cur = out.rasters[0].clone();
        if out.changed[0] == 0 {
            break;
        }
    }
    let again = spikead(&[cur.clone()], &one_pass()).unwrap();
    assert_eq!(again.changed, vec![0]);
    assert_eq!(again.rasters[0], cur);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn replacements_stay_within_the_window_range(vals in proptest::collection::vec(-50.0f64..50.0, 144)) {
        let r = Raster::new(12, 12, 0.0, 0.0, 1.0, vals).unwrap();
        let cfg = SpikeAdConfig { window: 5, iterations: 1, ..Default::default() };
        let out = spikead(&[r.clone()], &cfg).unwrap();
        for i in 0..12usize {
            for j in 0..12usize {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for a in i.saturating_sub(2)..(i + 3).min(12) {
                    for b in j.saturating_sub(2)..(j + 3).min(12) {
                        lo = lo.min(r.get(a, b));
                        hi = hi.max(r.get(a, b));
                    }
                }
                let v = out.rasters[0].get(i, j);
                prop_assert!(v >= lo && v <= hi);
            }
        }
    }
}
