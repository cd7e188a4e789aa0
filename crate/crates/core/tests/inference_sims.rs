use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tdid::estimators::estimate_tdid;
use tdid::inference::{nw_long_run_variance, t_test};
use tdid::multicontrol::{estimate_vector, multi_treated_estimates, pretrends_test_series};
use tdid::panel::Regime;
use tdid::pipeline::{estimate, EstimationSettings};
use tdid::transforms::estimate_detrended_series;
use tdid::{EstimatorKind, HacSpec, Panel, Series, TransformKind, WeightingScheme};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normals(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

fn ks_uniform(p: &mut [f64]) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / n - v).abs().max((v - i as f64 / n).abs()))
        .fold(0.0, f64::max)
}

fn gap_panel(x: Vec<f64>, n_pre: usize, n_post: usize) -> Panel {
    let n = x.len();
    Panel::new(
        Series::new("t", x),
        vec![Series::new("c", vec![0.0; n])],
        n_pre,
        n - n_pre - n_post,
        n_post,
    )
    .unwrap()
}

#[test]
fn white_noise_long_run_variance_is_its_variance() {
    let x = normals(&mut rng(1), 10_000);
    let v = nw_long_run_variance(&x, &HacSpec::auto()).unwrap().value;
    assert!((v - 1.0).abs() < 0.1, "{v}");
}

#[test]
fn white_noise_standard_error_matches_formula() {
    let x = normals(&mut rng(2), 20_001);
    let p = gap_panel(x, 10_000, 10_000);
    let est = estimate(&p, 0, EstimatorKind::Tdid, TransformKind::None, &EstimationSettings::default()).unwrap();
    let expected = (2.0f64 / 10_000.0).sqrt();
    let se = est.hac_se().unwrap();
    assert!((se / expected - 1.0).abs() < 0.1, "{se} vs {expected}");
}

#[test]
fn independent_controls_have_near_zero_covariance() {
    let mut r = rng(3);
    let n = 10_000;
    let controls = vec![Series::new("a", normals(&mut r, n)), Series::new("b", normals(&mut r, n))];
    let p = Panel::new(Series::new("t", vec![0.0; n]), controls, 5_000, 0, 5_000).unwrap();
    let v = estimate_vector(&p, &WeightingScheme::Uniform, &WeightingScheme::Uniform, &HacSpec::auto()).unwrap();
    let rho = v.cov[(0, 1)] / (v.cov[(0, 0)] * v.cov[(1, 1)]).sqrt();
    assert!(rho.abs() < 0.1, "{rho}");
}

#[test]
fn pseudo_treatment_p_values_are_uniform_under_the_null() {
    let mut r = rng(4);
    let mut p: Vec<f64> = (0..2_000)
        .map(|_| {
            let x = normals(&mut r, 2_000);
            pretrends_test_series(&x, 1_000, &WeightingScheme::Uniform, &WeightingScheme::Uniform, &HacSpec::auto())
                .unwrap()
                .p_value
        })
        .collect();
    let d = ks_uniform(&mut p);
    assert!(d < 0.05, "KS distance {d}");
}

#[test]
fn pseudo_treatment_detects_a_mean_break() {
    let mut r = rng(5);
    let hits = (0..500)
        .filter(|_| {
            let mut x = normals(&mut r, 200);
            x[100..].iter_mut().for_each(|v| *v += 5.0);
            pretrends_test_series(&x, 100, &WeightingScheme::Uniform, &WeightingScheme::Uniform, &HacSpec::auto())
                .unwrap()
                .rejects_at(0.05)
        })
        .count();
    assert!(hits as f64 / 500.0 >= 0.99, "{hits}");
}

#[test]
fn detrended_t_statistic_has_nominal_size() {
    let mut r = rng(6);
    let (n_pre, n_post) = (200usize, 200usize);
    let regimes: Vec<Regime> = (0..n_pre + 1 + n_post)
        .map(|i| match i {
            i if i < n_pre => Regime::Pre,
            i if i == n_pre => Regime::Transition,
            _ => Regime::Post,
        })
        .collect();
    let reps = 2_000;
    let hits = (0..reps)
        .filter(|_| {
            let x: Vec<f64> = (0..regimes.len())
                .map(|i| 1.0 + 0.01 * i as f64 + r.sample::<f64, _>(StandardNormal))
                .collect();
            let est = estimate_detrended_series(
                &x,
                &regimes,
                EstimatorKind::Tdid,
                &WeightingScheme::Uniform,
                &WeightingScheme::Uniform,
            )
            .unwrap();
            t_test(&est, 0.0).unwrap().rejects_at(0.05)
        })
        .count();
    let rate = hits as f64 / reps as f64;
    assert!((0.03..=0.07).contains(&rate), "{rate}");
}

/// Mean-mu noise plus a post step; two pre-weighting schemes.
#[test]
fn pre_weighting_choice_washes_out() {
    let schemes = (WeightingScheme::Uniform, WeightingScheme::LinearDecay { a: 0.4 });
    let mut mean_abs = Vec::new();
    for (k, n) in [50usize, 200, 800].into_iter().enumerate() {
        let mut r = rng(70 + k as u64);
        let reps = 2_000;
        let diffs: Vec<f64> = (0..reps)
            .map(|_| {
                let x: Vec<f64> = (0..2 * n + 1)
                    .map(|i| 3.0 + if i > n { 0.5 } else { 0.0 } + r.sample::<f64, _>(StandardNormal))
                    .collect();
                let p = gap_panel(x, n, n);
                let a = estimate_tdid(&p, 0, &WeightingScheme::Uniform, &schemes.0).unwrap().point;
                let b = estimate_tdid(&p, 0, &WeightingScheme::Uniform, &schemes.1).unwrap().point;
                a - b
            })
            .collect();
        let m = diffs.iter().sum::<f64>() / reps as f64;
        let sd = (diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!(m.abs() < 4.0 * sd / (reps as f64).sqrt(), "n {n}: mean difference {m}");
        mean_abs.push(diffs.iter().map(|d| d.abs()).sum::<f64>() / reps as f64);
    }
    assert!(mean_abs.windows(2).all(|w| w[1] < w[0]), "{mean_abs:?}");
}

#[test]
fn identification_design_estimates_are_centred() {
    let spec = tdid::dgp::preset("idTest-I").unwrap();
    let reps = 2_000;
    let mut sums = [0.0; 2];
    for rep in 0..reps {
        let mut r = tdid::dgp::replication_rng(9, 100, rep);
        let sim = tdid::dgp::generate_with_rng(&spec, 100, 100, &mut r).unwrap();
        let p = &sim.panel;
        let pair = p
            .with_series(p.controls()[0].clone(), vec![p.treated().clone(), p.controls()[0].clone()])
            .unwrap();
        let first = estimate_tdid(&pair, 0, &WeightingScheme::Uniform, &WeightingScheme::Uniform).unwrap().point;
        let second = estimate_tdid(&pair, 1, &WeightingScheme::Uniform, &WeightingScheme::Uniform).unwrap().point;
        sums[0] += first;
        sums[1] += second;
    }
    for s in sums {
        assert!((s / reps as f64).abs() < 0.01, "{}", s / reps as f64);
    }
}

#[test]
fn shared_control_estimates_are_unbiased() {
    let mut r = rng(8);
    let (n, reps) = (200usize, 2_000);
    let effects = [2.0, -1.0];
    let mut err = [0.0; 2];
    for _ in 0..reps {
        let len = 2 * n + 1;
        let common = normals(&mut r, len);
        let c0: Vec<f64> = common.iter().map(|v| v + r.sample::<f64, _>(StandardNormal)).collect();
        let c1: Vec<f64> = common.iter().map(|v| 0.5 * v + r.sample::<f64, _>(StandardNormal)).collect();
        let panels: Vec<Panel> = effects
            .iter()
            .map(|&eff| {
                let t: Vec<f64> = (0..len)
                    .map(|i| common[i] + if i > n { eff } else { 0.0 } + r.sample::<f64, _>(StandardNormal))
                    .collect();
                Panel::new(
                    Series::new("t", t),
                    vec![Series::new("c0", c0.clone()), Series::new("c1", c1.clone())],
                    n,
                    1,
                    n,
                )
                .unwrap()
            })
            .collect();
        let out = multi_treated_estimates(&panels, &WeightingScheme::Uniform, &WeightingScheme::Uniform, &HacSpec::auto());
        for (k, e) in out.into_iter().enumerate() {
            err[k] += e.unwrap().point - effects[k];
        }
    }
    for e in err {
        assert!((e / reps as f64).abs() < 0.02, "{}", e / reps as f64);
    }
}
