mod common;

use std::f64::consts::{FRAC_PI_4, PI};

use common::{normal_cdf, simpson};
use proptest::prelude::*;
use protmeas::detector::{
    marginal_pdf, sample_acquisition, sample_events, AcquisitionLabel, CountsGrid, DetectorConfig,
};
use protmeas::{evolve_pj, evolve_pm, GaussianEnvelope, JointState, PolarizationKet};

fn env() -> GaussianEnvelope {
    GaussianEnvelope::new(9.72, 4.17).unwrap()
}

fn pj_state(theta: f64) -> JointState {
    evolve_pj(&PolarizationKet::linear(theta), &env(), 7, 11.56 / 7.0).unwrap()
}

fn pm_state(theta: f64) -> JointState {
    evolve_pm(&PolarizationKet::linear(theta), &env(), 7, 11.56 / 7.0).unwrap().0
}

fn noiseless() -> DetectorConfig {
    DetectorConfig {
        dark_rate: 0.0,
        ..Default::default()
    }
}

#[test]
fn marginal_is_a_normalized_density() {
    for s in [pj_state(FRAC_PI_4), pm_state(17.0 * PI / 60.0), pj_state(0.0)] {
        let pdf = marginal_pdf(&s);
        let (lo, hi) = pdf.support();
        let total = simpson(|x| pdf.pdf(x), lo, hi, 20_000);
        assert!((total - 1.0).abs() < 1e-9, "{total}");
        for x in [-3.0, 5.0, 9.72, 15.5, 21.28, 40.0] {
            assert!((pdf.pdf(x) - s.density(x)).abs() < 1e-12);
            let by_quadrature = simpson(|t| pdf.pdf(t), lo, x, 20_000);
            assert!((pdf.cdf(x) - by_quadrature).abs() < 1e-9);
        }
        let mean = simpson(|x| x * pdf.pdf(x), lo, hi, 20_000);
        assert!((pdf.mean() - mean).abs() < 1e-8);
        assert!((pdf.mean() - s.marginal_mean()).abs() < 1e-10);
    }
}

fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, usize) {
    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for (&o, &e) in observed.iter().zip(expected) {
        if e >= 5.0 {
            chi2 += (o as f64 - e).powi(2) / e;
            dof += 1;
        }
    }
    (chi2, dof.saturating_sub(1))
}

#[test]
fn histograms_converge_to_the_marginal() {
    let cfg = noiseless();
    let n = 1_000_000u64;
    for (i, s) in [pj_state(FRAC_PI_4), pm_state(17.0 * PI / 60.0)].iter().enumerate() {
        let grid = sample_events(s, n, &cfg, 99 + i as u64, AcquisitionLabel::Pj).unwrap();
        let pdf = marginal_pdf(s);
        let p_y: Vec<f64> = (0..cfg.ny)
            .map(|j| {
                let c = |y: f64| normal_cdf((y - cfg.beam_center_y) / cfg.beam_sigma_y);
                c(j as f64 + 0.5) - c(j as f64 - 0.5)
            })
            .collect();
        let y_on = p_y.iter().sum::<f64>();
        let expected_x: Vec<f64> = (0..cfg.nx)
            .map(|k| n as f64 * y_on * pdf.mass(k as f64 - 0.5, k as f64 + 0.5))
            .collect();
        let x_on = pdf.mass(-0.5, cfg.nx as f64 - 0.5);
        let expected_y: Vec<f64> = p_y.iter().map(|p| n as f64 * x_on * p).collect();

        let (cx, dx) = chi_square(&grid.x_marginal(), &expected_x);
        let (cy, dy) = chi_square(&grid.y_marginal(), &expected_y);
        // 5σ band of the chi-square distribution
        assert!(cx < dx as f64 + 5.0 * (2.0 * dx as f64).sqrt(), "x: χ²={cx} dof={dx}");
        assert!(cy < dy as f64 + 5.0 * (2.0 * dy as f64).sqrt(), "y: χ²={cy} dof={dy}");
        let total_expected = n as f64 * x_on * y_on;
        assert!((grid.total() as f64 - total_expected).abs() < 5.0 * total_expected.sqrt());
    }
}

#[test]
fn dark_counts_are_uniform_poisson() {
    let cfg = DetectorConfig {
        dark_rate: 3.0,
        ..Default::default()
    };
    let s = pj_state(0.0);
    let grid = sample_events(&s, 0, &cfg, 5, AcquisitionLabel::Void).unwrap();
    let n = grid.counts.len() as f64;
    let mean = grid.total() as f64 / n;
    let var = grid.counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 3.0).abs() < 5.0 * (3.0 / n).sqrt(), "{mean}");
    // Poisson dispersion index
    assert!((var / mean - 1.0).abs() < 5.0 * (2.0 / n).sqrt(), "{}", var / mean);
    let rows = grid.y_marginal();
    let expected = vec![3.0 * cfg.nx as f64; cfg.ny];
    let (chi2, dof) = chi_square(&rows, &expected);
    assert!(chi2 < dof as f64 + 5.0 * (2.0 * dof as f64).sqrt());
}

#[test]
fn detection_efficiency_thins_the_signal() {
    let cfg = DetectorConfig {
        detection_efficiency: 0.25,
        ..noiseless()
    };
    let s = pm_state(FRAC_PI_4);
    let n = 200_000u64;
    let on_array = marginal_pdf(&s).mass(-0.5, 31.5)
        * (normal_cdf(16.0 / 4.17) - normal_cdf(-16.0 / 4.17));
    let expected = 0.25 * n as f64 * on_array;
    let total = sample_events(&s, n, &cfg, 3, AcquisitionLabel::Pm).unwrap().total() as f64;
    assert!((total - expected).abs() < 5.0 * expected.sqrt(), "{total} vs {expected}");
}

#[test]
fn sampling_is_independent_of_thread_count() {
    let s = pj_state(0.4);
    let cfg = DetectorConfig::default();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_acquisition(&s, 50_000, &cfg, 11, AcquisitionLabel::Pj).unwrap())
    };
    let (g1, e1) = run(1);
    let (g4, e4) = run(4);
    assert_eq!(g1, g4);
    assert_eq!(e1, e4);
    let (g_other, _) = sample_acquisition(&s, 50_000, &cfg, 12, AcquisitionLabel::Pj).unwrap();
    assert_ne!(g1.counts, g_other.counts);
}

#[test]
fn event_list_reproduces_the_signal_grid() {
    let s = pj_state(FRAC_PI_4);
    let (grid, events) = sample_acquisition(&s, 20_000, &noiseless(), 4, AcquisitionLabel::Pj).unwrap();
    assert_eq!(grid.total(), events.len() as u64);
    let mut rebuilt = CountsGrid::zeros(32, 32, AcquisitionLabel::Pj);
    for e in &events {
        *rebuilt.get_mut(e.ix, e.iy) += 1;
        assert_eq!(e.ix, (e.x + 0.5).floor() as usize);
    }
    assert_eq!(rebuilt.counts, grid.counts);
}

#[test]
fn invalid_detector_config_is_rejected() {
    let s = pj_state(0.0);
    let cfg = DetectorConfig {
        detection_efficiency: 1.5,
        ..Default::default()
    };
    assert!(sample_events(&s, 10, &cfg, 0, AcquisitionLabel::Pj).is_err());
}

fn arb_grid() -> impl Strategy<Value = CountsGrid> {
    (1usize..6, 1usize..6, any::<u64>(), 0u64..1_000_000, 0usize..7).prop_flat_map(
        |(nx, ny, seed, n, label)| {
            prop::collection::vec(0u64..10_000, nx * ny).prop_map(move |counts| {
                let labels = [
                    AcquisitionLabel::HCal,
                    AcquisitionLabel::VCal,
                    AcquisitionLabel::Pj,
                    AcquisitionLabel::Pm,
                    AcquisitionLabel::Void,
                    AcquisitionLabel::Pol,
                    AcquisitionLabel::Tomo(protmeas::tomography::SettingLabel::R),
                ];
                let mut g = CountsGrid::zeros(nx, ny, labels[label]);
                g.counts = counts;
                g.seed = seed;
                g.n_emitted = n;
                g
            })
        },
    )
}

proptest! {
    #[test]
    fn grid_text_round_trip(g in arb_grid()) {
        let back = CountsGrid::from_text(&g.to_text()).unwrap();
        prop_assert_eq!(back, g);
    }
}
