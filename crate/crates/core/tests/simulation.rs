// SPDX-License-Identifier: MIT OR Apache-2.0

use sepp_cpd::sim::{conditional_intensities, generate_series, setting_a, setting_b};
use sepp_cpd::{CoefficientSequence, Matrix, ModelConfig};

fn coupled() -> (CoefficientSequence, ModelConfig) {
    let m = Matrix::from_rows(vec![
        vec![0.3, -0.2, 0.0],
        vec![0.4, 0.0, 0.3],
        vec![0.0, -0.5, 0.2],
    ])
    .unwrap();
    (CoefficientSequence::stationary(m).unwrap(), ModelConfig::new(0.4, 4.0).unwrap())
}

// Pearson residuals (X - mu) / sqrt(mu) have mean 0, variance 1 and, since
// coordinates are conditionally independent, no cross correlation.
#[test]
fn pearson_residuals_are_white_across_coordinates() {
    let (seq, config) = coupled();
    let len = 40_000;
    let series = generate_series(&seq, &config, len, 77).unwrap();
    let matrix = seq.matrix_at(1);
    let mut resid: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(len)).collect();
    for t in 1..len {
        let mu = conditional_intensities(series.observation(t), matrix, &config);
        for (m, r) in resid.iter_mut().enumerate() {
            let x = f64::from(series.observation(t + 1)[m]);
            r.push((x - mu[m]) / mu[m].sqrt());
        }
    }
    let n = (len - 1) as f64;
    let se = 1.0 / n.sqrt();
    for r in &resid {
        let mean = r.iter().sum::<f64>() / n;
        let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 5.0 * se, "residual mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "residual variance {var}");
    }
    for a in 0..3 {
        for b in a + 1..3 {
            let corr = resid[a].iter().zip(&resid[b]).map(|(x, y)| x * y).sum::<f64>() / n;
            assert!(corr.abs() < 5.0 * se, "coordinates {a},{b} correlate: {corr}");
        }
    }
}

#[test]
fn intensities_respect_the_bound_in_benchmark_settings() {
    for scenario in [setting_a(0.35).unwrap(), setting_b(180).unwrap()] {
        let series = scenario.simulate(5).unwrap();
        let bound = scenario.config.intensity_bound();
        for t in 1..scenario.len {
            let mu = conditional_intensities(series.observation(t), scenario.seq.matrix_at(t + 1), &scenario.config);
            assert!(mu.iter().all(|&x| x <= bound * (1.0 + 1e-12)));
        }
    }
}

#[test]
fn regime_means_shift_at_the_change_point() {
    // a strong positive diagonal raises the mean, a negative one lowers it
    let up = Matrix::from_rows(vec![vec![0.9, 0.0], vec![0.0, 0.9]]).unwrap();
    let down = Matrix::from_rows(vec![vec![-0.9, 0.0], vec![0.0, -0.9]]).unwrap();
    let seq = CoefficientSequence::new(vec![
        sepp_cpd::Segment { start: 1, matrix: up },
        sepp_cpd::Segment { start: 2001, matrix: down },
    ])
    .unwrap();
    let config = ModelConfig::new(0.0, 3.0).unwrap();
    let series = generate_series(&seq, &config, 4000, 3).unwrap();
    let mean = |range: std::ops::RangeInclusive<usize>| {
        let n = range.clone().count() as f64;
        range.map(|t| f64::from(series.count(1, t))).sum::<f64>() / n
    };
    assert!(mean(100..=2000) > 2.0 * mean(2100..=4000));
}
