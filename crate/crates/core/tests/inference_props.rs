mod common;

use chainsense_core::inference::{
    average_error, error_summary, log_likelihood, posterior, ErrorAverage, ErrorEstimator, ErrorSummary,
    EstimatorOptions, FieldGrid, LikelihoodTable, Posterior, Sampling,
};
use chainsense_core::protocol::{sequence_probability, Dataset, OutcomeSequence, Schedule};
use chainsense_core::rng::stream_rng;
use chainsense_core::spin::{ChainSpec, ChainTemplate};
use chainsense_core::Error;
use common::binomial;
use std::collections::BTreeMap;

fn multinomial_coefficient(counts: &[u64]) -> f64 {
    let mut left: u64 = counts.iter().sum();
    counts.iter().fold(1.0, |acc, &k| {
        let c = binomial(left, k);
        left -= k;
        acc * c
    })
}

#[test]
fn certain_data_has_zero_log_likelihood() {
    let t = ChainTemplate::new(3, 1.0).unwrap();
    let s = Schedule::standard(3).unwrap();
    let mut counts = BTreeMap::new();
    counts.insert(OutcomeSequence::all_down(3), 40);
    let d = Dataset::new(t, s, counts).unwrap();
    let grid = FieldGrid::new(-0.1, 0.1, 21).unwrap();
    let ll = log_likelihood(&d, &grid).unwrap();
    assert_eq!(grid.values()[10], 0.0);
    assert!(ll[10].abs() < 1e-12);
    assert!(ll.iter().all(|l| *l <= 0.0));
}

#[test]
fn empty_dataset_is_rejected() {
    let t = ChainTemplate::new(3, 1.0).unwrap();
    let s = Schedule::standard(2).unwrap();
    assert_eq!(Dataset::from_dense(t, s, &[0, 0, 0, 0]).unwrap_err(), Error::EmptyDataset);
}

#[test]
fn likelihood_matches_direct_multinomial_evaluation() {
    let t = ChainTemplate::new(3, 1.0).unwrap();
    let s = Schedule::new(vec![4.0, 7.0]).unwrap();
    let dense = [5u64, 3, 7, 5];
    let d = Dataset::from_dense(t, s.clone(), &dense).unwrap();
    let grid = FieldGrid::new(0.02, 0.2, 10).unwrap();
    let ll = log_likelihood(&d, &grid).unwrap();
    let coef = multinomial_coefficient(&dense);
    for (g, &b) in grid.values().iter().enumerate() {
        let direct: f64 = coef
            * (0..4)
                .map(|j| {
                    let p = sequence_probability(b, &t, &s, &OutcomeSequence::from_index(j, 2)).unwrap();
                    p.powi(dense[j] as i32)
                })
                .product::<f64>();
        let ours = coef * ll[g].exp();
        assert!(((ours - direct) / direct).abs() < 1e-10, "B={b}");
    }
}

#[test]
fn multinomial_coefficient_cancels_in_posterior() {
    let t = ChainTemplate::new(3, 1.0).unwrap();
    let s = Schedule::new(vec![4.0, 7.0]).unwrap();
    let dense = [2u64, 6, 1, 9];
    let d = Dataset::from_dense(t, s, &dense).unwrap();
    let grid = FieldGrid::default();
    let ll = log_likelihood(&d, &grid).unwrap();
    let with: Vec<f64> = ll.iter().map(|l| l + multinomial_coefficient(&dense).ln()).collect();
    let a = Posterior::from_log_likelihood(&grid, &ll).unwrap();
    let b = Posterior::from_log_likelihood(&grid, &with).unwrap();
    for (x, y) in a.density().iter().zip(b.density()) {
        assert!((x - y).abs() <= 1e-12 * x.max(1.0));
    }
    assert!((a.integral() - 1.0).abs() < 1e-9);
}

#[test]
fn posterior_is_positive_when_both_outcomes_are_possible() {
    let t = ChainTemplate::new(3, 1.0).unwrap();
    let s = Schedule::new(vec![6.0]).unwrap();
    let d = Dataset::from_dense(t, s, &[0, 1]).unwrap();
    let grid = FieldGrid::new(0.01, 0.2, 50).unwrap();
    let post = posterior(&d, &grid).unwrap();
    assert!(post.density().iter().all(|f| *f > 0.0));
}

#[test]
fn zero_field_data_gives_symmetric_posterior() {
    let spec = ChainSpec::new(4, 1.0, 0.0).unwrap();
    let s = Schedule::standard(3).unwrap();
    let d = chainsense_core::protocol::generate_dataset(&spec, &s, 200, &mut stream_rng(0, 0)).unwrap();
    let post = posterior(&d, &FieldGrid::default()).unwrap();
    let f = post.density();
    for i in 0..f.len() {
        assert!((f[i] - f[f.len() - 1 - i]).abs() < 1e-8);
    }
    assert!(post.mean().abs() < 1e-8);
}

#[test]
fn degenerate_likelihood_is_an_error() {
    let grid = FieldGrid::new(0.0, 1.0, 5).unwrap();
    assert_eq!(
        Posterior::from_log_likelihood(&grid, &[f64::NEG_INFINITY; 5]).unwrap_err(),
        Error::DegeneratePosterior
    );
}

#[test]
fn uniform_posterior_has_closed_form_error() {
    let grid = FieldGrid::default();
    let post = Posterior::from_density(&grid, vec![1.0; grid.len()]).unwrap();
    assert!((post.integral() - 1.0).abs() < 1e-12);
    let s = error_summary(&post, 0.1).unwrap();
    let var = 0.4f64 * 0.4 / 12.0;
    assert!(s.mean.abs() < 1e-12);
    assert!((s.variance - var).abs() < 1e-12);
    assert!((s.delta_b2 - (var + 0.01) / 0.01).abs() < 1e-12);
}

#[test]
fn grid_point_mass_error_vanishes_with_spacing() {
    // A spike on one grid point is the hat function; its variance is h^2 / 6.
    let mut last = f64::INFINITY;
    for points in [41, 401, 4001] {
        let grid = FieldGrid::new(0.0, 0.2, points).unwrap();
        let mut f = vec![0.0; points];
        let at = (points - 1) / 2;
        f[at] = 1.0;
        let post = Posterior::from_density(&grid, f).unwrap();
        let s = error_summary(&post, grid.values()[at]).unwrap();
        let h = grid.spacing();
        assert!((s.mean - 0.1).abs() < 1e-15);
        assert!((s.variance - h * h / 6.0).abs() < 1e-15);
        assert!(s.delta_b2 < last);
        last = s.delta_b2;
    }
    assert!(last < 1e-7);
    assert_eq!(ErrorSummary::from_moments(0.1, 0.0, 0.1).unwrap().delta_b2, 0.0);
}

#[test]
fn biased_point_estimate_has_unit_error() {
    let s = ErrorSummary::from_moments(0.2, 0.0, 0.1).unwrap();
    assert!((s.delta_b2 - 1.0).abs() < 1e-15);
    assert_eq!(s.delta_b(), s.delta_b2.sqrt());
}

#[test]
fn zero_true_field_is_rejected() {
    let grid = FieldGrid::default();
    let post = Posterior::from_density(&grid, vec![1.0; grid.len()]).unwrap();
    assert_eq!(error_summary(&post, 0.0).unwrap_err(), Error::ZeroTrueField);
}

#[test]
fn grid_validation() {
    assert!(FieldGrid::new(-0.2, 0.2, 1).is_err());
    assert!(FieldGrid::new(-0.2, 0.2, 2).is_err());
    assert!(FieldGrid::new(0.2, -0.2, 11).is_err());
    assert!(FieldGrid::from_values(vec![0.0, 0.1, 0.3]).is_err());
    let g = FieldGrid::default();
    assert_eq!(g.len(), 401);
    assert!((g.spacing() - 0.001).abs() < 1e-15);
    assert!(g.is_symmetric());
}

#[test]
fn folding_preserves_mass_and_matches_positive_prior() {
    let spec = ChainSpec::new(4, 1.0, 0.1).unwrap();
    let s = Schedule::standard(2).unwrap();
    let d = chainsense_core::protocol::generate_dataset(&spec, &s, 300, &mut stream_rng(4, 0)).unwrap();
    let full = posterior(&d, &FieldGrid::default()).unwrap();
    let folded = full.folded().unwrap();
    let half = posterior(&d, &FieldGrid::new(0.0, 0.2, 201).unwrap()).unwrap();
    assert!((folded.integral() - 1.0).abs() < 1e-12);
    for (a, b) in folded.density().iter().zip(half.density()) {
        assert!((a - b).abs() < 1e-9 * b.max(1.0));
    }
}

#[test]
fn average_error_is_deterministic_and_single_repeat_is_one_draw() {
    let spec = ChainSpec::new(3, 1.0, 0.1).unwrap();
    let s = Schedule::standard(2).unwrap();
    let grid = FieldGrid::new(-0.2, 0.2, 101).unwrap();
    let opts = EstimatorOptions::default();
    let a = average_error(&spec, &s, &grid, 100, 5, 9, opts).unwrap();
    let b = average_error(&spec, &s, &grid, 100, 5, 9, opts).unwrap();
    assert_eq!(a, b);
    let table = LikelihoodTable::build(spec.template(), &s, &grid).unwrap();
    let est = ErrorEstimator::new(&table, 0.1, opts).unwrap();
    let one = est.average(100, 1, 9).unwrap();
    let draw = est.repeat(100, &mut stream_rng(9, 0)).unwrap();
    assert_eq!(one.mean, draw.delta_b());
    assert_eq!(one.std_error, 0.0);
    assert!(average_error(&spec, &s, &grid, 100, 0, 9, opts).is_err());
}

#[test]
fn root_mean_square_average_is_not_smaller() {
    let spec = ChainSpec::new(3, 1.0, 0.1).unwrap();
    let s = Schedule::standard(2).unwrap();
    let grid = FieldGrid::new(-0.2, 0.2, 101).unwrap();
    let mean = average_error(&spec, &s, &grid, 100, 20, 3, EstimatorOptions::default()).unwrap();
    let rms = average_error(
        &spec,
        &s,
        &grid,
        100,
        20,
        3,
        EstimatorOptions {
            average: ErrorAverage::RootMeanSquare,
            ..EstimatorOptions::default()
        },
    )
    .unwrap();
    assert!(rms.mean >= mean.mean);
}

#[test]
fn simulated_and_exact_sampling_agree_statistically() {
    let spec = ChainSpec::new(3, 1.0, 0.12).unwrap();
    let s = Schedule::standard(2).unwrap();
    let grid = FieldGrid::new(-0.2, 0.2, 101).unwrap();
    let run = |sampling| {
        average_error(
            &spec,
            &s,
            &grid,
            200,
            60,
            5,
            EstimatorOptions {
                sampling,
                ..EstimatorOptions::default()
            },
        )
        .unwrap()
    };
    let (a, b) = (run(Sampling::Exact), run(Sampling::Simulate));
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() < 4.0 * se, "{a:?} vs {b:?}");
}

#[test]
fn error_decreases_with_more_measurements_per_sequence() {
    let grid = FieldGrid::default();
    let spec = ChainSpec::new(5, 1.0, 0.1).unwrap();
    let opts = EstimatorOptions::default();
    let one = average_error(&spec, &Schedule::standard(1).unwrap(), &grid, 1000, 40, 1, opts).unwrap();
    let five = average_error(&spec, &Schedule::standard(5).unwrap(), &grid, 1000, 40, 1, opts).unwrap();
    assert!(five.mean < one.mean);
}

#[test]
fn posterior_mean_covers_true_field() {
    let spec = ChainSpec::new(5, 1.0, 0.1).unwrap();
    let s = Schedule::standard(5).unwrap();
    let grid = FieldGrid::default();
    let table = LikelihoodTable::build(spec.template(), &s, &grid).unwrap();
    let est = ErrorEstimator::new(&table, 0.1, EstimatorOptions::default()).unwrap();
    let covered = (0..100)
        .filter(|&r| {
            let d = est.dataset(5000, &mut stream_rng(31, r)).unwrap();
            let post = est.posterior(&d).unwrap();
            (post.mean() - 0.1).abs() <= 3.0 * post.variance().sqrt()
        })
        .count();
    assert!(covered >= 95, "covered {covered}/100");
}
