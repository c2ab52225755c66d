mod common;

use chainsense_core::protocol::{
    generate_dataset, sequence_distribution, sequence_probability, Outcome, OutcomeSequence, Probe, Schedule,
};
use chainsense_core::rng::stream_rng;
use chainsense_core::spin::{ChainSpec, ChainTemplate};
use common::joint_probability;
use proptest::prelude::*;

#[test]
fn collapse_chain_matches_matrix_product_oracle() {
    let template = ChainTemplate::new(3, 1.0).unwrap();
    let taus = [2.5, 4.0, 1.75];
    let schedule = Schedule::new(taus.to_vec()).unwrap();
    for b in [-0.2, -0.07, 0.0, 0.11, 0.2] {
        for index in 0..8 {
            let seq = OutcomeSequence::from_index(index, 3);
            let ups: Vec<bool> = seq.outcomes().iter().map(|o| o.is_up()).collect();
            let ours = sequence_probability(b, &template, &schedule, &seq).unwrap();
            let oracle = joint_probability(3, 1.0, b, &taus, &ups);
            assert!((ours - oracle).abs() < 1e-12, "B={b} seq={index}: {ours} vs {oracle}");
        }
    }
}

#[test]
fn empirical_frequencies_match_exact_probabilities() {
    let spec = ChainSpec::new(3, 1.0, 0.15).unwrap();
    let schedule = Schedule::new(vec![3.0, 5.0]).unwrap();
    let runs = 100_000u64;
    let data = generate_dataset(&spec, &schedule, runs, &mut stream_rng(2024, 0)).unwrap();
    let exact = sequence_distribution(&spec, &schedule).unwrap();
    let counts = data.dense_counts();
    for (p, k) in exact.iter().zip(&counts) {
        let expected = p * runs as f64;
        let sd = (runs as f64 * p * (1.0 - p)).sqrt();
        assert!((*k as f64 - expected).abs() <= 3.0 * sd.max(1e-9), "{k} vs {expected} +- {sd}");
    }
}

#[test]
fn different_seeds_agree_in_distribution() {
    let spec = ChainSpec::new(3, 1.0, 0.18).unwrap();
    let schedule = Schedule::new(vec![3.0, 5.0]).unwrap();
    let a = generate_dataset(&spec, &schedule, 20_000, &mut stream_rng(1, 0)).unwrap();
    let b = generate_dataset(&spec, &schedule, 20_000, &mut stream_rng(2, 0)).unwrap();
    assert_ne!(a, b);
    // two-sample chi-square over the four sequences, 3 degrees of freedom
    let (ca, cb) = (a.dense_counts(), b.dense_counts());
    let chi2: f64 = ca
        .iter()
        .zip(&cb)
        .filter(|(x, y)| **x + **y > 0)
        .map(|(&x, &y)| {
            let (x, y) = (x as f64, y as f64);
            (x - y) * (x - y) / (x + y)
        })
        .sum();
    // 99.9% quantile of chi-square with 3 dof
    assert!(chi2 < 16.27, "chi2 = {chi2}");
}

#[test]
fn single_measurement_protocol_is_iid_bernoulli() {
    let spec = ChainSpec::new(4, 1.0, 0.2).unwrap();
    let schedule = Schedule::new(vec![9.0]).unwrap();
    let p_up = sequence_distribution(&spec, &schedule).unwrap()[1];
    let runs = 50_000;
    let data = generate_dataset(&spec, &schedule, runs, &mut stream_rng(77, 0)).unwrap();
    let ups = data.dense_counts()[1] as f64;
    let sd = (runs as f64 * p_up * (1.0 - p_up)).sqrt();
    assert!((ups - p_up * runs as f64).abs() < 3.0 * sd);
}

#[test]
fn four_measurements_can_alternate() {
    let spec = ChainSpec::new(10, 1.0, 0.1).unwrap();
    let schedule = Schedule::standard(4).unwrap();
    let probe = Probe::new(spec, schedule).unwrap();
    let target = OutcomeSequence::new(vec![Outcome::Down, Outcome::Up, Outcome::Down, Outcome::Up]);
    assert!(probe.sequence_probability(&target).unwrap() > 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn branches_sum_to_one(
        n in 1usize..=4,
        field in -0.2f64..0.2,
        taus in prop::collection::vec(0.5f64..15.0, 1..=6),
    ) {
        let spec = ChainSpec::new(n, 1.0, field).unwrap();
        let schedule = Schedule::new(taus).unwrap();
        let total: f64 = sequence_distribution(&spec, &schedule).unwrap().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn probabilities_are_even_in_field(field in 0.0f64..0.2, taus in prop::collection::vec(1.0f64..10.0, 1..=4)) {
        let schedule = Schedule::new(taus).unwrap();
        let plus = sequence_distribution(&ChainSpec::new(4, 1.0, field).unwrap(), &schedule).unwrap();
        let minus = sequence_distribution(&ChainSpec::new(4, 1.0, -field).unwrap(), &schedule).unwrap();
        for (a, b) in plus.iter().zip(&minus) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
