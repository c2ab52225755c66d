use std::path::Path;

use chainsense::io::{format_dataset, parse_dataset, Provenance};
use chainsense::RunConfig;
use chainsense_core::protocol::{Dataset, Schedule};
use chainsense_core::spin::ChainTemplate;
use proptest::prelude::*;

proptest! {
    #[test]
    fn dataset_text_round_trips_bit_exactly(
        n_sites in 1usize..=6,
        coupling in 0.01f64..10.0,
        taus in prop::collection::vec(1e-3f64..100.0, 1..=5),
        weights in prop::collection::vec(0u64..1_000_000, 32),
        seed in any::<u64>(),
    ) {
        let n = taus.len();
        let mut dense: Vec<u64> = weights[..1 << n].to_vec();
        if dense.iter().all(|&c| c == 0) {
            dense[0] = 1;
        }
        let ds = Dataset::from_dense(
            ChainTemplate::new(n_sites, coupling).unwrap(),
            Schedule::new(taus).unwrap(),
            &dense,
        ).unwrap();
        let prov = Provenance { config_hash: "0".repeat(64), seed };
        let text = format_dataset(&ds, Some(&prov));
        let back = parse_dataset(&text, Path::new("mem")).unwrap();
        prop_assert_eq!(back.template().coupling().to_bits(), coupling.to_bits());
        for (a, b) in back.schedule().taus().iter().zip(ds.schedule().taus()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(format_dataset(&back, Some(&prov)), text);
    }

    #[test]
    fn overrides_change_the_hash(seed in 0..=i64::MAX as u64, field in 0.001f64..0.2) {
        let base = RunConfig::default();
        let c = base.with_overrides(&[format!("rng.seed={seed}"), format!("chain.field={field}")]).unwrap();
        prop_assert_eq!(c.rng.seed, seed);
        prop_assert_eq!(c.chain.field.to_bits(), field.to_bits());
        prop_assert_eq!(c.hash() == base.hash(), c == base);
        let moved = c.with_overrides(&["output.dir=\"x\"".into(), "output.workers=2".into()]).unwrap();
        prop_assert_eq!(moved.hash(), c.hash());
    }
}
