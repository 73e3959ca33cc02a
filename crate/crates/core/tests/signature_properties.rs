use proptest::prelude::*;

use rnnsig_core::signature::signature;
use rnnsig_core::{PathConfig, PiecewiseLinearPath};

fn path_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 1..12)
}

proptest! {
    #[test]
    fn normalized_signature_respects_norm_bound(samples in path_strategy(), l in 0.1f64..0.9) {
        let cfg = PathConfig::new(l).unwrap();
        let path = PiecewiseLinearPath::from_samples(&samples).unwrap().normalize(cfg).0.time_augment(cfg);
        let sig = signature(&path, 6, 0.0, 1.0).unwrap();
        prop_assert!(sig.norm() <= 2.0 / (1.0 - l) + 1e-12);
    }

    #[test]
    fn chen_holds_across_a_split(samples in path_strategy(), split in 0.05f64..0.95) {
        let path = PiecewiseLinearPath::from_samples(&samples).unwrap();
        let whole = signature(&path, 4, 0.0, 1.0).unwrap();
        let left = signature(&path, 4, 0.0, split).unwrap();
        let right = signature(&path, 4, split, 1.0).unwrap();
        let joined = left.concat(&right).unwrap();
        for k in 0..=4 {
            for (a, b) in whole.level(k).data().iter().zip(joined.level(k).data()) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn first_level_is_the_increment(samples in path_strategy()) {
        let path = PiecewiseLinearPath::from_samples(&samples).unwrap();
        let sig = signature(&path, 2, 0.0, 1.0).unwrap();
        let end = path.evaluate(1.0);
        let start = path.evaluate(0.0);
        for i in 0..2 {
            prop_assert!((sig.level(1).data()[i] - (end[i] - start[i])).abs() < 1e-12);
        }
    }
}
