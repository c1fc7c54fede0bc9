use apeiron_core::Activation;
use apeiron_nn::{DenseModel, PipelineTiming};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn quantizing_huge_inputs_never_flips_sign(x in -64.0f64..64.0, scale in 1.0f64..1e9) {
        let q = Activation::quantize(x * scale);
        if x > 0.0 {
            prop_assert!(q.raw() >= 0);
        } else if x < 0.0 {
            prop_assert!(q.raw() <= 0);
        }
        if x * scale >= 32.0 {
            prop_assert_eq!(q, Activation::MAX);
        }
        if x * scale <= -32.0 {
            prop_assert_eq!(q, Activation::MIN);
        }
    }

    #[test]
    fn scaling_inputs_up_never_wraps_scores(seed in any::<u64>(), scale in 1u32..4096) {
        // non-negative parameters and inputs: every score must be
        // non-decreasing as the inputs grow, pinned at the top once saturated
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = DenseModel::random(&DenseModel::reference_sizes(), 127, &mut rng).to_file();
        for l in &mut f.layers {
            l.weights.iter_mut().for_each(|w| *w = w.abs().min(127));
            l.bias.iter_mut().for_each(|b| *b = b.abs().min(127));
        }
        let m = DenseModel::from_file(&f).unwrap();
        let base: Vec<f64> = (0..64).map(|i| (i as f64 + 1.0) / 4096.0).collect();
        let at = |s: f64| {
            let x: Vec<Activation> = base.iter().map(|v| Activation::quantize(v * s)).collect();
            m.infer(&x).scores
        };
        let lo = at(f64::from(scale));
        let hi = at(f64::from(scale) * 2.0);
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!(a.raw() >= 0 && b >= a, "{a:?} -> {b:?}");
        }
    }

    #[test]
    fn zero_padding_is_neutral(seed in any::<u64>(), hits in proptest::collection::vec(-32768i64..=32767, 0..=64)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DenseModel::random(&DenseModel::reference_sizes(), 127, &mut rng);
        let x: Vec<Activation> = hits.iter().map(|&r| Activation::from_raw_saturating(r)).collect();
        let r = m.infer(&x);
        for extra in [1, 7, 64 - x.len()] {
            let mut y = x.clone();
            y.resize((x.len() + extra).min(64), Activation::ZERO);
            prop_assert_eq!(&m.infer(&y), &r);
        }
    }

    #[test]
    fn timing_identities_hold_exactly(clock in 1u64..=1_000_000_000_000, ii in 1u64..=1_000_000, depth in 1u64..=1_000_000) {
        let t = PipelineTiming::new(clock, ii, depth).unwrap();
        prop_assert_eq!(t.throughput_hz() * Ratio::from_integer(u128::from(ii)), Ratio::from_integer(u128::from(clock)));
        prop_assert_eq!(t.latency_s() * Ratio::from_integer(u128::from(clock)), Ratio::from_integer(u128::from(depth)));
    }
}
