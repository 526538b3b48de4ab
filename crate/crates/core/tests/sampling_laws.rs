use pgnaa_core::experiments::gof::{chi_square_gof, chi_square_homogeneity};
use pgnaa_core::rng::seeded;
use pgnaa_core::sampling::{
    rsm1_event_list, rsm2_binomial_thinning, rsm3_with_method, ChannelSampler, MultinomialMethod, SampleBudget,
};
use pgnaa_core::spectra::{ChannelCalibration, Provenance, Spectrum};
use proptest::prelude::*;

const ALPHA: f64 = 0.001;

fn toy() -> Spectrum {
    let cal = ChannelCalibration::new(4, 1.3, 1.3).unwrap();
    Spectrum::new(cal, vec![1, 10, 2, 0], "toy", Provenance::Measured).unwrap()
}

fn factorial(n: u64) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// All (a, b, c) with a + b + c = k and their multinomial probabilities
/// under weights 1:10:2, enumerated directly from the pmf.
fn toy_outcomes(k: u64) -> Vec<([u64; 3], f64)> {
    let p: [f64; 3] = [1.0 / 13.0, 10.0 / 13.0, 2.0 / 13.0];
    let mut out = vec![];
    for a in 0..=k {
        for b in 0..=k - a {
            let c = k - a - b;
            let coef = factorial(k) / (factorial(a) * factorial(b) * factorial(c));
            let prob = coef * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32);
            out.push(([a, b, c], prob));
        }
    }
    out
}

#[test]
fn toy_outcomes_enumeration_is_a_distribution() {
    let outcomes = toy_outcomes(5);
    assert_eq!(outcomes.len(), 21);
    let total: f64 = outcomes.iter().map(|o| o.1).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn rsm3_toy_draws_follow_the_multinomial_law() {
    let s = toy();
    let outcomes = toy_outcomes(5);
    let probs: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
    for method in [MultinomialMethod::Alias, MultinomialMethod::ConditionalBinomial, MultinomialMethod::Auto] {
        let mut rng = seeded(11);
        let mut observed = vec![0u64; outcomes.len()];
        for _ in 0..100_000 {
            let d = rsm3_with_method(&s, SampleBudget(5), method, &mut rng).unwrap();
            assert_eq!(d.total(), 5);
            assert_eq!(d.counts[3], 0);
            let key = [d.counts[0], d.counts[1], d.counts[2]];
            let idx = outcomes.iter().position(|o| o.0 == key).unwrap();
            observed[idx] += 1;
        }
        let test = chi_square_gof(&observed, &probs).unwrap();
        assert!(test.passes(ALPHA), "{method:?}: {test:?}");
    }
}

#[test]
fn rsm3_routes_agree_on_a_wide_spectrum() {
    let cal = ChannelCalibration::pgnaa().with_channels(512).unwrap();
    let counts: Vec<u64> = (0..512u64).map(|i| 50 + (i * 37) % 400).collect();
    let s = Spectrum::new(cal, counts, "wide", Provenance::Measured).unwrap();
    let mut a = vec![0u64; 512];
    let mut b = vec![0u64; 512];
    let mut rng = seeded(3);
    for _ in 0..20 {
        let x = rsm3_with_method(&s, SampleBudget(20_000), MultinomialMethod::Alias, &mut rng).unwrap();
        let y = rsm3_with_method(&s, SampleBudget(20_000), MultinomialMethod::ConditionalBinomial, &mut rng).unwrap();
        for i in 0..512 {
            a[i] += x.counts[i];
            b[i] += y.counts[i];
        }
    }
    let total = s.total_counts() as f64;
    let probs: Vec<f64> = s.counts().iter().map(|&c| c as f64 / total).collect();
    assert!(chi_square_gof(&a, &probs).unwrap().passes(ALPHA));
    assert!(chi_square_gof(&b, &probs).unwrap().passes(ALPHA));
    assert!(chi_square_homogeneity(&a, &b).unwrap().passes(ALPHA));
}

#[test]
fn rsm1_histogram_follows_channel_probabilities() {
    let s = toy();
    let mut rng = seeded(21);
    let ev = rsm1_event_list(&s, SampleBudget(50_000), &mut rng).unwrap();
    let hist = ev.histogram(4);
    assert_eq!(hist[3], 0);
    let probs = [1.0 / 13.0, 10.0 / 13.0, 2.0 / 13.0, 0.0];
    assert!(chi_square_gof(&hist, &probs).unwrap().passes(ALPHA));
}

#[test]
fn rsm2_thinning_has_binomial_mean() {
    let cal = ChannelCalibration::new(3, 1.0, 0.0).unwrap();
    let s = Spectrum::new(cal, vec![1000, 0, 4000], "thin", Provenance::Measured).unwrap();
    let mut rng = seeded(4);
    let n = 2000;
    let mut sum = [0u64; 3];
    for _ in 0..n {
        let d = rsm2_binomial_thinning(&s, 0.25, &mut rng).unwrap();
        assert_eq!(d.counts[1], 0);
        for (a, b) in sum.iter_mut().zip(&d.counts) {
            *a += b;
        }
    }
    for (ch, &c) in [1000.0f64, 0.0, 4000.0].iter().enumerate() {
        let mean = sum[ch] as f64 / n as f64;
        let se = (c * 0.25 * 0.75 / n as f64).sqrt();
        assert!((mean - 0.25 * c).abs() <= 5.0 * se + 1e-12, "channel {ch}: {mean}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multinomial_conserves_budget_and_support(
        counts in prop::collection::vec(prop_oneof![Just(0u64), 1u64..1000], 1..40),
        k in 0u64..5000,
        seed in any::<u64>(),
        binomial in any::<bool>(),
    ) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        let method = if binomial { MultinomialMethod::ConditionalBinomial } else { MultinomialMethod::Alias };
        let sampler = ChannelSampler::new(&counts).unwrap();
        let draw = sampler.multinomial(k, method, &mut seeded(seed)).unwrap();
        prop_assert_eq!(draw.iter().sum::<u64>(), k);
        for (d, c) in draw.iter().zip(&counts) {
            if *c == 0 {
                prop_assert_eq!(*d, 0);
            }
        }
    }

    #[test]
    fn equal_seeds_give_equal_draws(seed in any::<u64>(), k in 1u64..2000) {
        let s = toy();
        let a = rsm3_with_method(&s, SampleBudget(k), MultinomialMethod::Auto, &mut seeded(seed)).unwrap();
        let b = rsm3_with_method(&s, SampleBudget(k), MultinomialMethod::Auto, &mut seeded(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}
