use proptest::prelude::*;
use sidlab::dynamics::ExitRecord;
use sidlab::harness::{fit_log_times, kramers_window_fraction};

fn record(sigma: f64, t: f64, censored: bool) -> ExitRecord {
    ExitRecord {
        sigma,
        seed: 0,
        exit_time: t,
        censored,
        exit_point: (!censored).then(|| vec![1.0]),
        gamma_before_exit: false,
        steps: 1,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn slope_is_exact_on_exponential_data(
        h in 0.05..3.0f64,
        prefactor in 0.1..10.0f64,
        sigmas in prop::collection::btree_set(30u32..120, 2..7),
    ) {
        let pts: Vec<(f64, f64)> = sigmas
            .iter()
            .map(|s| {
                let s = *s as f64 / 100.0;
                (s, prefactor * (2.0 * h / (s * s)).exp())
            })
            .collect();
        let fit = fit_log_times(&pts).unwrap();
        prop_assert!((fit.slope - 2.0 * h).abs() <= 1e-9 * (2.0 * h));
        prop_assert!((fit.intercept - prefactor.ln()).abs() <= 1e-6);
        prop_assert!(fit.stderr <= 1e-9 * fit.slope.abs().max(1.0));
    }

    #[test]
    fn window_fractions_are_monotone_and_bounded(
        times in prop::collection::vec((0.0..50.0f64, any::<bool>()), 1..200),
        h in 0.1..1.0f64,
        d1 in 0.0..0.5f64,
        dd in 0.0..0.5f64,
    ) {
        let recs: Vec<ExitRecord> = times.iter().map(|(t, c)| record(0.6, *t, *c)).collect();
        let f1 = kramers_window_fraction(&recs, h, d1 * h).unwrap();
        let f2 = kramers_window_fraction(&recs, h, (d1 + dd) * h).unwrap();
        prop_assert!(f1 <= f2);
        let uncensored = recs.iter().filter(|r| !r.censored).count() as f64 / recs.len() as f64;
        prop_assert!(f2 <= uncensored + 1e-15);
    }
}
