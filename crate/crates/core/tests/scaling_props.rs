use lorapdr::scaling::{
    channel_load, derive_equivalent, success_bounds, success_exact_periodic, ChannelLoad, TrafficProfile,
};
use proptest::prelude::*;

proptest! {
    /// `(1 - 2x)^(N-1)` never exceeds `exp(-2 L)` with `L` counted over the
    /// `N - 1` interferers, since `1 - y <= e^-y`.
    #[test]
    fn exact_below_interferer_lower_bound(n in 1u64..5000, period in 1.0f64..1000.0, frac in 0.0001f64..0.5) {
        let airtime = period * frac;
        let p = TrafficProfile::new(n, period, airtime).unwrap();
        let exact = success_exact_periodic(&p).unwrap();
        let l_interferers = ChannelLoad::new((n - 1) as f64 * airtime / period).unwrap();
        prop_assert!(exact <= success_bounds(l_interferers).lower * (1.0 + 1e-12));
    }

    /// With `L` counted over all `N` devices the exact law sits inside the
    /// analytic band whenever duty cycle and load are moderate.
    #[test]
    fn exact_inside_band_at_low_duty(n in 2u64..5000, load in 0.01f64..0.9, period in 1.0f64..1000.0) {
        let airtime = load * period / n as f64;
        prop_assume!(airtime / period <= 0.05);
        let p = TrafficProfile::new(n, period, airtime).unwrap();
        let exact = success_exact_periodic(&p).unwrap();
        let b = success_bounds(channel_load(&p));
        prop_assert!(b.lower <= exact + 1e-12, "lower {} exact {}", b.lower, exact);
        prop_assert!(exact <= b.upper + 1e-12);
    }

    #[test]
    fn bounds_ordered(load in 0.0f64..50.0) {
        let b = success_bounds(ChannelLoad::new(load).unwrap());
        prop_assert!(b.lower <= b.upper);
        prop_assert!(b.lower > 0.0 && b.upper <= 1.0);
    }

    #[test]
    fn exact_monotone(n in 2u64..2000, period in 1.0f64..1000.0, frac in 0.0001f64..0.2) {
        let airtime = period * frac;
        let base = success_exact_periodic(&TrafficProfile::new(n, period, airtime).unwrap()).unwrap();
        prop_assume!(base > 1e-250);
        let more = success_exact_periodic(&TrafficProfile::new(n + 1, period, airtime).unwrap()).unwrap();
        let longer = success_exact_periodic(&TrafficProfile::new(n, period, airtime * 1.1).unwrap()).unwrap();
        let faster = success_exact_periodic(&TrafficProfile::new(n, period / 1.1, airtime).unwrap()).unwrap();
        prop_assert!(more < base);
        prop_assert!(longer < base);
        prop_assert!(faster < base);
    }

    #[test]
    fn derived_experiment_reproduces_load(
        n in 1u64..100_000,
        period in 10.0f64..3600.0,
        frac in 0.00001f64..0.01,
        exp_period in 1.0f64..60.0,
        exp_frac in 0.001f64..0.2,
    ) {
        let real = TrafficProfile::new(n, period, period * frac).unwrap();
        let exp_airtime = exp_period * exp_frac;
        match derive_equivalent(&real, exp_period, exp_airtime) {
            Ok(e) => {
                let lr = channel_load(&real).value();
                let le = channel_load(&e).value();
                let n_e = e.num_devices() as f64;
                prop_assert!(n_e >= 1.0);
                prop_assert!((le - lr).abs() / lr <= 1.0 / (2.0 * n_e - 1.0) + 1e-12);
            }
            Err(_) => prop_assert!(channel_load(&real).value() * exp_period / exp_airtime < 0.5),
        }
    }
}
