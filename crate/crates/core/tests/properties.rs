use kljn_core::adversary::leak_report;
use kljn_core::lifetime::{key_lifetime, key_lifetime_closed_form, LifetimeParams};
use kljn_core::noise::{loop_msv, solve_loop, NoiseTrace};
use kljn_core::protocol::{classify_level, KeyMaterial, Level, Thresholds};
use proptest::prelude::*;

fn trace(samples: Vec<f64>) -> NoiseTrace {
    let n = samples.len();
    NoiseTrace {
        samples,
        sample_rate: 1.0,
        duration: n as f64,
    }
}

fn params() -> impl Strategy<Value = LifetimeParams> {
    (
        0.01f64..0.9,
        1e7f64..3e8,
        10.0f64..1e4,
        10.0f64..1e3,
        1u64..10_000,
        1.0f64..1e5,
        1u32..16,
    )
        .prop_map(|(theta, c, l, gamma, nk, nc, m)| LifetimeParams {
            theta,
            wave_speed: c,
            line_length: l,
            gamma,
            key_length: nk,
            car_count: None,
            kljn_unit_count: None,
            car_density: Some(nc),
            parallel_channels: m,
        })
}

proptest! {
    #[test]
    fn loop_solution_is_linear(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..64),
        scale in -5.0f64..5.0,
        r_a in 1.0f64..1e6,
        r_b in 1.0f64..1e6,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let base = solve_loop(&trace(a.clone()), r_a, &trace(b.clone()), r_b).unwrap();
        let scaled = solve_loop(
            &trace(a.iter().map(|x| x * scale).collect()),
            r_a,
            &trace(b.iter().map(|x| x * scale).collect()),
            r_b,
        )
        .unwrap();
        for k in 0..a.len() {
            let tol = 1e-12 * (1.0 + a[k].abs() + b[k].abs()) * (1.0 + scale.abs());
            prop_assert!((scaled.voltage[k] - scale * base.voltage[k]).abs() <= tol);
            prop_assert!((scaled.current[k] - scale * base.current[k]).abs() <= tol);
        }
    }

    #[test]
    fn swapping_ends_keeps_voltage_and_flips_current(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..64),
        r_a in 1.0f64..1e6,
        r_b in 1.0f64..1e6,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let fwd = solve_loop(&trace(a.clone()), r_a, &trace(b.clone()), r_b).unwrap();
        let rev = solve_loop(&trace(b), r_b, &trace(a), r_a).unwrap();
        for k in 0..fwd.len() {
            prop_assert!((fwd.voltage[k] - rev.voltage[k]).abs() <= 1e-12 * (1.0 + fwd.voltage[k].abs()));
            prop_assert_eq!(fwd.current[k], -rev.current[k]);
        }
        let (u1, i1) = loop_msv(r_a, r_b, 1e15, 2e4);
        let (u2, i2) = loop_msv(r_b, r_a, 1e15, 2e4);
        prop_assert!((u1 - u2).abs() <= 1e-12 * u1);
        prop_assert!((i1 - i2).abs() <= 1e-12 * i1);
    }

    #[test]
    fn lifetime_closed_form_matches_composition(p in params()) {
        let composed = key_lifetime(&p).unwrap().key_lifetime;
        let closed = key_lifetime_closed_form(&p).unwrap();
        prop_assert!((composed - closed).abs() <= 1e-12 * closed);
    }

    #[test]
    fn lifetime_grows_with_demand_and_shrinks_with_capacity(p in params(), f in 1.01f64..4.0) {
        let base = key_lifetime_closed_form(&p).unwrap();
        let with = |q: LifetimeParams| key_lifetime_closed_form(&q).unwrap();
        let longer_keys = with(LifetimeParams { key_length: p.key_length * 2, ..p });
        let more_cars = with(LifetimeParams { car_density: p.car_density.map(|n| n * f), ..p });
        let slower_bits = with(LifetimeParams { gamma: p.gamma * f, ..p });
        let longer_line = with(LifetimeParams { line_length: p.line_length * f, ..p });
        let faster_wave = with(LifetimeParams { wave_speed: p.wave_speed * f, ..p });
        let more_channels = with(LifetimeParams { parallel_channels: p.parallel_channels + 1, ..p });
        prop_assert!(longer_keys > base);
        prop_assert!(more_cars > base);
        prop_assert!(slower_bits > base);
        prop_assert!(longer_line > base);
        prop_assert!(faster_wave < base);
        prop_assert!(more_channels < base);
        let theta = (p.theta * f).min(0.99);
        if theta > p.theta {
            let wider_band = with(LifetimeParams { theta, ..p });
            prop_assert!(wider_band < base);
        }
    }

    #[test]
    fn one_time_pad_is_an_involution(
        pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 0..300),
    ) {
        let (key, pad): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let key = KeyMaterial::from_bits(key);
        let pad = KeyMaterial::from_bits(pad);
        let cipher = key.xor(&pad).unwrap();
        let plain = cipher.xor(&pad).unwrap();
        prop_assert_eq!(plain.bits(), key.bits());
        prop_assert_eq!(key.to_bytes().len(), key.len().div_ceil(8));
    }

    #[test]
    fn leak_policy_is_all_or_nothing(
        alarmed in prop::collection::vec(any::<bool>(), 0..200),
        max_leak in 0.0f64..1.0,
    ) {
        let drop = leak_report(&alarmed, max_leak);
        prop_assert_eq!(drop.len(), alarmed.len());
        let nothing = drop.iter().all(|d| !d);
        prop_assert!(nothing || drop == alarmed);
        for (d, a) in drop.iter().zip(&alarmed) {
            prop_assert!(!d || *a);
        }
        if max_leak == 0.0 {
            prop_assert_eq!(drop, alarmed);
        }
    }

    #[test]
    fn level_decision_is_monotone(x in 0.0f64..100.0, y in 0.0f64..100.0) {
        let t = Thresholds {
            lower: 10.0,
            upper: 30.0,
        };
        let rank = |l: Level| match l {
            Level::Low => 0,
            Level::Mid => 1,
            Level::High => 2,
        };
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(rank(classify_level(lo, &t)) <= rank(classify_level(hi, &t)));
    }
}
