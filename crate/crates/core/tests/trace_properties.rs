use falsitav::trace::{validate_samples, Sample, Trace, TraceViolation};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e3f64..1e3,
        prop::num::f64::NORMAL,
        prop::num::f64::SUBNORMAL,
        Just(0.0),
        Just(-0.0),
    ]
}

fn trace() -> impl Strategy<Value = Trace> {
    (1usize..5, 1usize..40).prop_flat_map(|(k, n)| {
        (
            prop::collection::vec(1e-9f64..10.0, n),
            prop::collection::vec(prop::collection::vec(finite(), n), k),
            0.0f64..100.0,
        )
            .prop_map(move |(steps, columns, t0)| {
                let times = steps
                    .iter()
                    .scan(t0, |t, dt| {
                        let now = *t;
                        *t += dt;
                        Some(now)
                    })
                    .collect();
                let names = (0..k).map(|j| format!("s{j}")).collect();
                Trace::from_columns(times, names, columns).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn csv_round_trip_is_bit_exact(t in trace()) {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Trace::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.times().len(), t.times().len());
        for (a, b) in back.times().iter().zip(t.times()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        for name in t.signal_names() {
            let (a, b) = (back.signal(name).unwrap(), t.signal(name).unwrap());
            prop_assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn samples_and_columns_agree(t in trace()) {
        let samples: Vec<Sample> = (0..t.len()).map(|i| t.sample(i).unwrap()).collect();
        let names = t.signal_names().to_vec();
        prop_assert!(validate_samples(&names, &samples).is_ok());
        prop_assert_eq!(Trace::from_samples(names, &samples).unwrap(), t);
    }

    #[test]
    fn repeated_time_is_rejected(t in trace(), at in any::<prop::sample::Index>()) {
        prop_assume!(t.len() >= 2);
        let i = 1 + at.index(t.len() - 1);
        let mut times = t.times().to_vec();
        times[i] = times[i - 1];
        let names = t.signal_names().to_vec();
        let columns = names.iter().map(|n| t.signal(n).unwrap().to_vec()).collect();
        let err = Trace::from_columns(times, names, columns).unwrap_err();
        prop_assert!(err.to_string().contains("non-increasing"), "{}", err);
    }

    #[test]
    fn non_finite_values_are_reported(t in trace(), at in any::<prop::sample::Index>(), bad in prop_oneof![Just(f64::NAN), Just(f64::INFINITY)]) {
        let i = at.index(t.len());
        let mut samples: Vec<Sample> = (0..t.len()).map(|k| t.sample(k).unwrap()).collect();
        samples[i].values.insert("s0".into(), bad);
        let v = validate_samples(t.signal_names(), &samples).unwrap_err();
        let expected = TraceViolation::NonFinite { signal: "s0".into(), index: i };
        prop_assert!(v.contains(&expected), "{:?}", v);
    }
}
