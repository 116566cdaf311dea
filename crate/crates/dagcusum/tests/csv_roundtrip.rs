use dagcusum::core::DetectorKind;
use dagcusum::csv_io::{parse_results, results_to_string, sort_results};
use dagcusum::{RunResult, SensorId};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e9f64..1e9, 0.0f64..1.0, Just(0.0), Just(1e-300)]
}

fn result() -> impl Strategy<Value = RunResult> {
    (
        prop::sample::select(DetectorKind::ALL.to_vec()),
        prop::option::of(1usize..=64),
        finite(),
        prop::option::of(finite()),
        prop::option::of(finite()),
        prop::option::of(finite()),
        prop::option::of(0.0f64..=1.0),
        0usize..5000,
        any::<u64>(),
    )
        .prop_map(|(detector, sensor, h, fap, delay, ci, censored, reps, seed)| RunResult {
            detector,
            sensor: sensor.map_or(SensorId::Central, SensorId::Sensor),
            h,
            false_alarm_period: fap,
            mean_delay: delay,
            delay_ci: ci,
            censored_frac: censored,
            reps,
            seed,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn parse_inverts_emit(mut rows in prop::collection::vec(result(), 0..8)) {
        sort_results(&mut rows);
        let text = results_to_string(&rows);
        let back = parse_results(text.as_bytes()).unwrap();
        prop_assert_eq!(back, rows);
    }
}

#[test]
fn header_names_every_column() {
    let text = results_to_string(&[]);
    assert_eq!(text, "detector,sensor,h,false_alarm_period,mean_delay,delay_ci,censored_frac,reps,seed\n");
}
