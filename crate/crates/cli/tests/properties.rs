use proptest::prelude::*;
use twinfuse::artifacts::{fmt_f64, metrics_csv, trace_jsonl};
use twinfuse::ingest::{parse_log, resample, Channel, Grid, ResamplePolicy};
use twinfuse::synth::{generate_triad, Generator};
use twinfuse_core::{
    run_scenario, FaultAssignment, FaultSpec, Metric, ScenarioConfig, SoftMode, Timestamp, TwinKind, TwinSettings,
};

proptest! {
    #[test]
    fn floats_survive_the_text_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        let csv = String::from_utf8(metrics_csv(&[Metric { name: "m".into(), sensor: Some(1), value: v }], None)).unwrap();
        let field = csv.lines().nth(1).unwrap().rsplit(',').next().unwrap();
        prop_assert_eq!(field.parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn logged_minutes_resample_back_to_themselves(
        values in prop::collection::vec(-50.0f64..50.0, 1..40),
        mote in 1u32..60,
    ) {
        // one row per minute, plus rows for another mote that must be ignored
        let mut log = String::new();
        for (i, v) in values.iter().enumerate() {
            let (h, m) = (i / 60, i % 60);
            log.push_str(&format!("2004-03-01 {h:02}:{m:02}:00 {i} {mote} {v:?} 40.0\n"));
            log.push_str(&format!("2004-03-01 {h:02}:{m:02}:00 {i} {} 99.0 40.0\n", mote + 1));
        }
        let parsed = parse_log(log.as_bytes(), mote, Channel::Temperature).unwrap();
        prop_assert_eq!(parsed.pairs.len(), values.len());
        let start = parsed.pairs[0].0 as u64;
        let grid = Grid { start: Timestamp(start), interval_s: 60, len: values.len() };
        for policy in [ResamplePolicy::Locf, ResamplePolicy::Linear] {
            let trace = resample(&parsed.pairs, grid, policy, mote, Channel::Temperature.kind()).unwrap();
            let got: Vec<f64> = trace.readings().iter().map(|r| r.value().unwrap()).collect();
            prop_assert_eq!(&got, &values);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scenario_artifacts_depend_only_on_config_and_seed(seed in any::<u64>(), noise_seed in any::<u64>()) {
        let g = Generator::Sinusoid { offset: 10.0, amplitude: 2.0, period_s: 3600.0, phase_s: 0.0 };
        let (traces, truth) = generate_triad(&g, Timestamp(0), 60, 300, 0.05, noise_seed);
        let cfg = ScenarioConfig {
            twin: TwinSettings {
                kind: TwinKind::AdditiveSeasonal,
                train_len: 120,
                seasonal_period_s: 3600,
                fourier_order_k: 1,
                kalman_q: None,
                kalman_r: None,
            },
            run_len: 180,
            threshold: twinfuse_core::Threshold::absolute(0.5),
            fault_specs: vec![FaultAssignment {
                sensor: 1,
                spec: FaultSpec::intermittent(140, 100, 0.4, SoftMode::Offset(3.0)),
            }],
            seed,
            ..ScenarioConfig::default()
        };
        let a = run_scenario(&cfg, &traces, Some(&truth)).unwrap();
        let b = run_scenario(&cfg, &traces, Some(&truth)).unwrap();
        prop_assert_eq!(trace_jsonl(&a.cycles), trace_jsonl(&b.cycles));
        prop_assert_eq!(metrics_csv(&a.metrics, a.failure_cycle()), metrics_csv(&b.metrics, b.failure_cycle()));
        prop_assert!(a.replay_is_consistent());
    }
}
