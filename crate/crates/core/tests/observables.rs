use spreadsim::engine::{self, EventRecord};
use spreadsim::observables::{counts_on_grid, EnsembleAccumulator, LogHeader, ObservablesError};
use spreadsim::{
    ensemble_mean, generate, preset, uniform_grid, CompiledModel, EventLog, GeneratorKind,
    InitialCondition, MultilayerNetwork, RunConfig, StopCondition, Termination,
};

fn sis_model(n: usize) -> CompiledModel {
    let g = generate(GeneratorKind::ErdosRenyi { p: 8.0 / n as f64 }, n, 4).unwrap();
    CompiledModel::compile(preset::sis(0.4, 1.0).unwrap(), MultilayerNetwork::single(g)).unwrap()
}

#[test]
fn replay_of_long_run_matches_final_states() {
    let model = sis_model(500);
    let cfg = RunConfig::new(
        InitialCondition::Counts(vec![400, 100]),
        StopCondition::MaxEvents(10_000),
        3,
    );
    let out = engine::run(&model, &cfg).unwrap();
    assert_eq!(out.log.records.len(), 10_000);
    assert_eq!(out.log.replay().unwrap(), out.final_states);
    let text = out.log.to_text().unwrap();
    let back = EventLog::read(text.as_bytes()).unwrap();
    assert_eq!(back, out.log);
    assert_eq!(back.replay().unwrap(), out.final_states);
}

#[test]
fn million_record_log_round_trips() {
    let n = 1000u32;
    let mut states = vec![0u16; n as usize];
    let mut records = Vec::with_capacity(1_000_000);
    let mut t = 0.0;
    for k in 0..1_000_000u64 {
        let node = ((k * 7919) % n as u64) as u32;
        let from = states[node as usize];
        let to = 1 - from;
        states[node as usize] = to;
        t += 1.0 / (1.0 + (k % 13) as f64);
        records.push(EventRecord {
            time: t,
            node,
            from,
            to,
        });
    }
    let log = EventLog {
        header: LogHeader {
            nodes: n as usize,
            state_names: vec!["S".into(), "I".into()],
            seed: 1,
            run: 0,
            model_digest: "x".into(),
            final_time: t,
            termination: Termination::MaxEvents,
        },
        initial: vec![0; n as usize],
        records,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.csv");
    log.write_path(&path).unwrap();
    let back = EventLog::read_path(&path).unwrap();
    assert_eq!(back.digest().unwrap(), log.digest().unwrap());
    assert_eq!(back.replay().unwrap(), states);

    // Cutting the file anywhere inside the records is detected.
    let bytes = std::fs::read(&path).unwrap();
    for cut in [bytes.len() - 1, bytes.len() - 40, bytes.len() / 2] {
        let r = EventLog::read(&bytes[..cut]);
        assert!(
            matches!(r, Err(ObservablesError::Parse { .. })),
            "cut at {cut}"
        );
    }
}

#[test]
fn grid_rows_sum_to_n() {
    let model = sis_model(300);
    let cfg = RunConfig::new(
        InitialCondition::Counts(vec![280, 20]),
        StopCondition::MaxTime(20.0),
        9,
    );
    let out = engine::run(&model, &cfg).unwrap();
    let ts = counts_on_grid(&out.log, &uniform_grid(20.0, 81)).unwrap();
    for k in 0..81 {
        assert_eq!(ts.row(k).iter().sum::<u64>(), 300);
    }
    assert_eq!(ts.row(0), out.log.initial_counts());
    let last: Vec<u64> = out.final_counts(2).iter().map(|&c| c as u64).collect();
    assert_eq!(ts.row(80), last);
    assert!(counts_on_grid(&out.log, &[20.5]).is_err());
}

#[test]
fn empty_log_grid_is_initial_counts() {
    let model = sis_model(50);
    let cfg = RunConfig::new(
        InitialCondition::Counts(vec![50, 0]),
        StopCondition::Absorption,
        1,
    );
    let out = engine::run(&model, &cfg).unwrap();
    let ts = counts_on_grid(&out.log, &[0.0, 5.0, 100.0]).unwrap();
    for k in 0..3 {
        assert_eq!(ts.row(k), [50, 0]);
    }
}

#[test]
fn ensemble_is_order_independent() {
    let g = generate(GeneratorKind::ErdosRenyi { p: 0.05 }, 200, 2).unwrap();
    let model =
        CompiledModel::compile(preset::sir(0.3, 0.2).unwrap(), MultilayerNetwork::single(g))
            .unwrap();
    let grid = uniform_grid(40.0, 41);
    let series: Vec<_> = (0..40)
        .map(|run| {
            let cfg = RunConfig::new(
                InitialCondition::Counts(vec![195, 5, 0]),
                StopCondition::Absorption,
                5,
            )
            .with_run(run);
            counts_on_grid(&engine::run(&model, &cfg).unwrap().log, &grid).unwrap()
        })
        .collect();
    let forward = ensemble_mean(&series).unwrap();
    let mut reversed = series.clone();
    reversed.reverse();
    reversed.swap(3, 17);
    assert_eq!(ensemble_mean(&reversed).unwrap(), forward);

    let names = series[0].state_names.clone();
    let mut left = EnsembleAccumulator::new(grid.clone(), names.clone(), 200);
    let mut right = EnsembleAccumulator::new(grid.clone(), names, 200);
    for (i, s) in series.iter().enumerate() {
        if i % 3 == 0 {
            left.add(s).unwrap()
        } else {
            right.add(s).unwrap()
        }
    }
    right.merge(&left).unwrap();
    assert_eq!(right.finish().unwrap(), forward);

    for k in 0..grid.len() {
        let sum: f64 = forward.mean_row(k).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
    let mut csv = Vec::new();
    forward.write_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("t,S,I,R,S_std,I_std,R_std\n"));
    assert_eq!(csv.lines().count(), 42);
}
