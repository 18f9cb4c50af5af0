use super::*;
use crate::initializers::InitKind;

fn tiny(kind: TaskKind) -> (Dataset, InitStrategy, TrainConfig) {
    let spec = TaskSpec {
        duration_s: 0.1,
        ..TaskSpec::new(kind)
    };
    let c = kind.n_classes();
    let ds = make_dataset(&spec, DatasetSizes::new(10 * c, c, c), 5).unwrap();
    let init = InitStrategy {
        n_filters: 8,
        ..InitStrategy::new(InitKind::Mel)
    };
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 4,
        lr_max: 1e-2,
        period_epochs: 2,
        hidden: 8,
        kernel_width: 101,
        stride: 80,
        lp_width: 81,
        ..Default::default()
    };
    (ds, init, cfg)
}

#[test]
fn fixed_filterbank_never_moves() {
    let (ds, init, cfg) = tiny(TaskKind::Band4);
    let cfg = TrainConfig {
        trainable: Trainable::FixedFb,
        ..cfg
    };
    let run = train(&ds, &init, &cfg, None).unwrap();
    assert_eq!(run.snapshots.len(), 3);
    for s in &run.snapshots {
        assert_eq!(s, &run.snapshots[0]);
    }
    // PCEN still trains.
    let untrained = initial_model(&ds, &init, &cfg).unwrap();
    assert_ne!(run.model.frontend.pcen, untrained.frontend.pcen);
}

#[test]
fn learnable_filterbank_moves_and_runs_are_deterministic() {
    let (ds, init, cfg) = tiny(TaskKind::Band4);
    let a = train(&ds, &init, &cfg, None).unwrap();
    assert_ne!(a.snapshots[2], a.snapshots[0]);
    let b = train(&ds, &init, &cfg, None).unwrap();
    assert_eq!(MetricsRow::to_csv(&a.metrics), MetricsRow::to_csv(&b.metrics));
    assert_eq!(a.snapshots, b.snapshots);
    let seq = train(
        &ds,
        &init,
        &TrainConfig {
            mode: ExecMode::Sequential,
            ..cfg
        },
        None,
    )
    .unwrap();
    assert_eq!(seq.metrics, a.metrics);
}

#[test]
fn metrics_rows_cover_splits_and_roundtrip() {
    let (ds, init, cfg) = tiny(TaskKind::Band4);
    let run = train(&ds, &init, &cfg, None).unwrap();
    assert_eq!(run.rows(Split::Val).count(), 3);
    assert_eq!(run.rows(Split::Train).count(), 2);
    assert_eq!(run.rows(Split::Test).count(), 1);
    let text = MetricsRow::to_csv(&run.metrics);
    assert_eq!(MetricsRow::from_csv(&text).unwrap(), run.metrics);
    assert!(run.final_val_accuracy().is_some());
}

#[test]
fn curriculum_run_keeps_snr_monotone() {
    let (ds, init, cfg) = tiny(TaskKind::Band2);
    let cfg = TrainConfig {
        curriculum: true,
        patience: 1,
        epochs: 4,
        ..cfg
    };
    let run = train(&ds, &init, &cfg, None).unwrap();
    let snr: Vec<f64> = run.rows(Split::Val).map(|r| r.max_snr_db).collect();
    assert_eq!(snr[0], SNR_FLOOR_DB);
    assert!(snr.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn run_directory_contents_and_overwrite_policy() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("run");
    let (ds, init, cfg) = tiny(TaskKind::Band4);
    let dir = RunDir::create(&root, false).unwrap();
    let run = train(&ds, &init, &cfg, Some(&dir)).unwrap();
    let (snaps, fs) = dir.load_snapshots().unwrap();
    assert_eq!(fs, 16_000);
    assert_eq!(snaps, run.snapshots);
    assert_eq!(dir.load_metrics().unwrap(), run.metrics);
    let ck = Checkpoint::load(&dir.checkpoint_path()).unwrap();
    assert_eq!(ck.epoch, 2);
    assert_eq!(ck.model, run.model);

    assert!(matches!(RunDir::create(&root, false), Err(LeafError::Config(_))));
    let again = RunDir::create(&root, true).unwrap();
    assert!(matches!(again.load_snapshots(), Err(LeafError::Snapshot(_))));
}
