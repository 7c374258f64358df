//! Config round trips, the experiment grid and the command-line binary.

use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use selective_backprop::experiment::{read_summary_csv, run_grid};
use selective_backprop::selection::CdfSource;
use selective_backprop::trainer::read_metrics_csv;
use selective_backprop::*;

fn kinds() -> impl Strategy<Value = Vec<StrategyKind>> {
    prop::collection::vec(prop::sample::select(StrategyKind::ALL.to_vec()), 1..4)
}

fn schedule() -> impl Strategy<Value = Schedule> {
    prop_oneof![
        Just(Schedule::Constant),
        Just(Schedule::Cosine),
        (prop::collection::btree_set(1usize..300, 1..5), 0.01f64..1.0).prop_map(|(m, factor)| Schedule::Step {
            milestones: m.into_iter().collect(),
            factor
        }),
    ]
}

fn spec() -> impl Strategy<Value = ExperimentSpec> {
    (
        (
            1usize..5000,
            1usize..6,
            1usize..8,
            0.0f64..10.0,
            0.0f64..1.0,
            any::<u64>(),
            0.05f64..0.95,
        ),
        (
            prop::collection::vec(1usize..64, 0..3),
            any::<bool>(),
            prop::option::of(any::<u64>()),
        ),
        (
            1usize..512,
            any::<bool>(),
            1usize..300,
            any::<bool>(),
            any::<bool>(),
            0.0f64..0.99,
        ),
        (
            0.0f64..0.1,
            schedule(),
            1e-4f64..1.0,
            0.01f64..10.0,
            any::<bool>(),
            0.0f64..0.99,
        ),
        (
            kinds(),
            any::<bool>(),
            prop::option::of(1usize..5000),
            any::<[bool; 4]>(),
        ),
        (
            prop::collection::vec(0.01f64..=1.0, 1..4),
            prop::collection::vec(any::<u64>(), 1..4),
        ),
        (1usize..500, 1usize..64, 0usize..5, "[a-z][a-z0-9_/]{0,12}"),
    )
        .prop_map(|(d, m, t1, t2, s, g, e)| {
            let classes = d.1.min(d.0);
            ExperimentSpec {
                dataset: DatasetDescriptor {
                    n: d.0,
                    classes: Some(classes),
                    dim: d.2,
                    separation: d.3,
                    noise: d.4,
                    seed: d.5,
                    train_fraction: d.6,
                    ..DatasetDescriptor::default()
                },
                model: ModelSpec {
                    hidden: m.0,
                    activation: if m.1 { Activation::Relu } else { Activation::Tanh },
                    init_seed: m.2,
                },
                train: TrainConfig {
                    base_batch: t1.0,
                    batch_mode: if t1.1 { BatchMode::Fixed } else { BatchMode::Scaled },
                    epochs: t1.2,
                    optimizer: if t1.3 {
                        Optimizer::PlainSgd
                    } else {
                        Optimizer::SgdMomentum {
                            momentum: t1.5,
                            nesterov: t1.4,
                        }
                    },
                    weight_decay: t2.0,
                    schedule: t2.1,
                    base_lr: t2.2,
                    lr_factor: t2.3,
                    stretch_schedule: t2.4,
                    label_noise: t2.5,
                    ..TrainConfig::default()
                },
                kinds: s.0,
                strategy: StrategyConfig {
                    cdf_source: if s.1 {
                        CdfSource::RollingBuffer
                    } else {
                        CdfSource::WithinBatch
                    },
                    buffer_capacity: s.2,
                    clip_negative: s.3[0],
                    abs_correlation: s.3[1],
                    pad_to_m: s.3[2],
                    with_bias: s.3[3],
                    ..StrategyConfig::new(StrategyKind::Random)
                },
                fractions: g.0,
                seeds: g.1,
                eval: EvalSpec {
                    num_batches: e.0,
                    batch: e.1 + 1,
                    subset: e.1,
                    checkpoint_epochs: e.2,
                },
                output_dir: e.3.into(),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dump_then_load_is_identity(s in spec()) {
        let text = dump(&s);
        let back = parse_config(&text, Path::new("dump.cfg")).unwrap();
        prop_assert_eq!(back, s);
    }
}

const GRID: &str = "\
dataset.kind = blobs
dataset.n = 300
dataset.classes = 3
train.base_batch = 32
train.epochs = 2
strategy.kinds = random, loss_based, grad_match
grid.fractions = 0.1, 0.3, 0.5
grid.seeds = 0, 1, 2
eval.num_batches = 5
eval.batch = 32
eval.subset = 8
";

#[test]
fn grid_writes_one_file_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let spec = parse_config(GRID, Path::new("grid.cfg")).unwrap();
    let rows = run_grid(&spec, dir.path(), 4).unwrap();
    assert_eq!(rows.len(), 27);
    assert_eq!(read_summary_csv(&dir.path().join("summary.csv")).unwrap(), rows);
    let metrics: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("metrics_"))
        .collect();
    assert_eq!(metrics.len(), 27);
    let recs = read_metrics_csv(&dir.path().join("metrics_grad_match_rho0.3_seed2.csv")).unwrap();
    assert_eq!(recs.len(), 2);
    let agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 10);

    // Parallel and serial grids agree.
    let serial = tempfile::tempdir().unwrap();
    assert_eq!(run_grid(&spec, serial.path(), 1).unwrap(), rows);
}

fn selbp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_selbp"))
}

#[test]
fn cli_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.cfg");
    std::fs::write(&cfg, GRID).unwrap();
    let out = dir.path().join("out");

    let st = selbp()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--jobs", "2", "--seed", "7"])
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    assert_eq!(read_summary_csv(&out.join("summary.csv")).unwrap().len(), 9);
    assert!(out.join("metrics_random_rho0.1_seed7.csv").exists());

    let st = selbp()
        .args(["grad-error", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let hist = std::fs::read_to_string(out.join("grad_error_seed0.csv")).unwrap();
    assert_eq!(hist.lines().next(), Some("strategy,batch_index,squared_error"));
    assert_eq!(hist.lines().count(), 1 + 3 * 5);

    let st = selbp().arg("selftest").output().unwrap();
    assert!(st.status.success());
    let text = String::from_utf8_lossy(&st.stdout);
    assert!(
        text.lines().count() >= 3 && text.lines().all(|l| l.starts_with("PASS")),
        "{text}"
    );

    let csv = dir.path().join("data.csv");
    let st = selbp()
        .args(["synth-data", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(st.status.success());
    let desc = DatasetDescriptor {
        kind: DatasetKind::Csv,
        path: Some(csv),
        classes: None,
        ..DatasetDescriptor::default()
    };
    let data = load_dataset(&desc).unwrap();
    assert_eq!(data.train.len() + data.test.len(), 300);
    assert_eq!(data.num_classes, 3);
}

#[test]
fn cli_reports_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, format!("{GRID}train.lr = 3\n")).unwrap();
    let st = selbp().args(["train", "--config"]).arg(&cfg).output().unwrap();
    assert!(!st.status.success());
    assert!(String::from_utf8_lossy(&st.stderr).contains("unknown key `train.lr`"));
}
