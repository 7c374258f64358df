//! Experiment description in a flat `key = value` text format.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored;
//! list values are comma separated. Unknown or repeated keys are errors.
//! `train.preset` seeds every `train.*` field from a named preset, and any
//! other `train.*` key then overrides it regardless of order.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `dataset.kind` | required | `blobs`, `two_moons` or `csv` |
//! | `dataset.path` | none | CSV file (csv only) |
//! | `dataset.label_column` | `label` | CSV label header |
//! | `dataset.feature_columns` | all others | CSV feature headers |
//! | `dataset.n`, `dataset.classes`, `dataset.dim` | 3000, 3, 2 | synthetic shape |
//! | `dataset.separation`, `dataset.noise` | 4, 0.1 | synthetic difficulty |
//! | `dataset.seed`, `dataset.split_seed` | 0, 0 | generator and split seeds |
//! | `dataset.train_fraction` | 0.8 | share of rows used for training |
//! | `model.hidden` | 32 | hidden widths |
//! | `model.activation` | `relu` | `relu` or `tanh` |
//! | `model.init_seed` | run seed | fixed initialization seed |
//! | `train.preset` | none | `cifar_style`, `svhn_style`, `imagenet32_style` |
//! | `train.base_batch`, `train.batch_mode` | 128, `fixed` | `fixed` or `scaled` |
//! | `train.epochs` | 20 | epochs before stretching |
//! | `train.optimizer` | `sgd_momentum` | or `plain_sgd` |
//! | `train.momentum`, `train.nesterov` | 0.9, true | momentum settings |
//! | `train.weight_decay` | 5e-4 | coupled L2 coefficient |
//! | `train.schedule` | `constant` | `constant`, `step` or `cosine` |
//! | `train.milestones`, `train.decay_factor` | none, 0.1 | step schedule |
//! | `train.base_lr`, `train.lr_factor` | 0.05, 1 | initial rate is their product |
//! | `train.stretch_schedule` | false | scale epochs and milestones by `1/lr_factor` |
//! | `train.label_noise` | 0 | share of training labels redrawn |
//! | `strategy.kinds` | required | `full`, `random`, `loss_based`, `grad_match` |
//! | `strategy.cdf_source` | `within_batch` | or `rolling_buffer` |
//! | `strategy.buffer_capacity` | 8 batches | rolling buffer size |
//! | `strategy.clip_negative` | true | zero negative matching weights |
//! | `strategy.abs_correlation` | false | pick atoms by absolute correlation |
//! | `strategy.pad_to_m` | false | top up short matching selections |
//! | `strategy.with_bias` | true | bias term in the Gram matrix |
//! | `grid.fractions`, `grid.seeds` | required | experiment grid |
//! | `eval.num_batches`, `eval.batch`, `eval.subset` | 200, 128, 32 | gradient-error experiment |
//! | `eval.checkpoint_epochs` | 0 | train this long before measuring (0 = at init) |
//! | `output.dir` | `out` | output directory |

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{DatasetDescriptor, DatasetKind};
use crate::error::{Error, Result};
use crate::model::{Activation, ModelSpec};
use crate::selection::{CdfSource, StrategyConfig, StrategyKind};
use crate::trainer::{BatchMode, Optimizer, Preset, Schedule, TrainConfig};

pub const REQUIRED_KEYS: [&str; 4] = ["dataset.kind", "strategy.kinds", "grid.fractions", "grid.seeds"];

pub const KNOWN_KEYS: [&str; 43] = [
    "dataset.kind",
    "dataset.path",
    "dataset.label_column",
    "dataset.feature_columns",
    "dataset.n",
    "dataset.classes",
    "dataset.dim",
    "dataset.separation",
    "dataset.noise",
    "dataset.seed",
    "dataset.train_fraction",
    "dataset.split_seed",
    "model.hidden",
    "model.activation",
    "model.init_seed",
    "train.preset",
    "train.base_batch",
    "train.batch_mode",
    "train.epochs",
    "train.optimizer",
    "train.momentum",
    "train.nesterov",
    "train.weight_decay",
    "train.schedule",
    "train.milestones",
    "train.decay_factor",
    "train.base_lr",
    "train.lr_factor",
    "train.stretch_schedule",
    "train.label_noise",
    "strategy.kinds",
    "strategy.cdf_source",
    "strategy.buffer_capacity",
    "strategy.clip_negative",
    "strategy.abs_correlation",
    "strategy.pad_to_m",
    "strategy.with_bias",
    "grid.fractions",
    "grid.seeds",
    "eval.num_batches",
    "eval.batch",
    "eval.subset",
    "eval.checkpoint_epochs",
];

/// `output.dir` is parsed separately so the table above stays in sync with
/// the dump order.
const OUTPUT_DIR: &str = "output.dir";

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSpec {
    pub num_batches: usize,
    pub batch: usize,
    pub subset: usize,
    pub checkpoint_epochs: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            num_batches: 200,
            batch: 128,
            subset: 32,
            checkpoint_epochs: 0,
        }
    }
}

/// A full experiment: data, model, training template, strategies and the
/// (strategy x fraction x seed) grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub dataset: DatasetDescriptor,
    pub model: ModelSpec,
    /// `fraction` and `seed` are set per grid cell.
    pub train: TrainConfig,
    pub kinds: Vec<StrategyKind>,
    /// Settings shared by every strategy; its `kind` is ignored.
    pub strategy: StrategyConfig,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub eval: EvalSpec,
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn strategies(&self) -> Vec<StrategyConfig> {
        self.kinds
            .iter()
            .map(|&kind| StrategyConfig {
                kind,
                ..self.strategy.clone()
            })
            .collect()
    }

    /// Training config for one grid cell.
    pub fn cell_config(&self, fraction: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            fraction,
            seed,
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() || self.fractions.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig(
                "need at least one strategy, one fraction and one seed".into(),
            ));
        }
        self.dataset.validate()?;
        for &f in &self.fractions {
            self.cell_config(f, 0).validate()?;
        }
        if self.model.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        if self.strategy.buffer_capacity == Some(0) {
            return Err(Error::InvalidConfig("buffer capacity must be at least 1".into()));
        }
        let e = &self.eval;
        if e.subset == 0 || e.subset > e.batch {
            return Err(Error::InvalidConfig("need 1 <= eval.subset <= eval.batch".into()));
        }
        Ok(())
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Entries<'a> {
    path: &'a Path,
    map: HashMap<String, Entry>,
}

impl Entries<'_> {
    fn err(&self, line: usize, message: String) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message,
        }
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.map.get(key)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|err| self.err(e.line, format!("{key}: {err}"))),
        }
    }

    fn set<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|err| self.err(e.line, format!("{key}: `{s}`: {err}")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn line(&self, key: &str) -> usize {
        self.raw(key).map_or(0, |e| e.line)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path)
}

/// Parses config text; `path` is only used in diagnostics.
pub fn parse_config(text: &str, path: &Path) -> Result<ExperimentSpec> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) && key != OUTPUT_DIR {
            return Err(Error::UnknownKey {
                path: path.to_path_buf(),
                line,
                key: key.to_string(),
            });
        }
        let entry = Entry {
            line,
            value: value.trim().to_string(),
        };
        if let Some(prev) = map.insert(key.to_string(), entry) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("`{key}` already set on line {}", prev.line),
            });
        }
    }
    let e = Entries { path, map };

    let missing: Vec<&str> = REQUIRED_KEYS.iter().copied().filter(|k| e.raw(k).is_none()).collect();
    if !missing.is_empty() {
        return Err(e.err(0, format!("missing required keys: {}", missing.join(", "))));
    }

    let spec = ExperimentSpec {
        dataset: dataset_section(&e)?,
        model: model_section(&e)?,
        train: train_section(&e)?,
        kinds: e.list("strategy.kinds")?.unwrap_or_default(),
        strategy: strategy_section(&e)?,
        fractions: e.list("grid.fractions")?.unwrap_or_default(),
        seeds: e.list("grid.seeds")?.unwrap_or_default(),
        eval: eval_section(&e)?,
        output_dir: e.get(OUTPUT_DIR)?.unwrap_or_else(|| PathBuf::from("out")),
    };
    spec.validate().map_err(|err| match err {
        Error::InvalidConfig(msg) | Error::BadFraction(msg) => e.err(0, msg),
        other => other,
    })?;
    Ok(spec)
}

fn dataset_section(e: &Entries) -> Result<DatasetDescriptor> {
    let mut d = DatasetDescriptor::default();
    e.set::<DatasetKind>("dataset.kind", &mut d.kind)?;
    d.path = e.get("dataset.path")?;
    e.set("dataset.label_column", &mut d.label_column)?;
    d.feature_columns = e.list("dataset.feature_columns")?;
    e.set("dataset.n", &mut d.n)?;
    if let Some(c) = e.get("dataset.classes")? {
        d.classes = Some(c);
    } else if d.kind == DatasetKind::Csv {
        d.classes = None;
    }
    e.set("dataset.dim", &mut d.dim)?;
    e.set("dataset.separation", &mut d.separation)?;
    e.set("dataset.noise", &mut d.noise)?;
    e.set("dataset.seed", &mut d.seed)?;
    e.set("dataset.train_fraction", &mut d.train_fraction)?;
    e.set("dataset.split_seed", &mut d.split_seed)?;
    Ok(d)
}

fn model_section(e: &Entries) -> Result<ModelSpec> {
    let mut m = ModelSpec::default();
    if let Some(h) = e.list("model.hidden")? {
        m.hidden = h;
    }
    e.set::<Activation>("model.activation", &mut m.activation)?;
    m.init_seed = e.get("model.init_seed")?;
    Ok(m)
}

fn train_section(e: &Entries) -> Result<TrainConfig> {
    let mut t = match e.get::<Preset>("train.preset")? {
        Some(p) => p.config(),
        None => TrainConfig::default(),
    };
    e.set("train.base_batch", &mut t.base_batch)?;
    e.set::<BatchMode>("train.batch_mode", &mut t.batch_mode)?;
    e.set("train.epochs", &mut t.epochs)?;

    let (mut momentum, mut nesterov) = match t.optimizer {
        Optimizer::SgdMomentum { momentum, nesterov } => (momentum, nesterov),
        Optimizer::PlainSgd => (0.9, true),
    };
    e.set("train.momentum", &mut momentum)?;
    e.set("train.nesterov", &mut nesterov)?;
    let plain = match e.get::<String>("train.optimizer")?.as_deref() {
        None => t.optimizer == Optimizer::PlainSgd,
        Some("plain_sgd") => true,
        Some("sgd_momentum") => false,
        Some(other) => {
            return Err(e.err(
                e.line("train.optimizer"),
                format!("unknown optimizer `{other}` (expected sgd_momentum or plain_sgd)"),
            ))
        }
    };
    t.optimizer = if plain {
        Optimizer::PlainSgd
    } else {
        Optimizer::SgdMomentum { momentum, nesterov }
    };
    e.set("train.weight_decay", &mut t.weight_decay)?;

    let (mut milestones, mut factor) = match &t.schedule {
        Schedule::Step { milestones, factor } => (Some(milestones.clone()), *factor),
        _ => (None, 0.1),
    };
    if let Some(m) = e.list("train.milestones")? {
        milestones = Some(m);
    }
    e.set("train.decay_factor", &mut factor)?;
    let kind = e
        .get::<String>("train.schedule")?
        .unwrap_or_else(|| t.schedule.name().to_string());
    t.schedule = match kind.as_str() {
        "constant" => Schedule::Constant,
        "cosine" => Schedule::Cosine,
        "step" => Schedule::Step {
            milestones: milestones
                .ok_or_else(|| e.err(e.line("train.schedule"), "step schedule needs train.milestones".into()))?,
            factor,
        },
        other => {
            return Err(e.err(
                e.line("train.schedule"),
                format!("unknown schedule `{other}` (expected constant, step or cosine)"),
            ))
        }
    };
    e.set("train.base_lr", &mut t.base_lr)?;
    e.set("train.lr_factor", &mut t.lr_factor)?;
    e.set("train.stretch_schedule", &mut t.stretch_schedule)?;
    e.set("train.label_noise", &mut t.label_noise)?;
    t.fraction = 1.0;
    t.seed = 0;
    Ok(t)
}

fn strategy_section(e: &Entries) -> Result<StrategyConfig> {
    let mut s = StrategyConfig::new(StrategyKind::Random);
    e.set::<CdfSource>("strategy.cdf_source", &mut s.cdf_source)?;
    s.buffer_capacity = e.get("strategy.buffer_capacity")?;
    e.set("strategy.clip_negative", &mut s.clip_negative)?;
    e.set("strategy.abs_correlation", &mut s.abs_correlation)?;
    e.set("strategy.pad_to_m", &mut s.pad_to_m)?;
    e.set("strategy.with_bias", &mut s.with_bias)?;
    Ok(s)
}

fn eval_section(e: &Entries) -> Result<EvalSpec> {
    let mut v = EvalSpec::default();
    e.set("eval.num_batches", &mut v.num_batches)?;
    e.set("eval.batch", &mut v.batch)?;
    e.set("eval.subset", &mut v.subset)?;
    e.set("eval.checkpoint_epochs", &mut v.checkpoint_epochs)?;
    Ok(v)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

/// Writes every field explicitly, so `parse_config(dump(s)) == s` for any
/// experiment the loader can produce.
pub fn dump(spec: &ExperimentSpec) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    let d = &spec.dataset;
    kv("dataset.kind", d.kind.name().into());
    if let Some(p) = &d.path {
        kv("dataset.path", p.display().to_string());
    }
    kv("dataset.label_column", d.label_column.clone());
    if let Some(cols) = &d.feature_columns {
        kv("dataset.feature_columns", join(cols));
    }
    kv("dataset.n", d.n.to_string());
    if let Some(c) = d.classes {
        kv("dataset.classes", c.to_string());
    }
    kv("dataset.dim", d.dim.to_string());
    kv("dataset.separation", d.separation.to_string());
    kv("dataset.noise", d.noise.to_string());
    kv("dataset.seed", d.seed.to_string());
    kv("dataset.train_fraction", d.train_fraction.to_string());
    kv("dataset.split_seed", d.split_seed.to_string());

    let m = &spec.model;
    kv("model.hidden", join(&m.hidden));
    kv("model.activation", m.activation.name().into());
    if let Some(s) = m.init_seed {
        kv("model.init_seed", s.to_string());
    }

    let t = &spec.train;
    kv("train.base_batch", t.base_batch.to_string());
    kv("train.batch_mode", t.batch_mode.name().into());
    kv("train.epochs", t.epochs.to_string());
    match t.optimizer {
        Optimizer::PlainSgd => kv("train.optimizer", "plain_sgd".into()),
        Optimizer::SgdMomentum { momentum, nesterov } => {
            kv("train.optimizer", "sgd_momentum".into());
            kv("train.momentum", momentum.to_string());
            kv("train.nesterov", nesterov.to_string());
        }
    }
    kv("train.weight_decay", t.weight_decay.to_string());
    kv("train.schedule", t.schedule.name().into());
    if let Schedule::Step { milestones, factor } = &t.schedule {
        kv("train.milestones", join(milestones));
        kv("train.decay_factor", factor.to_string());
    }
    kv("train.base_lr", t.base_lr.to_string());
    kv("train.lr_factor", t.lr_factor.to_string());
    kv("train.stretch_schedule", t.stretch_schedule.to_string());
    kv("train.label_noise", t.label_noise.to_string());

    let s = &spec.strategy;
    kv("strategy.kinds", join(&spec.kinds));
    kv("strategy.cdf_source", s.cdf_source.name().into());
    if let Some(c) = s.buffer_capacity {
        kv("strategy.buffer_capacity", c.to_string());
    }
    kv("strategy.clip_negative", s.clip_negative.to_string());
    kv("strategy.abs_correlation", s.abs_correlation.to_string());
    kv("strategy.pad_to_m", s.pad_to_m.to_string());
    kv("strategy.with_bias", s.with_bias.to_string());

    kv("grid.fractions", join(&spec.fractions));
    kv("grid.seeds", join(&spec.seeds));

    let v = &spec.eval;
    kv("eval.num_batches", v.num_batches.to_string());
    kv("eval.batch", v.batch.to_string());
    kv("eval.subset", v.subset.to_string());
    kv("eval.checkpoint_epochs", v.checkpoint_epochs.to_string());
    kv(OUTPUT_DIR, spec.output_dir.display().to_string());
    out
}
