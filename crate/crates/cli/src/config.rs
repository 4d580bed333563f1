//! Run configuration (TOML).
//!
//! Unknown keys are rejected. Relative paths are resolved against the
//! directory containing the configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rdl_core::nn::{Architecture, LayerSpec};
use rdl_core::rdl::{AlphaRule, AlphaSchedule, PairBudget};
use rdl_core::rdm::{PairwiseMetric, RdmComparison};
use rdl_core::transfer::{default_hint_epochs, TransferMethod};
use serde::Deserialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Run directory name under the output root.
    pub name: String,
    pub seed: u64,
    pub data: DataConfig,
    pub architecture: ArchitectureConfig,
    pub method: MethodConfig,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleConfig,
    pub rdl: Option<RdlConfig>,
    pub deep_supervision: Option<DeepSupervisionConfig>,
    pub hints: Option<HintsConfig>,
    pub finetune: Option<FinetuneConfig>,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// First training sample used.
        #[serde(default)]
        train_offset: usize,
        /// Number of training samples used (all remaining when absent).
        train_count: Option<usize>,
        /// Held out from the selected training samples.
        #[serde(default)]
        validation_count: usize,
        /// Number of test samples used (all when absent).
        test_count: Option<usize>,
        #[serde(default)]
        gcn: bool,
    },
    Synthetic {
        num_classes: usize,
        train_per_class: usize,
        test_per_class: usize,
        dims: [usize; 3],
        separation: f64,
        /// Seed of the cluster means and noise, shared by teacher and
        /// student runs that must see the same task.
        data_seed: u64,
        #[serde(default)]
        validation_count: usize,
        #[serde(default)]
        gcn: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    /// `"mnist_cnn"`, or absent when `layers` is given.
    pub preset: Option<String>,
    /// Per-sample input shape; required with `layers`.
    pub input: Option<Vec<usize>>,
    /// Layer list; each entry is a layer spec plus an optional `tap` name.
    pub layers: Option<Vec<toml::Table>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Baseline,
    Finetune,
    DeepSupervision,
    Hints,
    Rdl,
}

impl MethodKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::Baseline => "baseline",
            MethodKind::Finetune => "finetune",
            MethodKind::DeepSupervision => "deep_supervision",
            MethodKind::Hints => "hints",
            MethodKind::Rdl => "rdl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    /// Teacher checkpoint; required for every method except baseline and
    /// deep supervision.
    pub teacher: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub epochs: usize,
    /// Halve the learning rate every this many epochs; 0 keeps it constant.
    #[serde(default)]
    pub lr_halving_interval: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdlConfig {
    /// student tap -> teacher tap
    pub taps: BTreeMap<String, String>,
    pub pair_fraction: Option<f64>,
    pub pair_count: Option<usize>,
    #[serde(default = "default_metric")]
    pub metric: String,
    pub alpha0: f64,
}

fn default_metric() -> String {
    "mean_squared_error".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepSupervisionConfig {
    pub taps: Vec<String>,
    pub alpha0: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintsConfig {
    /// Defaults to the middle student tap.
    pub student_tap: Option<String>,
    /// Defaults to the student tap's name.
    pub teacher_tap: Option<String>,
    /// Defaults to 20% of `schedule.epochs`.
    pub epochs: Option<usize>,
    #[serde(default)]
    pub identity_init: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneConfig {
    /// Keep the student's freshly initialized final layer instead of
    /// copying the teacher's (needed when the class count differs).
    #[serde(default)]
    pub replace_readout: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_true")]
    pub error_curve: bool,
    #[serde(default = "default_bootstrap_samples")]
    pub bootstrap_samples: usize,
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    /// Test images (from the start of the test set) used as the bootstrap pool.
    #[serde(default = "default_pool")]
    pub pool_size: usize,
    #[serde(default = "default_methods")]
    pub rdm_methods: Vec<String>,
    #[serde(default = "default_rdm_metric")]
    pub rdm_metric: String,
    #[serde(default)]
    pub with_replacement: bool,
    /// Test images per class in the exported RDMs.
    #[serde(default = "default_per_class")]
    pub rdm_export_per_class: usize,
}

fn default_true() -> bool {
    true
}
fn default_bootstrap_samples() -> usize {
    20
}
fn default_sample_size() -> usize {
    100
}
fn default_pool() -> usize {
    1000
}
fn default_methods() -> Vec<String> {
    vec!["correlation".into()]
}
fn default_rdm_metric() -> String {
    "euclidean".into()
}
fn default_per_class() -> usize {
    10
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            error_curve: true,
            bootstrap_samples: default_bootstrap_samples(),
            sample_size: default_sample_size(),
            pool_size: default_pool(),
            rdm_methods: default_methods(),
            rdm_metric: default_rdm_metric(),
            with_replacement: false,
            rdm_export_per_class: default_per_class(),
        }
    }
}

impl EvalConfig {
    pub fn methods(&self) -> Result<Vec<RdmComparison>, CliError> {
        self.rdm_methods
            .iter()
            .map(|m| m.parse().map_err(CliError::from))
            .collect()
    }

    pub fn metric(&self) -> Result<PairwiseMetric, CliError> {
        Ok(self.rdm_metric.parse()?)
    }
}

/// A parsed configuration together with its source text and location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub text: String,
    pub path: PathBuf,
}

impl LoadedConfig {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let config = parse(&text)?;
        Ok(LoadedConfig {
            config,
            text,
            path: path.to_path_buf(),
        })
    }

    /// Directory that relative paths are resolved against.
    pub fn base_dir(&self) -> PathBuf {
        self.path.parent().map(Path::to_path_buf).unwrap_or_default()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir().join(p)
        }
    }
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(vec![e.message().to_string()]))
}

impl RunConfig {
    pub fn architecture(&self) -> Result<Architecture, CliError> {
        let a = &self.architecture;
        match (&a.preset, &a.layers) {
            (Some(p), None) if p == "mnist_cnn" => {
                if a.input.is_some() {
                    return Err(CliError::Config(vec!["architecture.input is fixed by the preset".into()]));
                }
                Ok(Architecture::mnist_cnn())
            }
            (Some(p), None) => Err(CliError::Config(vec![format!("unknown architecture preset `{}`", p)])),
            (None, Some(layers)) => {
                let input = a
                    .input
                    .as_ref()
                    .ok_or_else(|| CliError::Config(vec!["architecture.input is required with layers".into()]))?;
                let mut arch = Architecture::new(input);
                for (i, entry) in layers.iter().enumerate() {
                    let mut entry = entry.clone();
                    let tap = match entry.remove("tap") {
                        None => None,
                        Some(toml::Value::String(s)) => Some(s),
                        Some(_) => {
                            return Err(CliError::Config(vec![format!("layer {}: tap must be a string", i)]));
                        }
                    };
                    let spec: LayerSpec = toml::Value::Table(entry)
                        .try_into()
                        .map_err(|e: toml::de::Error| CliError::Config(vec![format!("layer {}: {}", i, e.message())]))?;
                    arch = arch.layer(spec);
                    if let Some(t) = tap {
                        arch = arch.tap(&t);
                    }
                }
                Ok(arch)
            }
            _ => Err(CliError::Config(vec![
                "architecture needs exactly one of `preset` and `layers`".into(),
            ])),
        }
    }

    pub fn pair_budget(&self) -> Option<PairBudget> {
        let r = self.rdl.as_ref()?;
        match (r.pair_fraction, r.pair_count) {
            (Some(f), None) => Some(PairBudget::Fraction(f)),
            (None, Some(c)) => Some(PairBudget::Count(c)),
            _ => None,
        }
    }

    /// Hint pretraining epochs after applying the default.
    pub fn hint_epochs(&self) -> usize {
        self.hints
            .as_ref()
            .and_then(|h| h.epochs)
            .unwrap_or_else(|| default_hint_epochs(self.schedule.epochs))
    }

    /// Transfer method with defaults filled in. Tap defaults that depend
    /// on the network are resolved by the runner.
    pub fn transfer_method(&self, student_taps: &[String]) -> Result<TransferMethod, CliError> {
        Ok(match self.method.kind {
            MethodKind::Baseline => TransferMethod::Baseline,
            MethodKind::Finetune => TransferMethod::Finetune {
                readout: None,
            },
            MethodKind::DeepSupervision => {
                let d = self.deep_supervision.as_ref().ok_or_else(|| missing("deep_supervision"))?;
                TransferMethod::DeepSupervision {
                    taps: d.taps.clone(),
                    alpha0: d.alpha0,
                }
            }
            MethodKind::Hints => {
                let h = self.hints.clone().unwrap_or(HintsConfig {
                    student_tap: None,
                    teacher_tap: None,
                    epochs: None,
                    identity_init: false,
                });
                let student_tap = match h.student_tap {
                    Some(t) => t,
                    None => student_taps
                        .get(student_taps.len().saturating_sub(1) / 2)
                        .cloned()
                        .ok_or_else(|| CliError::Config(vec!["hints: the student has no taps".into()]))?,
                };
                TransferMethod::Hints {
                    teacher_tap: h.teacher_tap.unwrap_or_else(|| student_tap.clone()),
                    student_tap,
                    epochs: self.hint_epochs(),
                    identity_init: h.identity_init,
                }
            }
            MethodKind::Rdl => {
                let r = self.rdl.as_ref().ok_or_else(|| missing("rdl"))?;
                TransferMethod::Rdl {
                    tap_map: r.taps.clone(),
                    budget: self.pair_budget().ok_or_else(|| missing("rdl.pair_fraction or rdl.pair_count"))?,
                    metric: r.metric.parse()?,
                    alpha0: r.alpha0,
                }
            }
        })
    }

    /// Alpha schedule of the method's auxiliary loss, if it has one.
    pub fn alpha_schedule(&self) -> Result<Option<AlphaSchedule>, CliError> {
        let t_max = self.schedule.epochs.max(1);
        Ok(match self.method.kind {
            MethodKind::Rdl => {
                let r = self.rdl.as_ref().ok_or_else(|| missing("rdl"))?;
                Some(AlphaSchedule::new(r.alpha0, t_max, AlphaRule::RdlLinear)?)
            }
            MethodKind::DeepSupervision => {
                let d = self.deep_supervision.as_ref().ok_or_else(|| missing("deep_supervision"))?;
                Some(AlphaSchedule::new(d.alpha0, t_max, AlphaRule::DsnDecay)?)
            }
            _ => None,
        })
    }

    /// Every violated constraint that can be checked without loading data
    /// or checkpoints.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            v.push(format!(
                "schema_version {} is not supported (expected {})",
                self.schema_version, SCHEMA_VERSION
            ));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            v.push(format!("name `{}` is not a valid directory name", self.name));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
            v.push(format!("optimizer.learning_rate {} must be positive", o.learning_rate));
        }
        if !(0.0..1.0).contains(&o.momentum) {
            v.push(format!("optimizer.momentum {} outside [0, 1)", o.momentum));
        }
        if o.batch_size < 2 {
            v.push("optimizer.batch_size must be at least 2".into());
        }
        match &self.data {
            DataConfig::Idx { train_count, .. } => {
                if *train_count == Some(0) {
                    v.push("data.train_count must be positive".into());
                }
            }
            DataConfig::Synthetic {
                num_classes,
                train_per_class,
                test_per_class,
                dims,
                separation,
                ..
            } => {
                if *num_classes < 2 || *train_per_class == 0 || *test_per_class == 0 || dims.contains(&0) {
                    v.push("data: synthetic sizes must be positive with at least 2 classes".into());
                }
                if !(*separation >= 0.0 && separation.is_finite()) {
                    v.push("data.separation must be finite and >= 0".into());
                }
            }
        }

        let arch = match self.architecture() {
            Ok(a) => match a.resolve_shapes() {
                Ok(_) => Some(a),
                Err(e) => {
                    v.push(format!("architecture: {}", e));
                    None
                }
            },
            Err(CliError::Config(msgs)) => {
                v.extend(msgs);
                None
            }
            Err(e) => {
                v.push(e.to_string());
                None
            }
        };
        let taps: Vec<String> = arch
            .as_ref()
            .map(|a| a.taps.iter().map(|t| t.name.clone()).collect())
            .unwrap_or_default();
        let check_tap = |t: &str, what: &str, v: &mut Vec<String>| {
            if arch.is_some() && !taps.iter().any(|x| x == t) {
                v.push(format!("{}: `{}` is not a tap of the student architecture", what, t));
            }
        };

        let kind = self.method.kind;
        let needs_teacher = matches!(kind, MethodKind::Finetune | MethodKind::Hints | MethodKind::Rdl);
        if needs_teacher && self.method.teacher.is_none() {
            v.push(format!("method `{}` requires method.teacher", kind.as_str()));
        }
        if !needs_teacher && self.method.teacher.is_some() {
            v.push(format!("method `{}` does not use method.teacher", kind.as_str()));
        }
        let sections = [
            ("rdl", self.rdl.is_some(), MethodKind::Rdl),
            ("deep_supervision", self.deep_supervision.is_some(), MethodKind::DeepSupervision),
            ("hints", self.hints.is_some(), MethodKind::Hints),
            ("finetune", self.finetune.is_some(), MethodKind::Finetune),
        ];
        for (name, present, owner) in sections {
            if present && kind != owner {
                v.push(format!("[{}] is only allowed with method `{}`", name, owner.as_str()));
            }
        }
        if kind == MethodKind::Rdl && self.rdl.is_none() {
            v.push("method `rdl` requires an [rdl] section".into());
        }
        if kind == MethodKind::DeepSupervision && self.deep_supervision.is_none() {
            v.push("method `deep_supervision` requires a [deep_supervision] section".into());
        }
        if let (Some(r), MethodKind::Rdl) = (&self.rdl, kind) {
            if r.taps.is_empty() {
                v.push("rdl.taps is empty".into());
            }
            for s in r.taps.keys() {
                check_tap(s, "rdl.taps", &mut v);
            }
            match (r.pair_fraction, r.pair_count) {
                (Some(f), None) => {
                    if !(f > 0.0 && f <= 1.0) {
                        v.push(format!("rdl.pair_fraction {} outside (0, 1]", f));
                    }
                }
                (None, Some(0)) => v.push("rdl.pair_count must be positive".into()),
                (None, Some(_)) => {}
                _ => v.push("rdl needs exactly one of pair_fraction and pair_count".into()),
            }
            if let Err(e) = r.metric.parse::<PairwiseMetric>() {
                v.push(format!("rdl.metric: {}", e));
            }
            if !(r.alpha0 >= 0.0 && r.alpha0.is_finite()) {
                v.push(format!("rdl.alpha0 {} must be finite and >= 0", r.alpha0));
            }
        }
        if let (Some(d), MethodKind::DeepSupervision) = (&self.deep_supervision, kind) {
            for t in &d.taps {
                check_tap(t, "deep_supervision.taps", &mut v);
            }
            if !(d.alpha0 >= 0.0 && d.alpha0.is_finite()) {
                v.push(format!("deep_supervision.alpha0 {} must be finite and >= 0", d.alpha0));
            }
        }
        if let (Some(h), MethodKind::Hints) = (&self.hints, kind) {
            if let Some(t) = &h.student_tap {
                check_tap(t, "hints.student_tap", &mut v);
            }
        }
        if kind == MethodKind::Hints && arch.is_some() && taps.is_empty() {
            v.push("hints needs a student tap".into());
        }

        let e = &self.eval;
        if e.bootstrap_samples == 0 {
            v.push("eval.bootstrap_samples must be positive".into());
        }
        if e.sample_size < 3 || e.sample_size > e.pool_size {
            v.push(format!(
                "eval.sample_size {} must be at least 3 and at most eval.pool_size {}",
                e.sample_size, e.pool_size
            ));
        }
        for m in &e.rdm_methods {
            if let Err(err) = m.parse::<RdmComparison>() {
                v.push(format!("eval.rdm_methods: {}", err));
            }
        }
        if let Err(err) = e.rdm_metric.parse::<PairwiseMetric>() {
            v.push(format!("eval.rdm_metric: {}", err));
        }
        if e.rdm_export_per_class == 0 {
            v.push("eval.rdm_export_per_class must be positive".into());
        }
        v
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(v))
        }
    }
}

fn missing(what: &str) -> CliError {
    CliError::Config(vec![format!("missing {}", what)])
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1
name = "t"
seed = 3

[data]
source = "synthetic"
num_classes = 3
train_per_class = 10
test_per_class = 5
dims = [1, 4, 4]
separation = 2.0
data_seed = 1

[architecture]
input = [1, 4, 4]
layers = [
  { kind = "fully_connected", features = 8 },
  { kind = "relu", tap = "h" },
  { kind = "linear_readout", features = 3 },
  { kind = "softmax" },
]

[method]
kind = "baseline"

[optimizer]
learning_rate = 0.05
momentum = 0.9
batch_size = 10

[schedule]
epochs = 2
"#;

    #[test]
    fn base_config_is_valid() {
        let c = parse(BASE).unwrap();
        c.validate().unwrap();
        let a = c.architecture().unwrap();
        assert_eq!(a.taps.len(), 1);
        assert_eq!(a.taps[0].layer, 1);
        assert_eq!(c.eval, EvalConfig::default());
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = BASE.replace("epochs = 2", "epochs = 2\nepoch = 3");
        assert!(matches!(parse(&text), Err(CliError::Config(_))));
        let text = BASE.replace("features = 8 }", "features = 8, bias = false }");
        let c = parse(&text).unwrap();
        assert!(!c.violations().is_empty());
    }

    #[test]
    fn all_violations_are_listed() {
        let text = BASE
            .replace("kind = \"baseline\"", "kind = \"rdl\"")
            .replace("momentum = 0.9", "momentum = 1.5")
            .replace("schema_version = 1", "schema_version = 7");
        let text = format!("{}\n[rdl]\ntaps = {{ nope = \"fc\" }}\nalpha0 = -1.0\n", text);
        let v = parse(&text).unwrap().violations();
        let joined = v.join("\n");
        for needle in [
            "schema_version 7",
            "momentum 1.5",
            "requires method.teacher",
            "`nope` is not a tap",
            "exactly one of pair_fraction",
            "alpha0 -1",
        ] {
            assert!(joined.contains(needle), "missing `{}` in {:?}", needle, v);
        }
    }

    #[test]
    fn sections_only_with_their_method() {
        let text = format!("{}\n[deep_supervision]\ntaps = [\"h\"]\nalpha0 = 1.0\n", BASE);
        let v = parse(&text).unwrap().violations();
        assert!(v.iter().any(|m| m.contains("[deep_supervision] is only allowed")));
    }

    #[test]
    fn hint_defaults() {
        let text = BASE
            .replace("kind = \"baseline\"", "kind = \"hints\"\nteacher = \"t.rdlk\"")
            .replace("epochs = 2", "epochs = 10");
        let c = parse(&text).unwrap();
        c.validate().unwrap();
        match c.transfer_method(&["h".to_string()]).unwrap() {
            TransferMethod::Hints {
                student_tap,
                teacher_tap,
                epochs,
                ..
            } => {
                assert_eq!((student_tap.as_str(), teacher_tap.as_str(), epochs), ("h", "h", 2));
            }
            m => panic!("{:?}", m),
        }
    }
}
