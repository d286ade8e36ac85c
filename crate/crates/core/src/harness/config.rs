use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::{DenseMatrix, ParamVector, Rng};
use crate::ngd::{NgdConfig, DEFAULT_DAMPING};
use crate::optimizers::{Method, OptimizerConfig};
use crate::problems::{
    load_mnist_dir, LinearGaussian, MlpProblem, Precision, Problem, ProblemKind, Quadratic,
    SoftmaxRegression, Split, MNIST_LAYERS,
};
use crate::{Error, Result};

/// Environment variable naming the dataset root; MNIST is looked up in `<root>/mnist`.
pub const DATA_DIR_ENV: &str = "GRADLAB_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `½θᵀAθ − bᵀθ`; give either `matrix` or `diag`.
    Quadratic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diag: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
    },
    LinearGaussian {
        n: usize,
        p: usize,
        #[serde(default = "one")]
        beta: f64,
        #[serde(default = "one")]
        noise_std: f64,
    },
    SoftmaxRegression {
        n: usize,
        p: usize,
        classes: usize,
    },
    MlpMnist {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_dir: Option<PathBuf>,
        #[serde(default)]
        precision: Precision,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_limit: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_limit: Option<usize>,
    },
}

fn one() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn kind(&self) -> ProblemKind {
        match self {
            ProblemSpec::Quadratic { .. } => ProblemKind::Quadratic,
            ProblemSpec::LinearGaussian { .. } => ProblemKind::LinearGaussian,
            ProblemSpec::SoftmaxRegression { .. } => ProblemKind::SoftmaxRegression,
            ProblemSpec::MlpMnist { .. } => ProblemKind::MlpMnist,
        }
    }

    /// Builds the problem. Synthetic data is drawn from `rng`.
    pub fn build(&self, rng: &mut Rng) -> Result<Box<dyn Problem>> {
        Ok(match self {
            ProblemSpec::Quadratic { matrix, diag, b } => {
                let a = match (matrix, diag) {
                    (Some(m), None) => DenseMatrix::from_rows(m)?,
                    (None, Some(d)) => DenseMatrix::from_diag(d),
                    _ => {
                        return Err(Error::Config(
                            "quadratic needs exactly one of 'matrix' or 'diag'".into(),
                        ))
                    }
                };
                let b = match b {
                    Some(b) => ParamVector::from(b.clone()),
                    None => ParamVector::zeros(a.rows()),
                };
                Box::new(Quadratic::new(a, b)?)
            }
            ProblemSpec::LinearGaussian {
                n,
                p,
                beta,
                noise_std,
            } => Box::new(LinearGaussian::synthetic(*n, *p, *beta, *noise_std, rng)?),
            ProblemSpec::SoftmaxRegression { n, p, classes } => {
                Box::new(SoftmaxRegression::synthetic(*n, *p, *classes, rng)?)
            }
            ProblemSpec::MlpMnist {
                data_dir,
                precision,
                train_limit,
                test_limit,
            } => {
                let dir = resolve_mnist_dir(data_dir.as_deref())?;
                let mut train = load_mnist_dir(&dir, Split::Train)?;
                let mut test = load_mnist_dir(&dir, Split::Test)?;
                if let Some(n) = train_limit {
                    train = train.truncated(*n);
                }
                if let Some(n) = test_limit {
                    test = test.truncated(*n);
                }
                Box::new(MlpProblem::with_layers(&MNIST_LAYERS, train, Some(test), *precision)?)
            }
        })
    }
}

/// The configured directory, else `$GRADLAB_DATA_DIR/mnist`.
pub fn resolve_mnist_dir(configured: Option<&Path>) -> Result<PathBuf> {
    if let Some(dir) = configured {
        return Ok(dir.to_path_buf());
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(root) => Ok(PathBuf::from(root).join("mnist")),
        None => Err(Error::Config(format!(
            "no MNIST directory: set 'data_dir' in the problem or {DATA_DIR_ENV}"
        ))),
    }
}

/// A first-order optimizer or natural gradient descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StepperName {
    FirstOrder(Method),
    Ngd,
}

impl StepperName {
    pub fn name(self) -> &'static str {
        match self {
            StepperName::FirstOrder(m) => m.name(),
            StepperName::Ngd => "ngd",
        }
    }
}

impl fmt::Display for StepperName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StepperName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ngd" {
            Ok(StepperName::Ngd)
        } else {
            s.parse().map(StepperName::FirstOrder)
        }
    }
}

impl TryFrom<String> for StepperName {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StepperName> for String {
    fn from(s: StepperName) -> String {
        s.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub name: StepperName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
}

/// Resolved optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepperConfig {
    FirstOrder(Method, OptimizerConfig),
    Ngd(NgdConfig),
}

impl OptimizerSpec {
    pub fn new(name: StepperName) -> Self {
        OptimizerSpec {
            name,
            eta: None,
            beta: None,
            beta1: None,
            beta2: None,
            eps: None,
            alpha_exponent: None,
            damping: None,
        }
    }

    pub fn resolve(&self) -> Result<StepperConfig> {
        match self.name {
            StepperName::FirstOrder(method) => {
                if self.damping.is_some() {
                    return Err(Error::Config(format!("'damping' does not apply to {method}")));
                }
                let d = OptimizerConfig::default();
                let cfg = OptimizerConfig {
                    eta: self.eta.unwrap_or(d.eta),
                    beta: self.beta.unwrap_or(d.beta),
                    beta1: self.beta1.unwrap_or(d.beta1),
                    beta2: self.beta2.unwrap_or(d.beta2),
                    eps: self.eps.unwrap_or(d.eps),
                    alpha_exponent: self.alpha_exponent.unwrap_or(d.alpha_exponent),
                };
                cfg.validate()?;
                Ok(StepperConfig::FirstOrder(method, cfg))
            }
            StepperName::Ngd => {
                let extra = [self.beta, self.beta1, self.beta2, self.eps, self.alpha_exponent];
                if extra.iter().any(Option::is_some) {
                    return Err(Error::Config("ngd accepts only 'eta' and 'damping'".into()));
                }
                let cfg = NgdConfig {
                    eta: self.eta.unwrap_or(NgdConfig::default().eta),
                    damping: self.damping.unwrap_or(DEFAULT_DAMPING),
                };
                if !(cfg.eta > 0.0) || !(cfg.damping >= 0.0) {
                    return Err(Error::Config(format!(
                        "ngd needs eta > 0 and damping >= 0, got {} and {}",
                        cfg.eta, cfg.damping
                    )));
                }
                Ok(StepperConfig::Ngd(cfg))
            }
        }
    }
}

/// One experiment: a problem, an optimizer and a training schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    /// Minibatch size; full batch when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    /// Steps between evaluations. Defaults to once per epoch for MNIST and 10 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Fill the `wall_ms` column. Off by default so traces stay byte-identical.
    #[serde(default)]
    pub timing: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match (self.steps, self.epochs) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either 'steps' or 'epochs', not both".into()))
            }
            (None, None) => return Err(Error::Config("one of 'steps' or 'epochs' is required".into())),
            _ => {}
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.eval_every == Some(0) {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        let stepper = self.optimizer.resolve()?;
        if matches!(stepper, StepperConfig::Ngd(_)) && self.batch_size.is_some() {
            return Err(Error::Config("ngd runs full batch; drop 'batch_size'".into()));
        }
        Ok(())
    }
}
