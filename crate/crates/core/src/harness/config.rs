use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelModel, Latent, ModelSpec, ShiftKind};
use crate::limit::LimitFunction;

/// Edge density `α_n` as a function of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AlphaRule {
    Constant { value: f64 },
    /// `c · ln n / n`.
    LogOverN { c: f64 },
}

impl AlphaRule {
    pub fn alpha(&self, n: usize) -> f64 {
        match *self {
            AlphaRule::Constant { value } => value,
            AlphaRule::LogOverN { c } => c * (n as f64).ln() / n as f64,
        }
    }
}

/// Function on the latent space fed to the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Probe {
    /// Identity on continuous models, indicator of community 0 on block models.
    Auto,
    Constant { value: f64 },
    Identity,
    OneHot { community: usize },
    /// All community indicators, one column each.
    Indicators,
}

impl Probe {
    pub fn to_limit(&self, model: &KernelModel) -> Result<LimitFunction> {
        let probe = match (self, model.is_sbm()) {
            (Probe::Auto, true) => Probe::OneHot { community: 0 },
            (Probe::Auto, false) => Probe::Identity,
            (p, _) => *p,
        };
        let k = model.discretization().len();
        match probe {
            Probe::Constant { value } => Ok(LimitFunction::constant(model, vec![value])),
            Probe::Identity if !model.is_sbm() => Ok(LimitFunction::from_fn(model, 1, |x| match x {
                Latent::Point(t) => vec![t],
                Latent::Community(c) => vec![c as f64],
            })),
            Probe::OneHot { community } if model.is_sbm() && community < k => {
                Ok(LimitFunction::from_fn(model, 1, move |x| {
                    vec![if x == Latent::Community(community) { 1.0 } else { 0.0 }]
                }))
            }
            Probe::Indicators if model.is_sbm() => Ok(LimitFunction::from_fn(model, k, move |x| {
                (0..k).map(|c| if x == Latent::Community(c) { 1.0 } else { 0.0 }).collect()
            })),
            p => Err(Error::Config(format!("probe {p:?} does not fit this model"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    SinPi,
    CosPi,
    Zero,
}

impl Target {
    pub fn eval(&self, x: Latent) -> f64 {
        let t = match x {
            Latent::Point(t) => t,
            Latent::Community(c) => c as f64,
        };
        match self {
            Target::SinPi => (std::f64::consts::PI * t).sin(),
            Target::CosPi => (std::f64::consts::PI * t).cos(),
            Target::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Gd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeSpec {
    /// Eigenvectors for SignNet, powers for the distance encoding.
    pub q: usize,
    pub hidden: usize,
    /// Output width of each SignNet branch or of the distance MLP.
    pub width: usize,
    pub normalize: bool,
}

impl Default for PeSpec {
    fn default() -> Self {
        Self { q: 2, hidden: 16, width: 4, normalize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnSpec {
    pub hidden: Vec<usize>,
    /// Number of random parameter draws in the message-passing sweep.
    pub draws: usize,
    pub bias_scale: f64,
}

impl Default for GnnSpec {
    fn default() -> Self {
        Self { hidden: vec![16, 16], draws: 3, bias_scale: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub steps: usize,
    pub learning_rate: f64,
    pub n_train: usize,
    /// Defaults to `2 · n_train`.
    pub n_test: Option<usize>,
    pub seeds: usize,
    pub target: Target,
    pub optimizer: Optimizer,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            steps: 3000,
            learning_rate: 1e-2,
            n_train: 400,
            n_test: None,
            seeds: 5,
            target: Target::CosPi,
            optimizer: Optimizer::Gd,
        }
    }
}

impl TrainSpec {
    pub fn n_test(&self) -> usize {
        self.n_test.unwrap_or(2 * self.n_train)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub shift: ShiftKind,
    pub schedule: Vec<usize>,
    pub alpha: AlphaRule,
    pub trials: usize,
    pub seed: u64,
    pub probe: Probe,
    /// Node features `f⁰` for the smoothing and message-passing sweeps.
    pub features: Probe,
    /// Diagonal of the feature-noise covariance.
    pub noise_variance: Vec<f64>,
    /// Eigenvalues kept by the ideal filter on continuous models.
    pub filter_rank: Option<usize>,
    pub pe: PeSpec,
    pub gnn: GnnSpec,
    pub train: TrainSpec,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::Sbm {
                c: vec![vec![0.5, 0.25], vec![0.25, 0.375]],
                p: vec![1.0 / 3.0, 2.0 / 3.0],
            },
            shift: ShiftKind::NormalizedAdjacency,
            schedule: vec![250, 500, 1000, 2000],
            alpha: AlphaRule::Constant { value: 1.0 },
            trials: 10,
            seed: 0,
            probe: Probe::Auto,
            features: Probe::Indicators,
            noise_variance: vec![0.25, 0.25],
            filter_rank: None,
            pe: PeSpec::default(),
            gnn: GnnSpec::default(),
            train: TrainSpec::default(),
            output: None,
        }
    }
}

impl ExperimentConfig {
    /// Gaussian kernel on `[-1, 1]` with three SignNet eigenvectors.
    pub fn fig1() -> Self {
        Self {
            model: ModelSpec::default_gaussian(),
            pe: PeSpec { q: 3, ..PeSpec::default() },
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build_model(&self) -> Result<KernelModel> {
        self.model.build()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schedule.is_empty() {
            return bad("empty n schedule".into());
        }
        if self.schedule[0] < 2 || self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n schedule {:?} must be strictly increasing from at least 2", self.schedule));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        for &n in &self.schedule {
            let a = self.alpha.alpha(n);
            if !(a > 0.0 && a <= 1.0) {
                return bad(format!("alpha({n}) = {a} outside (0, 1]"));
            }
        }
        if self.pe.q == 0 || self.pe.hidden == 0 || self.pe.width == 0 {
            return bad("positional encoding widths must be positive".into());
        }
        if self.gnn.hidden.iter().any(|&w| w == 0) || self.gnn.draws == 0 {
            return bad("network widths and draws must be positive".into());
        }
        if self.noise_variance.iter().any(|v| !(*v >= 0.0)) {
            return bad("noise variances must be nonnegative".into());
        }
        let t = &self.train;
        if t.steps == 0 || !(t.learning_rate > 0.0) || t.n_train < 2 || t.n_test() < 2 || t.seeds == 0 {
            return bad("invalid training settings".into());
        }
        self.build_model()?;
        Ok(())
    }
}
