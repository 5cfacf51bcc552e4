//! Run configuration, read from TOML.
//!
//! ```toml
//! [model]
//! preset = "coplanar"
//! speed = 1.0
//! sigma = 0.1
//!
//! [steady_state]
//! values = [4.0, 3.0, 2.0, 6.0]
//!
//! [domain]
//! lower = [0.0, 0.0]
//! upper = [1.0, 1.0]
//! cells = [100, 100]
//!
//! [time]
//! dt = 0.002
//! t_end = 10.0
//!
//! [control]
//! law = "mixed"
//! k2 = 0.1
//! k3 = 0.1
//!
//! [lyapunov]
//! alpha = "auto"
//!
//! [initial]
//! kind = "constant"
//! values = [1.0, 1.0, 1.0, 1.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boundary::{coplanar_cross_law, coplanar_mixed_law, BoxDomain, ControlLaw};
use crate::error::{Error, Result};
use crate::lyapunov::{AlphaChoice, DEFAULT_ALPHA_MARGIN};
use crate::model::{
    build_coplanar, CollisionChannel, DiscreteVelocityModel, SteadyState, STEADY_STATE_TOLERANCE,
};
use crate::solver::Grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub steady_state: SteadyStateConfig,
    pub domain: DomainConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub initial: InitialConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Coplanar,
}

/// Either a preset with its parameters, or explicit velocities and collisions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocities: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collisions: Vec<CollisionChannel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyStateConfig {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Window `[t0, t1]` of the exponential fit; defaults to `[t_end / 5, t_end]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
}

fn default_record_every() -> usize {
    1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawKind {
    /// Zero inflow on every incoming trace.
    #[default]
    Zero,
    /// Coplanar: bottom inflow of species 3 fed from the left outflow of species 2.
    Cross,
    /// Coplanar: cross feedback plus local feedback from species 4 on the bottom.
    Mixed,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    #[serde(default)]
    pub law: LawKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k3: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaKeyword {
    Auto,
}

/// `alpha = "auto"` or a number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSetting {
    Value(f64),
    Keyword(AlphaKeyword),
}

impl Default for AlphaSetting {
    fn default() -> Self {
        AlphaSetting::Keyword(AlphaKeyword::Auto)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    #[serde(default)]
    pub alpha: AlphaSetting,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    DEFAULT_ALPHA_MARGIN
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            alpha: AlphaSetting::default(),
            margin: DEFAULT_ALPHA_MARGIN,
        }
    }
}

impl LyapunovConfig {
    pub fn choice(&self) -> AlphaChoice {
        match self.alpha {
            AlphaSetting::Value(a) => AlphaChoice::Fixed(a),
            AlphaSetting::Keyword(AlphaKeyword::Auto) => AlphaChoice::Auto {
                margin: self.margin,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_csv")]
    pub csv: String,
    /// Report file name; defaults to `<command>.txt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    /// Final-field snapshot file name, written by `simulate` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_csv() -> String {
    "timeseries.csv".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            csv: default_csv(),
            report: None,
            snapshot: None,
        }
    }
}

/// Initial deviation `f_0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    /// `f_0 = values` at every node.
    Constant { values: Vec<f64> },
    /// `f_0k(x) = amplitudes[k] * prod_j cos(pi * modes[j] * (x_j - lower_j) / extent_j)`.
    Sinusoidal { amplitudes: Vec<f64>, modes: Vec<u32> },
}

impl InitialConfig {
    pub fn value(&self, domain: &BoxDomain, species: usize, x: &[f64]) -> f64 {
        match self {
            InitialConfig::Constant { values } => values[species],
            InitialConfig::Sinusoidal { amplitudes, modes } => {
                amplitudes[species]
                    * modes
                        .iter()
                        .enumerate()
                        .map(|(j, &m)| {
                            let xi = (x[j] - domain.lower()[j]) / domain.extent(j);
                            (std::f64::consts::PI * f64::from(m) * xi).cos()
                        })
                        .product::<f64>()
            }
        }
    }

    fn check(&self, n_species: usize, dim: usize) -> Result<()> {
        let (len, what) = match self {
            InitialConfig::Constant { values } => (values.len(), "initial values"),
            InitialConfig::Sinusoidal { amplitudes, modes } => {
                if modes.len() != dim {
                    return Err(Error::Config(format!(
                        "{} initial modes given for a {dim}-dimensional domain",
                        modes.len()
                    )));
                }
                (amplitudes.len(), "initial amplitudes")
            }
        };
        if len != n_species {
            return Err(Error::Config(format!(
                "{len} {what} given for {n_species} species"
            )));
        }
        Ok(())
    }
}

/// Everything a command needs, built and validated from a [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Setup {
    pub model: DiscreteVelocityModel,
    pub steady: SteadyState,
    pub domain: BoxDomain,
    pub grid: Grid,
    pub law: ControlLaw,
    pub steps: usize,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn build_model(&self) -> Result<DiscreteVelocityModel> {
        let m = &self.model;
        match (m.preset, &m.velocities) {
            (Some(Preset::Coplanar), None) => {
                if !m.collisions.is_empty() {
                    return Err(Error::Config(
                        "the coplanar preset fixes its collisions; remove [[model.collisions]]"
                            .into(),
                    ));
                }
                let speed = m.speed.ok_or_else(|| Error::Config("model.speed is required".into()))?;
                let sigma = m.sigma.ok_or_else(|| Error::Config("model.sigma is required".into()))?;
                build_coplanar(speed, sigma)
            }
            (None, Some(velocities)) => {
                if m.speed.is_some() || m.sigma.is_some() {
                    return Err(Error::Config(
                        "model.speed and model.sigma only apply to a preset".into(),
                    ));
                }
                let dim = velocities.first().map_or(0, Vec::len);
                DiscreteVelocityModel::new(dim, velocities.clone(), m.collisions.clone())
            }
            (Some(_), Some(_)) => Err(Error::Config(
                "give either model.preset or model.velocities, not both".into(),
            )),
            (None, None) => Err(Error::Config(
                "model needs a preset or explicit velocities".into(),
            )),
        }
    }

    pub fn build_law(&self) -> Result<ControlLaw> {
        let c = &self.control;
        let gain = |name: &str, value: Option<f64>| {
            value.ok_or_else(|| Error::Config(format!("control.{name} is required for this law")))
        };
        let unused = |names: &[(&str, Option<f64>)]| -> Result<()> {
            match names.iter().find(|(_, v)| v.is_some()) {
                Some((name, _)) => Err(Error::Config(format!(
                    "control.{name} does not apply to the {:?} law",
                    c.law
                ))),
                None => Ok(()),
            }
        };
        match c.law {
            LawKind::Zero => {
                unused(&[("k1", c.k1), ("k2", c.k2), ("k3", c.k3)])?;
                Ok(ControlLaw::zero())
            }
            LawKind::Cross => {
                unused(&[("k2", c.k2), ("k3", c.k3)])?;
                coplanar_cross_law(gain("k1", c.k1)?)
            }
            LawKind::Mixed => {
                unused(&[("k1", c.k1)])?;
                coplanar_mixed_law(gain("k2", c.k2)?, gain("k3", c.k3)?)
            }
        }
    }

    /// Number of steps, requiring `t_end` to be a whole number of steps.
    pub fn steps(&self) -> Result<usize> {
        let TimeConfig { dt, t_end, .. } = self.time;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time.dt = {dt} must be positive")));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::Config(format!("time.t_end = {t_end} must be nonnegative")));
        }
        let steps = (t_end / dt).round();
        if (steps * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
            return Err(Error::Config(format!(
                "time.t_end = {t_end} is not a whole number of steps of {dt}"
            )));
        }
        Ok(steps as usize)
    }

    pub fn fit_window(&self) -> [f64; 2] {
        self.time
            .fit_window
            .unwrap_or([self.time.t_end / 5.0, self.time.t_end])
    }

    /// Model, steady state, domain and law; no grid or time checks.
    pub fn setup_model(&self) -> Result<(DiscreteVelocityModel, SteadyState, BoxDomain)> {
        let model = self.build_model()?;
        let steady = SteadyState::with_tolerance(
            &model,
            self.steady_state.values.clone(),
            self.steady_state.tolerance.unwrap_or(STEADY_STATE_TOLERANCE),
        )?;
        let domain = BoxDomain::new(self.domain.lower.clone(), self.domain.upper.clone())?;
        if domain.dim() != model.dim() {
            return Err(Error::Config(format!(
                "{}-dimensional domain for a {}-dimensional model",
                domain.dim(),
                model.dim()
            )));
        }
        Ok((model, steady, domain))
    }

    pub fn setup(&self) -> Result<Setup> {
        let (model, steady, domain) = self.setup_model()?;
        let grid = Grid::new(domain.clone(), self.domain.cells.clone())?;
        let law = self.build_law()?;
        law.validate(&model, &domain)?;
        let steps = self.steps()?;
        if self.time.record_every == 0 {
            return Err(Error::Config("time.record_every must be at least 1".into()));
        }
        let [w0, w1] = self.fit_window();
        if !(0.0 <= w0 && w0 < w1 && w1 <= self.time.t_end) && self.time.t_end > 0.0 {
            return Err(Error::Config(format!(
                "fit window [{w0}, {w1}] is not inside [0, {}]",
                self.time.t_end
            )));
        }
        self.initial.check(model.n_species(), model.dim())?;
        Ok(Setup {
            model,
            steady,
            domain,
            grid,
            law,
            steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const REFERENCE: &str = r#"
[model]
preset = "coplanar"
speed = 1.0
sigma = 0.1

[steady_state]
values = [4.0, 3.0, 2.0, 6.0]

[domain]
lower = [0.0, 0.0]
upper = [1.0, 1.0]
cells = [100, 100]

[time]
dt = 0.002
t_end = 10.0
fit_window = [2.0, 10.0]

[control]
law = "mixed"
k2 = 0.1
k3 = 0.1

[lyapunov]
alpha = "auto"

[initial]
kind = "constant"
values = [1.0, 1.0, 1.0, 1.0]
"#;

    #[test]
    fn parses_reference_config() {
        let cfg = RunConfig::from_toml(REFERENCE).unwrap();
        assert_eq!(cfg.control.law, LawKind::Mixed);
        assert_eq!(cfg.lyapunov.alpha, AlphaSetting::Keyword(AlphaKeyword::Auto));
        assert_eq!(cfg.lyapunov.margin, DEFAULT_ALPHA_MARGIN);
        assert_eq!(cfg.time.record_every, 1);
        let setup = cfg.setup().unwrap();
        assert_eq!(setup.steps, 5000);
        assert_eq!(setup.grid.n_nodes(), 101 * 101);
        assert_eq!(setup.law.name, "mixed");
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = RunConfig::from_toml(REFERENCE).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);

        let mut explicit = cfg.clone();
        explicit.model = ModelConfig {
            velocities: Some(vec![vec![1.0, 0.5], vec![-1.0, 0.0]]),
            collisions: vec![CollisionChannel::new([0, 1], [0, 1], 0.3)],
            ..ModelConfig::default()
        };
        explicit.lyapunov.alpha = AlphaSetting::Value(2.5);
        explicit.initial = InitialConfig::Sinusoidal {
            amplitudes: vec![1.0, -0.5],
            modes: vec![1, 2],
        };
        explicit.output.snapshot = Some("final.dat".into());
        let again = RunConfig::from_toml(&explicit.to_toml().unwrap()).unwrap();
        assert_eq!(explicit, again);
    }

    #[test]
    fn numeric_alpha_is_fixed_choice() {
        let text = REFERENCE.replace("alpha = \"auto\"", "alpha = 80.0");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.lyapunov.choice(), AlphaChoice::Fixed(80.0));
        let bad = REFERENCE.replace("alpha = \"auto\"", "alpha = \"big\"");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_combinations() {
        let typo = REFERENCE.replace("k3 = 0.1", "k4 = 0.1");
        assert!(matches!(RunConfig::from_toml(&typo), Err(Error::Config(_))));
        let extra = REFERENCE.replace("k3 = 0.1", "k3 = 0.1\nk1 = 0.2");
        let cfg = RunConfig::from_toml(&extra).unwrap();
        assert!(matches!(cfg.setup(), Err(Error::Config(_))));
        let missing = REFERENCE.replace("k3 = 0.1", "");
        assert!(RunConfig::from_toml(&missing).unwrap().setup().is_err());
    }

    #[test]
    fn non_steady_state_is_rejected() {
        let text = REFERENCE.replace("[4.0, 3.0, 2.0, 6.0]", "[1.0, 2.0, 3.0, 4.0]");
        let err = RunConfig::from_toml(&text).unwrap().setup().unwrap_err();
        assert!(matches!(err, Error::NotSteady { .. }));
        assert!(err.is_validation());
    }

    #[test]
    fn time_must_be_whole_steps() {
        let text = REFERENCE.replace("t_end = 10.0", "t_end = 10.001");
        assert!(RunConfig::from_toml(&text).unwrap().steps().is_err());
        let text = REFERENCE.replace("t_end = 10.0", "t_end = 0.0");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.steps().unwrap(), 0);
    }

    #[test]
    fn default_fit_window() {
        let text = REFERENCE.replace("fit_window = [2.0, 10.0]\n", "");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.fit_window(), [2.0, 10.0]);
    }

    #[test]
    fn sinusoidal_initial_data() {
        let init = InitialConfig::Sinusoidal {
            amplitudes: vec![2.0],
            modes: vec![1, 0],
        };
        let dom = BoxDomain::unit(2);
        assert!((init.value(&dom, 0, &[0.0, 0.3]) - 2.0).abs() < 1e-15);
        assert!(init.value(&dom, 0, &[0.5, 0.3]).abs() < 1e-15);
        assert!((init.value(&dom, 0, &[1.0, 0.9]) + 2.0).abs() < 1e-15);
    }
}
