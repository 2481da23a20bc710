use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cnn::{InputShape, TrainConfig};
use crate::error::{Error, Result};
use crate::fusion::FusionRule;
use crate::sigsynth::{ModulationScheme, SignalParams, THETA1, THETA2};
use crate::tfa::ImageConfig;

/// The class label space of an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ModulationSet {
    #[default]
    Theta1,
    Theta2,
    Custom(Vec<ModulationScheme>),
}

impl ModulationSet {
    pub fn schemes(&self) -> Vec<ModulationScheme> {
        match self {
            ModulationSet::Theta1 => THETA1.to_vec(),
            ModulationSet::Theta2 => THETA2.to_vec(),
            ModulationSet::Custom(v) => v.clone(),
        }
    }

    /// Short tag used in report file names.
    pub fn tag(&self) -> String {
        match self {
            ModulationSet::Theta1 => "theta1".into(),
            ModulationSet::Theta2 => "theta2".into(),
            ModulationSet::Custom(v) => format!("custom{}", v.len()),
        }
    }
}

impl Serialize for ModulationSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ModulationSet::Theta1 => s.serialize_str("theta1"),
            ModulationSet::Theta2 => s.serialize_str("theta2"),
            ModulationSet::Custom(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for ModulationSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            List(Vec<ModulationScheme>),
        }
        match Raw::deserialize(d)? {
            Raw::Name(n) => match n.to_ascii_lowercase().as_str() {
                "theta1" => Ok(ModulationSet::Theta1),
                "theta2" => Ok(ModulationSet::Theta2),
                other => Err(serde::de::Error::custom(format!(
                    "unknown modulation set `{other}` (expected theta1, theta2 or a list)"
                ))),
            },
            Raw::List(v) => Ok(ModulationSet::Custom(v)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    #[default]
    Siso,
    Mimo { nt: usize, nr: usize },
}

impl Scenario {
    pub fn receive_antennas(&self) -> usize {
        match self {
            Scenario::Siso => 1,
            Scenario::Mimo { nr, .. } => *nr,
        }
    }

    pub fn transmit_antennas(&self) -> usize {
        match self {
            Scenario::Siso => 1,
            Scenario::Mimo { nt, .. } => *nt,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Siso => f.write_str("siso"),
            Scenario::Mimo { nt, nr } => write!(f, "mimo{nt}x{nr}"),
        }
    }
}

/// Everything that defines an experiment. Loaded from JSON; unknown keys are
/// rejected and missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub modulation_set: ModulationSet,
    pub snr_list_db: Vec<f64>,
    pub signals_per_class_per_snr: usize,
    pub scenario: Scenario,
    pub signal: SignalParams,
    pub image: ImageConfig,
    pub train: TrainConfig,
    pub fusion: FusionRule,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            modulation_set: ModulationSet::Theta1,
            snr_list_db: (-2..=5).map(|i| f64::from(i) * 2.0).collect(),
            signals_per_class_per_snr: 100,
            scenario: Scenario::Siso,
            signal: SignalParams::default(),
            image: ImageConfig::default(),
            train: TrainConfig::default(),
            fusion: FusionRule::Majority,
            master_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn classes(&self) -> Vec<ModulationScheme> {
        self.modulation_set.schemes()
    }

    pub fn input_shape(&self) -> InputShape {
        let (h, w, c) = self.image.shape();
        InputShape::new(h, w, c)
    }

    /// File-name tag `<scenario>_<set>`.
    pub fn tag(&self) -> String {
        format!("{}_{}", self.scenario, self.modulation_set.tag())
    }

    pub fn validate(&self) -> Result<()> {
        let classes = self.classes();
        if classes.len() < 2 {
            return Err(Error::config("modulation set needs at least two schemes"));
        }
        for (i, a) in classes.iter().enumerate() {
            if classes[..i].contains(a) {
                return Err(Error::config(format!("modulation set lists {a} twice")));
            }
            self.signal.validate_for(*a)?;
        }
        if self.snr_list_db.is_empty() || self.snr_list_db.iter().any(|s| s.is_nan()) {
            return Err(Error::config("snr_list_db must be a nonempty list of numbers"));
        }
        if self.signals_per_class_per_snr == 0 {
            return Err(Error::config("signals_per_class_per_snr must be >= 1"));
        }
        if let Scenario::Mimo { nt, nr } = self.scenario {
            if nt == 0 || nr < nt {
                return Err(Error::config(format!("MIMO needs nr >= nt >= 1, got {nt}x{nr}")));
            }
        }
        if let FusionRule::NOutOf(n) = self.fusion {
            if n == 0 || n > self.scenario.receive_antennas() {
                return Err(Error::config(format!(
                    "n-out-of rule needs 1 <= n <= {}",
                    self.scenario.receive_antennas()
                )));
            }
        }
        self.image.stft.validate()?;
        self.image.stft.num_frames(self.signal.signal_len()?)?;
        if self.image.target < 32 {
            return Err(Error::config("image target must be >= 32 for the classifier"));
        }
        self.train.validate()
    }
}
