use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balancing {
    /// Every loss divided by a detached copy of itself.
    #[serde(alias = "equal")]
    EqualNormalized,
    /// Standard dynamic weight averaging; also accepted as `edwa`.
    #[serde(alias = "edwa")]
    Dwa,
    Uncertainty,
}

impl Balancing {
    pub const ALL: [Balancing; 3] = [Balancing::EqualNormalized, Balancing::Dwa, Balancing::Uncertainty];

    pub fn label(self) -> &'static str {
        match self {
            Balancing::EqualNormalized => "Equal",
            Balancing::Dwa => "EDWA",
            Balancing::Uncertainty => "Uncertainty",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surgery {
    None,
    #[serde(alias = "ca_grad")]
    Cagrad,
    #[serde(alias = "pc_grad")]
    Pcgrad,
    #[serde(alias = "grad_drop")]
    Graddrop,
}

impl Surgery {
    pub const ALL: [Surgery; 4] = [Surgery::None, Surgery::Cagrad, Surgery::Pcgrad, Surgery::Graddrop];

    pub fn label(self) -> &'static str {
        match self {
            Surgery::None => "None",
            Surgery::Cagrad => "CAGrad",
            Surgery::Pcgrad => "PCGrad",
            Surgery::Graddrop => "GradDrop",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub balancing: Balancing,
    pub surgery: Surgery,
    pub dwa_temperature: f64,
    pub cagrad_c: f64,
    /// Seeds the stochastic surgeries.
    pub seed: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            balancing: Balancing::EqualNormalized,
            surgery: Surgery::None,
            dwa_temperature: 2.0,
            cagrad_c: 0.5,
            seed: 0,
        }
    }
}

impl StrategyConfig {
    pub fn new(balancing: Balancing, surgery: Surgery) -> Self {
        Self { balancing, surgery, ..Self::default() }
    }

    /// The 3 × 4 grid, balancing-major.
    pub fn grid() -> Vec<StrategyConfig> {
        Balancing::ALL
            .into_iter()
            .flat_map(|b| Surgery::ALL.into_iter().map(move |s| StrategyConfig::new(b, s)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cagrad_c >= 0.0 && self.cagrad_c.is_finite()) {
            return Err(Error::InvalidArgument(format!("cagrad_c must be >= 0, got {}", self.cagrad_c)));
        }
        if !(self.dwa_temperature > 0.0 && self.dwa_temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dwa_temperature must be > 0, got {}",
                self.dwa_temperature
            )));
        }
        Ok(())
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.surgery {
            Surgery::None => f.write_str(self.balancing.label()),
            s => write!(f, "{} + {}", self.balancing.label(), s.label()),
        }
    }
}
