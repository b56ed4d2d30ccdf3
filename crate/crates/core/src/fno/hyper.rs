use serde::{Deserialize, Serialize};

use crate::error::{NsoError, Result};

/// Pointwise nonlinearity between layers. `Identity` exists for tests that
/// need a linear network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn slope_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Architecture and optimizer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FnoHyperparams {
    pub layers: usize,
    pub width: usize,
    pub modes: usize,
    pub proj_width: usize,
    pub out_channels: usize,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for FnoHyperparams {
    fn default() -> Self {
        Self {
            layers: 4,
            width: 64,
            modes: 32,
            proj_width: 128,
            out_channels: 1,
            activation: Activation::Relu,
            learning_rate: 1e-3,
            batch_size: 100,
            epochs: 500,
        }
    }
}

impl FnoHyperparams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("layers", self.layers),
            ("width", self.width),
            ("modes", self.modes),
            ("proj_width", self.proj_width),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(NsoError::Config(format!("{name} must be at least 1")));
            }
        }
        if !(1..=2).contains(&self.out_channels) {
            return Err(NsoError::Config(format!(
                "out_channels must be 1 or 2, got {}",
                self.out_channels
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NsoError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    /// The largest mode count usable on an `n`-point grid.
    pub fn max_modes(n: usize) -> usize {
        n / 2 + 1
    }

    /// True when both describe the same network shape.
    pub fn same_architecture(&self, other: &Self) -> bool {
        self.layers == other.layers
            && self.width == other.width
            && self.modes == other.modes
            && self.proj_width == other.proj_width
            && self.out_channels == other.out_channels
            && self.activation == other.activation
    }
}
