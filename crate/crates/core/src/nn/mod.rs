//! Minimal tensor and reverse-mode autodiff engine: the layers, losses and
//! optimizer used by the classifier and the DB-VAE.

pub mod adam;
pub mod conv;
pub mod functional;
pub mod graph;
pub mod init;
pub mod tensor;

use serde::{Deserialize, Serialize};

pub use adam::{AdamConfig, AdamState};
pub use conv::Padding;
pub use graph::{Graph, Var};
pub use tensor::{Scalar, Tensor};

use crate::error::{Error, Result};

/// Divisor applied to logits inside sigmoid/softmax. Must be positive.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    /// Plain sigmoid, used for training.
    pub const TRAINING: Temperature = Temperature(1.0);
    /// Sharpened sigmoid used when auditing training scores.
    pub const AUDIT: Temperature = Temperature(0.85);

    pub fn new(t: f64) -> Result<Self> {
        if t > 0.0 && t.is_finite() {
            Ok(Self(t))
        } else {
            Err(Error::config(format!("temperature must be a positive finite number, got {t}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Self::TRAINING
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;

    fn try_from(t: f64) -> Result<Self> {
        Self::new(t)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}
