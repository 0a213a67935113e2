use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Layer layout of the binary CNN: strided "same" convolutions with ReLU,
/// flatten, one hidden dense layer with ReLU, one output logit. There are
/// no normalisation layers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnArchitecture {
    pub input_size: usize,
    pub input_channels: usize,
    pub stages: Vec<ConvStage>,
    pub hidden_dense: usize,
}

impl Default for CnnArchitecture {
    /// Base of 12 filters doubling-style: 12, 24, 48, 72, then 512 hidden units.
    fn default() -> Self {
        let stage = |filters, kernel| ConvStage { filters, kernel, stride: 2 };
        Self {
            input_size: 64,
            input_channels: 3,
            stages: vec![stage(12, 5), stage(24, 5), stage(48, 3), stage(72, 3)],
            hidden_dense: 512,
        }
    }
}

impl CnnArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_channels == 0 || self.hidden_dense == 0 {
            return Err(Error::config("input size, channels and hidden width must be positive"));
        }
        if self.stages.is_empty() {
            return Err(Error::config("at least one convolution stage is required"));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if s.filters == 0 || s.kernel == 0 || s.stride == 0 {
                return Err(Error::config(format!("stage {i} has a zero filter count, kernel or stride")));
            }
        }
        Ok(())
    }

    /// Spatial size after each stage ("same" padding: `ceil(in / stride)`).
    pub fn spatial_sizes(&self) -> Vec<usize> {
        let mut size = self.input_size;
        self.stages
            .iter()
            .map(|s| {
                size = size.div_ceil(s.stride);
                size
            })
            .collect()
    }

    pub fn final_spatial(&self) -> usize {
        *self.spatial_sizes().last().unwrap_or(&self.input_size)
    }

    pub fn final_channels(&self) -> usize {
        self.stages.last().map_or(self.input_channels, |s| s.filters)
    }

    pub fn flatten_size(&self) -> usize {
        let s = self.final_spatial();
        s * s * self.final_channels()
    }

    /// Closed-form count of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        let mut cin = self.input_channels;
        let mut total = 0;
        for s in &self.stages {
            total += s.kernel * s.kernel * cin * s.filters + s.filters;
            cin = s.filters;
        }
        total + self.flatten_size() * self.hidden_dense + self.hidden_dense + self.hidden_dense + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_flattens_to_1152() {
        let a = CnnArchitecture::default();
        assert_eq!(a.spatial_sizes(), vec![32, 16, 8, 4]);
        assert_eq!(a.flatten_size(), 4 * 4 * 72);
    }

    #[test]
    fn zero_sizes_rejected() {
        let mut a = CnnArchitecture::default();
        a.stages[1].stride = 0;
        assert!(a.validate().is_err());
        let a = CnnArchitecture { stages: vec![], ..Default::default() };
        assert!(a.validate().is_err());
    }
}
