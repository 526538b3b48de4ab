use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub filters: usize,
    pub kernel_size: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub residual: bool,
}

fn one() -> usize {
    1
}

impl BlockConfig {
    pub fn new(filters: usize, kernel_size: usize, stride: usize, residual: bool) -> Self {
        Self {
            filters,
            kernel_size,
            stride,
            residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_width: usize,
    pub n_classes: usize,
    pub blocks: Vec<BlockConfig>,
    #[serde(default)]
    pub activation: Activation,
    pub seed: u64,
}

/// Resolved geometry of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub in_len: usize,
    pub out_len: usize,
    pub kernel: usize,
    pub stride: usize,
    /// The identity path is added only when shapes line up.
    pub residual: bool,
}

impl LayerShape {
    pub fn kernel_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel
    }
}

impl ModelConfig {
    /// `n_blocks` blocks of `filters` filters; stride 2 on every other block
    /// starting with the first, residual wherever shapes allow.
    pub fn standard(
        input_width: usize,
        n_classes: usize,
        n_blocks: usize,
        filters: usize,
        kernel_size: usize,
        seed: u64,
    ) -> Self {
        let blocks = (0..n_blocks)
            .map(|i| BlockConfig::new(filters, kernel_size, if i % 2 == 0 { 2 } else { 1 }, true))
            .collect();
        Self {
            input_width,
            n_classes,
            blocks,
            activation: Activation::Relu,
            seed,
        }
    }

    /// Default desk-scale backbone: 4 blocks, 32 filters, kernel 9.
    pub fn desk_default(input_width: usize, n_classes: usize, seed: u64) -> Self {
        Self::standard(input_width, n_classes, 4, 32, 9, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::validation(format!(
                "model needs at least 2 classes, got {}",
                self.n_classes
            )));
        }
        if self.input_width == 0 {
            return Err(Error::validation("input width must be positive"));
        }
        if self.blocks.is_empty() {
            return Err(Error::validation("model needs at least one block"));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.kernel_size % 2 == 0 || b.kernel_size == 0 {
                return Err(Error::validation(format!(
                    "block {i}: kernel size must be odd, got {}",
                    b.kernel_size
                )));
            }
            if b.filters == 0 || b.stride == 0 {
                return Err(Error::validation(format!(
                    "block {i}: filters and stride must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let mut in_channels = 1;
        let mut in_len = self.input_width;
        self.blocks
            .iter()
            .map(|b| {
                let out_len = in_len.div_ceil(b.stride);
                let shape = LayerShape {
                    in_channels,
                    out_channels: b.filters,
                    in_len,
                    out_len,
                    kernel: b.kernel_size,
                    stride: b.stride,
                    residual: b.residual && b.stride == 1 && in_channels == b.filters,
                };
                in_channels = b.filters;
                in_len = out_len;
                shape
            })
            .collect()
    }

    pub fn last_filters(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.filters)
    }

    /// Number of positions in the last feature maps.
    pub fn feature_len(&self) -> usize {
        self.layer_shapes().last().map_or(self.input_width, |s| s.out_len)
    }

    /// Input channels covered by one feature position.
    pub fn feature_stride(&self) -> usize {
        self.blocks.iter().map(|b| b.stride).product()
    }

    pub fn n_params(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|s| s.kernel_len() + s.out_channels)
            .sum::<usize>()
            + self.n_classes * self.last_filters()
            + self.n_classes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_geometry() {
        let c = ModelConfig::desk_default(16384, 12, 0);
        let shapes = c.layer_shapes();
        assert_eq!(shapes.len(), 4);
        assert_eq!(shapes[0].out_len, 8192);
        assert!(!shapes[0].residual);
        assert!(shapes[1].residual);
        assert_eq!(shapes[3].out_len, 4096);
        assert_eq!(c.feature_stride(), 4);
        assert_eq!(c.feature_len(), 4096);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let mut c = ModelConfig::desk_default(64, 2, 0);
        c.n_classes = 1;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk_default(64, 2, 0);
        c.blocks[0].kernel_size = 4;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk_default(64, 2, 0);
        c.blocks.clear();
        assert!(c.validate().is_err());
    }
}
