use rand::Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BlockSlots {
    kernel: (usize, usize),
    bias: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    blocks: Vec<BlockSlots>,
    head_weights: (usize, usize),
    head_bias: (usize, usize),
    n_classes: usize,
    last_filters: usize,
}

impl Layout {
    fn of(config: &ModelConfig) -> Self {
        let mut off = 0;
        let mut take = |n: usize| {
            let r = (off, off + n);
            off += n;
            r
        };
        let blocks = config
            .layer_shapes()
            .iter()
            .map(|s| BlockSlots {
                kernel: take(s.kernel_len()),
                bias: take(s.out_channels),
            })
            .collect();
        let last_filters = config.last_filters();
        let head_weights = take(config.n_classes * last_filters);
        let head_bias = take(config.n_classes);
        Self {
            blocks,
            head_weights,
            head_bias,
            n_classes: config.n_classes,
            last_filters,
        }
    }

    fn len(&self) -> usize {
        self.head_bias.1
    }
}

/// All weights of the network in one flat buffer.
///
/// Kernels are stored `[out][in][tap]`, head weights `[class][filter]`.
/// Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layout: Layout,
    data: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::of(config);
        let data = vec![0.0; layout.len()];
        Ok(Self { layout, data })
    }

    pub fn from_flat(config: &ModelConfig, data: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        if data.len() != p.data.len() {
            return Err(Error::Shape {
                expected: p.data.len(),
                actual: data.len(),
            });
        }
        p.data = data;
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn matches(&self, config: &ModelConfig) -> bool {
        self.layout == Layout::of(config)
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.layout == other.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn n_blocks(&self) -> usize {
        self.layout.blocks.len()
    }

    pub fn n_classes(&self) -> usize {
        self.layout.n_classes
    }

    pub fn last_filters(&self) -> usize {
        self.layout.last_filters
    }

    pub fn kernel(&self, block: usize) -> &[f64] {
        let (a, b) = self.layout.blocks[block].kernel;
        &self.data[a..b]
    }

    pub fn kernel_mut(&mut self, block: usize) -> &mut [f64] {
        let (a, b) = self.layout.blocks[block].kernel;
        &mut self.data[a..b]
    }

    pub fn bias(&self, block: usize) -> &[f64] {
        let (a, b) = self.layout.blocks[block].bias;
        &self.data[a..b]
    }

    pub fn bias_mut(&mut self, block: usize) -> &mut [f64] {
        let (a, b) = self.layout.blocks[block].bias;
        &mut self.data[a..b]
    }

    pub fn head_weights(&self) -> &[f64] {
        let (a, b) = self.layout.head_weights;
        &self.data[a..b]
    }

    pub fn head_weights_mut(&mut self) -> &mut [f64] {
        let (a, b) = self.layout.head_weights;
        &mut self.data[a..b]
    }

    /// Weight of filter `f` in the logit of class `c`.
    pub fn head_weight(&self, class: usize, filter: usize) -> f64 {
        self.head_weights()[class * self.layout.last_filters + filter]
    }

    pub fn head_bias(&self) -> &[f64] {
        let (a, b) = self.layout.head_bias;
        &self.data[a..b]
    }

    pub fn head_bias_mut(&mut self) -> &mut [f64] {
        let (a, b) = self.layout.head_bias;
        &mut self.data[a..b]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Uniform convolution kernels in `[-sqrt(6/fan_in), sqrt(6/fan_in)]`, head
/// weights in `[-sqrt(3/fan_in), sqrt(3/fan_in)]` and zero biases, drawn
/// from the config's seed.
pub fn init_params(config: &ModelConfig) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(config)?;
    let mut rng = rng::seeded(config.seed);
    for (b, shape) in config.layer_shapes().iter().enumerate() {
        let bound = (6.0 / (shape.in_channels * shape.kernel) as f64).sqrt();
        for w in params.kernel_mut(b) {
            *w = rng.random_range(-bound..=bound);
        }
    }
    let bound = (3.0 / config.last_filters() as f64).sqrt();
    for w in params.head_weights_mut() {
        *w = rng.random_range(-bound..=bound);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::config::BlockConfig;
    use proptest::prelude::*;

    #[test]
    fn init_is_seeded() {
        let c = ModelConfig::desk_default(128, 3, 11);
        assert_eq!(init_params(&c).unwrap(), init_params(&c).unwrap());
        let mut d = c.clone();
        d.seed = 12;
        assert_ne!(init_params(&c).unwrap(), init_params(&d).unwrap());
        let p = init_params(&c).unwrap();
        assert_eq!(p.len(), c.n_params());
        assert!(p.bias(0).iter().all(|&b| b == 0.0));
        assert!(p.head_bias().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn invalid_config_rejected() {
        let c = ModelConfig::desk_default(128, 1, 0);
        assert!(init_params(&c).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn weights_respect_fan_in_bound(
            width in 8usize..64,
            classes in 2usize..6,
            blocks in proptest::collection::vec((1usize..6, 0usize..4, 1usize..3, any::<bool>()), 1..4),
            seed in any::<u64>(),
        ) {
            let config = ModelConfig {
                input_width: width,
                n_classes: classes,
                blocks: blocks.into_iter().map(|(f, k, s, r)| BlockConfig::new(f, 2 * k + 1, s, r)).collect(),
                activation: Default::default(),
                seed,
            };
            let p = init_params(&config).unwrap();
            for (b, s) in config.layer_shapes().iter().enumerate() {
                let bound = (6.0 / (s.in_channels * s.kernel) as f64).sqrt();
                prop_assert!(p.kernel(b).iter().all(|w| w.abs() <= bound));
            }
            let bound = (6.0 / config.last_filters() as f64).sqrt();
            prop_assert!(p.head_weights().iter().all(|w| w.abs() <= bound));
        }
    }
}
