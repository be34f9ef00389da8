use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    apply_mask, avgpool2x2, avgpool2x2_backward, conv2d_backward, conv2d_forward, dense_backward,
    dense_forward, dropout, tanh_activation, tanh_backward, KERNEL,
};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const CONV_LAYERS: usize = 10;
pub const POOL_AFTER: [usize; 5] = [2, 4, 6, 8, 10];

/// Architecture of the ten-convolution frame-difference regressor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub conv_channels: Vec<usize>,
    pub kernel_size: usize,
    /// 1-based conv indices followed by a 2x2 average pool and dropout.
    pub pool_after: Vec<usize>,
    pub dropout_rate: f64,
    /// Hidden width followed by the scalar output.
    pub fc_widths: Vec<usize>,
    pub input_side: usize,
    pub input_channels: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Paper,
    Tiny,
}

impl NetworkConfig {
    pub fn paper() -> Self {
        Self::with_channels(vec![16, 16, 32, 32, 64, 64, 64, 64, 128, 128])
    }

    pub fn tiny() -> Self {
        Self::with_channels(vec![8, 8, 16, 16, 16, 16, 24, 24, 24, 24])
    }

    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => Self::paper(),
            Preset::Tiny => Self::tiny(),
        }
    }

    fn with_channels(conv_channels: Vec<usize>) -> Self {
        Self {
            conv_channels,
            kernel_size: KERNEL,
            pool_after: POOL_AFTER.to_vec(),
            dropout_rate: 0.25,
            fc_widths: vec![128, 1],
            input_side: 64,
            input_channels: 3,
        }
    }

    pub fn with_input_channels(mut self, channels: usize) -> Self {
        self.input_channels = channels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_channels.len() != CONV_LAYERS {
            return Err(Error::invalid(format!(
                "expected {CONV_LAYERS} conv layers, got {}",
                self.conv_channels.len()
            )));
        }
        if self.conv_channels.iter().any(|&c| c == 0) {
            return Err(Error::invalid("conv channel counts must be >= 1"));
        }
        if self.kernel_size != KERNEL {
            return Err(Error::invalid(format!(
                "only {KERNEL}x{KERNEL} kernels are supported"
            )));
        }
        if self.pool_after != POOL_AFTER {
            return Err(Error::invalid(format!(
                "pooling must follow conv layers {POOL_AFTER:?}"
            )));
        }
        let reduction = 1 << POOL_AFTER.len();
        if self.input_side == 0 || self.input_side % reduction != 0 {
            return Err(Error::invalid(format!(
                "input side {} is not divisible by {reduction}",
                self.input_side
            )));
        }
        if self.fc_widths.len() != 2 || self.fc_widths[1] != 1 || self.fc_widths[0] == 0 {
            return Err(Error::invalid(format!(
                "fc widths must be [hidden, 1], got {:?}",
                self.fc_widths
            )));
        }
        if !(2..=3).contains(&self.input_channels) {
            return Err(Error::invalid(format!(
                "input channels must be 2 or 3, got {}",
                self.input_channels
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.input_side, self.input_side, self.input_channels]
    }

    fn flat_len(&self) -> usize {
        let side = self.input_side >> POOL_AFTER.len();
        side * side * self.conv_channels[CONV_LAYERS - 1]
    }

    /// Shapes of all parameters in canonical order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut shapes = Vec::with_capacity(2 * CONV_LAYERS + 4);
        let mut c_in = self.input_channels;
        for (i, &c_out) in self.conv_channels.iter().enumerate() {
            shapes.push((
                format!("conv{}.weight", i + 1),
                vec![KERNEL, KERNEL, c_in, c_out],
            ));
            shapes.push((format!("conv{}.bias", i + 1), vec![c_out]));
            c_in = c_out;
        }
        let hidden = self.fc_widths[0];
        shapes.push(("fc1.weight".into(), vec![self.flat_len(), hidden]));
        shapes.push(("fc1.bias".into(), vec![hidden]));
        shapes.push(("fc2.weight".into(), vec![hidden, 1]));
        shapes.push(("fc2.bias".into(), vec![1]));
        shapes
    }
}

/// How dropout behaves during a forward pass.
pub enum DropoutMode<'a> {
    /// Inference: dropout is the identity.
    Off,
    /// Training: masks are sampled from the generator.
    Sample(&'a mut ChaCha8Rng),
    /// Training with previously recorded masks (one per pooling stage).
    Fixed(&'a [Tensor]),
}

/// Activations recorded during a forward pass, consumed by the backward pass.
#[derive(Default)]
pub struct Tape {
    conv_inputs: Vec<Tensor>,
    conv_outputs: Vec<Tensor>,
    masks: Vec<Tensor>,
    pooled_shape: Vec<usize>,
    fc_input: Option<Tensor>,
    fc_hidden: Option<Tensor>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_recorded(&self) -> bool {
        self.fc_hidden.is_some()
    }

    pub fn dropout_masks(&self) -> &[Tensor] {
        &self.masks
    }

    fn clear(&mut self) {
        *self = Self::default();
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    params: Vec<Tensor>,
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = config
            .param_shapes()
            .into_iter()
            .map(|(name, shape)| {
                if name.ends_with(".bias") {
                    return Tensor::zeros(&shape);
                }
                let (fan_in, fan_out) = match shape.as_slice() {
                    [kh, kw, ci, co] => (kh * kw * ci, kh * kw * co),
                    [n_in, n_out] => (*n_in, *n_out),
                    _ => unreachable!("weight tensors are rank 2 or 4"),
                };
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Tensor::from_fn(&shape, |_| rng.random_range(-bound..bound))
            })
            .collect();
        Ok(Self { config, params })
    }

    pub fn from_params(config: NetworkConfig, params: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let shapes = config.param_shapes();
        if shapes.len() != params.len() {
            return Err(Error::shape(
                "Network::from_params",
                "parameter count",
                shapes.len(),
                params.len(),
            ));
        }
        for ((name, shape), p) in shapes.iter().zip(&params) {
            if p.shape() != shape.as_slice() {
                return Err(Error::shape(
                    "Network::from_params",
                    name.clone(),
                    format!("{shape:?}"),
                    format!("{:?}", p.shape()),
                ));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> Vec<String> {
        self.config
            .param_shapes()
            .into_iter()
            .map(|(n, _)| n)
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Predicted differentiated-PPG value for one frame difference.
    pub fn forward(
        &self,
        input: &Tensor,
        mut dropout_mode: DropoutMode<'_>,
        mut tape: Option<&mut Tape>,
    ) -> Result<f64> {
        let expected = self.config.input_shape();
        if input.shape() != expected {
            return Err(Error::shape(
                "network_forward",
                "input shape",
                format!("{expected:?}"),
                format!("{:?}", input.shape()),
            ));
        }
        if let Some(t) = tape.as_deref_mut() {
            t.clear();
        }
        let training = !matches!(dropout_mode, DropoutMode::Off);
        let rate = self.config.dropout_rate;

        let mut x = input.clone();
        for layer in 0..CONV_LAYERS {
            let z = conv2d_forward(&x, &self.params[2 * layer], &self.params[2 * layer + 1])?;
            let y = tanh_activation(&z);
            if let Some(t) = tape.as_deref_mut() {
                t.conv_inputs.push(x);
                t.conv_outputs.push(y.clone());
            }
            x = y;
            if POOL_AFTER.contains(&(layer + 1)) {
                let stage = t_stage(layer);
                let pooled = avgpool2x2(&x)?;
                let (out, mask) = match &mut dropout_mode {
                    DropoutMode::Off => (pooled, None),
                    DropoutMode::Sample(rng) => {
                        let (o, m) = dropout(&pooled, rate, &mut **rng, training)?;
                        (o, Some(m))
                    }
                    DropoutMode::Fixed(masks) => {
                        let m = masks.get(stage).ok_or_else(|| {
                            Error::invalid(format!("missing dropout mask for stage {stage}"))
                        })?;
                        (apply_mask(&pooled, m)?, Some(m.clone()))
                    }
                };
                if let (Some(t), Some(m)) = (tape.as_deref_mut(), mask) {
                    t.masks.push(m);
                }
                x = out;
            }
        }

        let pooled_shape = x.shape().to_vec();
        let n = x.len();
        let flat = x.reshape(&[n])?;
        let hidden = tanh_activation(&dense_forward(&flat, &self.params[20], &self.params[21])?);
        let out = dense_forward(&hidden, &self.params[22], &self.params[23])?;
        if let Some(t) = tape {
            t.pooled_shape = pooled_shape;
            t.fc_input = Some(flat);
            t.fc_hidden = Some(hidden);
        }
        Ok(out.data()[0])
    }

    pub fn predict(&self, input: &Tensor) -> Result<f64> {
        self.forward(input, DropoutMode::Off, None)
    }

    /// Gradients of a loss with respect to every parameter, given the
    /// derivative of that loss with respect to the network output.
    pub fn backward(&self, tape: &Tape, grad_output: f64) -> Result<Vec<Tensor>> {
        let (Some(flat), Some(hidden)) = (&tape.fc_input, &tape.fc_hidden) else {
            return Err(Error::BackwardBeforeForward);
        };
        let mut grads: Vec<Option<Tensor>> = vec![None; self.params.len()];

        let g_out = Tensor::new(&[1], vec![grad_output])?;
        let fc2 = dense_backward(hidden, &self.params[22], &g_out)?;
        grads[22] = Some(fc2.weights);
        grads[23] = Some(fc2.bias);
        let d_hidden = tanh_backward(hidden, &fc2.input)?;
        let fc1 = dense_backward(flat, &self.params[20], &d_hidden)?;
        grads[20] = Some(fc1.weights);
        grads[21] = Some(fc1.bias);

        let mut d = fc1.input.reshape(&tape.pooled_shape)?;
        for layer in (0..CONV_LAYERS).rev() {
            if POOL_AFTER.contains(&(layer + 1)) {
                let mask = &tape.masks.get(t_stage(layer));
                if let Some(m) = mask {
                    d = apply_mask(&d, m)?;
                }
                d = avgpool2x2_backward(&d)?;
            }
            let dz = tanh_backward(&tape.conv_outputs[layer], &d)?;
            let cg = conv2d_backward(
                &tape.conv_inputs[layer],
                &self.params[2 * layer],
                &dz,
                layer > 0,
            )?;
            grads[2 * layer] = Some(cg.weights);
            grads[2 * layer + 1] = Some(cg.bias);
            if let Some(di) = cg.input {
                d = di;
            }
        }
        Ok(grads
            .into_iter()
            .map(|g| g.expect("every parameter receives a gradient"))
            .collect())
    }

    /// Forward, Euclidean loss against `label`, and parameter gradients.
    pub fn loss_and_grads(
        &self,
        input: &Tensor,
        label: f64,
        dropout_mode: DropoutMode<'_>,
    ) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let pred = self.forward(input, dropout_mode, Some(&mut tape))?;
        let diff = pred - label;
        let grads = self.backward(&tape, diff)?;
        Ok((0.5 * diff * diff, grads))
    }
}

fn t_stage(layer: usize) -> usize {
    layer / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reduced_config() -> NetworkConfig {
        NetworkConfig {
            conv_channels: vec![2; CONV_LAYERS],
            fc_widths: vec![4, 1],
            input_side: 32,
            ..NetworkConfig::tiny()
        }
    }

    #[test]
    fn presets_validate() {
        NetworkConfig::paper().validate().unwrap();
        NetworkConfig::tiny().validate().unwrap();
        let mut bad = NetworkConfig::tiny();
        bad.input_side = 48;
        assert!(bad.validate().is_err());
        bad = NetworkConfig::tiny();
        bad.conv_channels.pop();
        assert!(bad.validate().is_err());
        bad = NetworkConfig::tiny();
        bad.fc_widths = vec![16, 2];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let net = Network::init(NetworkConfig::tiny(), 1).unwrap();
        let x = Tensor::zeros(&[64, 64, 3]);
        assert_eq!(net.predict(&x).unwrap(), 0.0);
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let net = Network::init(NetworkConfig::tiny(), 1).unwrap();
        let err = net.predict(&Tensor::zeros(&[64, 64, 2])).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn backward_before_forward_errors() {
        let net = Network::init(reduced_config(), 1).unwrap();
        assert!(matches!(
            net.backward(&Tape::new(), 1.0),
            Err(Error::BackwardBeforeForward)
        ));
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradients() {
        let net = Network::init(reduced_config(), 2).unwrap();
        let x = Tensor::from_fn(&[32, 32, 3], |i| (i as f64 * 0.37).sin());
        let mut tape = Tape::new();
        net.forward(&x, DropoutMode::Off, Some(&mut tape)).unwrap();
        let grads = net.backward(&tape, 0.0).unwrap();
        assert!(grads.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn forward_is_deterministic() {
        let net = Network::init(NetworkConfig::tiny(), 3).unwrap();
        let x = Tensor::from_fn(&[64, 64, 3], |i| ((i * 7919) % 101) as f64 / 50.0 - 1.0);
        let mut r1 = ChaCha8Rng::seed_from_u64(4);
        let mut r2 = ChaCha8Rng::seed_from_u64(4);
        let a = net.forward(&x, DropoutMode::Sample(&mut r1), None).unwrap();
        let b = net.forward(&x, DropoutMode::Sample(&mut r2), None).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
