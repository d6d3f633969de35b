//! Parameter declarations and the building blocks shared by the architectures.

use super::ParamMap;
use crate::autodiff::{Conv2dSpec, Result, Tensor};

/// Init scale of the layer that emits the bands, so an untrained network
/// starts near zero output instead of far above the targets.
pub const OUTPUT_GAIN: f64 = 0.01;

/// Init scale of projections that feed a sum (HRNet's upsampling fusion,
/// Restormer's attention and FFN outputs), so each added branch starts as a
/// small correction.
pub const BRANCH_GAIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// `U(-b, b)` with `b = gain · sqrt(6 / fan_in)`.
    HeUniform { fan_in: usize, gain: f64 },
    Const(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

#[derive(Default)]
pub(crate) struct Specs(pub Vec<ParamSpec>);

impl Specs {
    fn push(&mut self, name: String, shape: Vec<usize>, init: Init) {
        self.0.push(ParamSpec { name, shape, init });
    }

    /// `name.w` `[cout, cin/groups, k, k]` and `name.b` `[cout]`.
    pub fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, groups: usize) {
        self.conv_with_gain(name, cin, cout, k, groups, 1.0);
    }

    /// Final projection onto the output bands, initialized at [`OUTPUT_GAIN`].
    pub fn output_conv(&mut self, name: &str, cin: usize, cout: usize, k: usize) {
        self.conv_with_gain(name, cin, cout, k, 1, OUTPUT_GAIN);
    }

    pub fn conv_with_gain(&mut self, name: &str, cin: usize, cout: usize, k: usize, groups: usize, gain: f64) {
        let fan_in = cin / groups * k * k;
        self.push(format!("{name}.w"), vec![cout, cin / groups, k, k], Init::HeUniform { fan_in, gain });
        self.push(format!("{name}.b"), vec![cout], Init::Const(0.0));
    }

    pub fn layer_norm(&mut self, name: &str, dim: usize) {
        self.push(format!("{name}.g"), vec![dim], Init::Const(1.0));
        self.push(format!("{name}.b"), vec![dim], Init::Const(0.0));
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) {
        self.push(name.to_string(), shape.to_vec(), Init::Const(value));
    }

    /// Two 3×3 convs at `width`.
    pub fn res_block(&mut self, name: &str, width: usize) {
        self.conv(&format!("{name}.c1"), width, width, 3, 1);
        self.conv(&format!("{name}.c2"), width, width, 3, 1);
    }
}

pub(crate) fn conv(p: &ParamMap, name: &str, x: &Tensor, spec: Conv2dSpec) -> Result<Tensor> {
    x.conv2d(p.get(&format!("{name}.w")), Some(p.get(&format!("{name}.b"))), spec)
}

pub(crate) fn conv3(p: &ParamMap, name: &str, x: &Tensor) -> Result<Tensor> {
    conv(p, name, x, Conv2dSpec::same(3))
}

pub(crate) fn conv1(p: &ParamMap, name: &str, x: &Tensor) -> Result<Tensor> {
    conv(p, name, x, Conv2dSpec::default())
}

pub(crate) fn dwconv3(p: &ParamMap, name: &str, x: &Tensor) -> Result<Tensor> {
    conv(p, name, x, Conv2dSpec::depthwise(3, x.shape()[0]))
}

/// Per-pixel normalization across channels of a `[C, H, W]` map.
pub(crate) fn channel_norm(p: &ParamMap, name: &str, x: &Tensor) -> Result<Tensor> {
    x.layer_norm(0, p.get(&format!("{name}.g")), p.get(&format!("{name}.b")))
}

/// `x + scale · conv(relu(conv(x)))`.
pub(crate) fn res_block(p: &ParamMap, name: &str, x: &Tensor, scale: f64) -> Result<Tensor> {
    let y = conv3(p, &format!("{name}.c1"), x)?.relu();
    let y = conv3(p, &format!("{name}.c2"), &y)?;
    let y = if scale == 1.0 { y } else { y.scale(scale) };
    x.add(&y)
}

/// Attention across channels: `q, k, v` are `[C, H, W]` maps split into
/// `heads` groups of `C / heads` channels. Each channel's spatial vector is
/// L2-normalized for `q` and `k`, the `d × d` logits are scaled by a
/// per-head temperature (`[heads, 1, 1]`) plus an optional `[heads, d, d]`
/// bias, and the softmax weights mix the channels of `v`.
pub(crate) fn channel_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    heads: usize,
    temperature: &Tensor,
    bias: Option<&Tensor>,
) -> Result<Tensor> {
    let shape = q.shape().to_vec();
    let (c, n) = (shape[0], shape[1] * shape[2]);
    let d = c / heads;
    let split = |t: &Tensor| t.reshape(&[heads, d, n]);
    let qn = split(q)?.l2_normalize(2, 1e-12)?;
    let kn = split(k)?.l2_normalize(2, 1e-12)?;
    let logits = qn.bmm(&kn.transpose()?)?;
    let logits = logits.mul(&temperature.broadcast_to(&[heads, d, d])?)?;
    let logits = match bias {
        Some(b) => logits.add(b)?,
        None => logits,
    };
    logits.softmax(2)?.bmm(&split(v)?)?.reshape(&shape)
}
