//! Plain residual stack without normalization layers.

use super::layers::{conv3, res_block, Specs};
use super::{ModelConfig, ParamMap, ParamSpec};
use crate::autodiff::{Result, Tensor};

pub const RESIDUAL_SCALE: f64 = 0.1;

pub(crate) fn params(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let w = cfg.base_width;
    let mut s = Specs::default();
    s.conv("head", 3, w, 3, 1);
    for i in 0..cfg.depth {
        s.res_block(&format!("block{i}"), w);
    }
    s.output_conv("tail", w, cfg.out_bands, 3);
    s.0
}

pub(crate) fn forward(cfg: &ModelConfig, p: &ParamMap, x: &Tensor) -> Result<Tensor> {
    let mut f = conv3(p, "head", x)?;
    for i in 0..cfg.depth {
        f = res_block(p, &format!("block{i}"), &f, RESIDUAL_SCALE)?;
    }
    conv3(p, "tail", &f)
}
