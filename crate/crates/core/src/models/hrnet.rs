//! Multi-resolution regressor: one stream per scale, fused bottom-up
//! through learned 1×1 projections and pixel shuffles.

use super::layers::{conv1, conv3, res_block, Specs, BRANCH_GAIN};
use super::{ModelConfig, ParamMap, ParamSpec};
use crate::autodiff::{Result, Tensor};

pub(crate) fn params(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let w = cfg.base_width;
    let mut s = Specs::default();
    for k in 0..cfg.levels {
        s.conv(&format!("s{k}.head"), 3 << (2 * k), w, 3, 1);
        if k + 1 < cfg.levels {
            s.conv_with_gain(&format!("s{k}.up"), w, 4 * w, 1, 1, BRANCH_GAIN);
        }
        for b in 0..cfg.depth {
            s.res_block(&format!("s{k}.block{b}"), w);
        }
    }
    s.output_conv("tail", w, cfg.out_bands, 3);
    s.0
}

pub(crate) fn forward(cfg: &ModelConfig, p: &ParamMap, x: &Tensor) -> Result<Tensor> {
    // stream k sees the input folded 2^k times into channels
    let mut inputs = vec![x.clone()];
    for k in 1..cfg.levels {
        let next = inputs[k - 1].pixel_unshuffle(2)?;
        inputs.push(next);
    }
    let mut below: Option<Tensor> = None;
    for k in (0..cfg.levels).rev() {
        let mut f = conv3(p, &format!("s{k}.head"), &inputs[k])?;
        if let Some(lower) = &below {
            f = f.add(&conv1(p, &format!("s{k}.up"), lower)?.pixel_shuffle(2)?)?;
        }
        for b in 0..cfg.depth {
            f = res_block(p, &format!("s{k}.block{b}"), &f, super::RESIDUAL_SCALE)?;
        }
        below = Some(f);
    }
    conv3(p, "tail", &below.expect("levels >= 1"))
}
