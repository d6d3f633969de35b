//! Encoder–decoder transformer with transposed (channel) attention and a
//! gated feed-forward network at every level.

use super::layers::{channel_attention, channel_norm, conv1, conv3, dwconv3, Specs, BRANCH_GAIN};
use super::{ModelConfig, ParamMap, ParamSpec};
use crate::autodiff::{Result, Tensor};

fn block_params(s: &mut Specs, name: &str, dim: usize, heads: usize, ffn: usize) {
    s.layer_norm(&format!("{name}.norm1"), dim);
    for proj in ["q", "k", "v"] {
        s.conv(&format!("{name}.{proj}"), dim, dim, 1, 1);
        s.conv(&format!("{name}.{proj}_dw"), dim, dim, 3, dim);
    }
    s.constant(&format!("{name}.temperature"), &[heads, 1, 1], 1.0);
    s.conv_with_gain(&format!("{name}.proj"), dim, dim, 1, 1, BRANCH_GAIN);
    s.layer_norm(&format!("{name}.norm2"), dim);
    let hidden = dim * ffn;
    for branch in ["gate", "value"] {
        s.conv(&format!("{name}.{branch}"), dim, hidden, 1, 1);
        s.conv(&format!("{name}.{branch}_dw"), hidden, hidden, 3, hidden);
    }
    s.conv_with_gain(&format!("{name}.ffn_out"), hidden, dim, 1, 1, BRANCH_GAIN);
}

fn block(p: &ParamMap, name: &str, x: &Tensor, heads: usize) -> Result<Tensor> {
    let y = channel_norm(p, &format!("{name}.norm1"), x)?;
    let qkv = |proj: &str| dwconv3(p, &format!("{name}.{proj}_dw"), &conv1(p, &format!("{name}.{proj}"), &y)?);
    let (q, k, v) = (qkv("q")?, qkv("k")?, qkv("v")?);
    let a = channel_attention(&q, &k, &v, heads, p.get(&format!("{name}.temperature")), None)?;
    let x = x.add(&conv1(p, &format!("{name}.proj"), &a)?)?;
    let y = channel_norm(p, &format!("{name}.norm2"), &x)?;
    let branch = |b: &str| dwconv3(p, &format!("{name}.{b}_dw"), &conv1(p, &format!("{name}.{b}"), &y)?);
    let gated = branch("gate")?.gelu().mul(&branch("value")?)?;
    x.add(&conv1(p, &format!("{name}.ffn_out"), &gated)?)
}

fn dims(cfg: &ModelConfig, level: usize) -> (usize, usize) {
    (cfg.base_width << level, cfg.heads << level)
}

pub(crate) fn params(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let mut s = Specs::default();
    let top = cfg.levels - 1;
    s.conv("embed", 3, cfg.base_width, 3, 1);
    for l in 0..top {
        let (dim, heads) = dims(cfg, l);
        for b in 0..cfg.depth {
            block_params(&mut s, &format!("enc{l}.block{b}"), dim, heads, cfg.ffn_expansion);
        }
        s.conv(&format!("down{l}"), 4 * dim, 2 * dim, 1, 1);
    }
    let (dim, heads) = dims(cfg, top);
    for b in 0..cfg.depth {
        block_params(&mut s, &format!("mid.block{b}"), dim, heads, cfg.ffn_expansion);
    }
    for l in (0..top).rev() {
        let (dim, heads) = dims(cfg, l);
        s.conv(&format!("up{l}"), 2 * dim, 4 * dim, 1, 1);
        for b in 0..cfg.depth {
            block_params(&mut s, &format!("dec{l}.block{b}"), dim, heads, cfg.ffn_expansion);
        }
    }
    s.output_conv("out", cfg.base_width, cfg.out_bands, 3);
    s.output_conv("shallow", 3, cfg.out_bands, 3);
    s.0
}

pub(crate) fn forward(cfg: &ModelConfig, p: &ParamMap, x: &Tensor) -> Result<Tensor> {
    let top = cfg.levels - 1;
    let mut f = conv3(p, "embed", x)?;
    let mut skips = Vec::with_capacity(top);
    for l in 0..top {
        let (_, heads) = dims(cfg, l);
        for b in 0..cfg.depth {
            f = block(p, &format!("enc{l}.block{b}"), &f, heads)?;
        }
        skips.push(f.clone());
        f = conv1(p, &format!("down{l}"), &f.pixel_unshuffle(2)?)?;
    }
    let (_, heads) = dims(cfg, top);
    for b in 0..cfg.depth {
        f = block(p, &format!("mid.block{b}"), &f, heads)?;
    }
    for l in (0..top).rev() {
        let (_, heads) = dims(cfg, l);
        f = conv1(p, &format!("up{l}"), &f)?.pixel_shuffle(2)?.add(&skips[l])?;
        for b in 0..cfg.depth {
            f = block(p, &format!("dec{l}.block{b}"), &f, heads)?;
        }
    }
    conv3(p, "out", &f)?.add(&conv3(p, "shallow", x)?)
}
