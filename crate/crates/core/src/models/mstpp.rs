//! Spectral-wise transformer: self-attention across channels with a
//! learnable per-head temperature and additive channel bias.
//!
//! Embedding, projections and output are 1×1 convs, so permuting pixels
//! permutes the output identically.

use super::layers::{channel_attention, channel_norm, conv1, Specs};
use super::{ModelConfig, ParamMap, ParamSpec};
use crate::autodiff::{Result, Tensor};

pub(crate) fn params(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let (w, h) = (cfg.base_width, cfg.heads);
    let d = w / h;
    let mut s = Specs::default();
    s.conv("embed", 3, w, 1, 1);
    for i in 0..cfg.depth {
        let b = format!("block{i}");
        s.layer_norm(&format!("{b}.norm1"), w);
        for proj in ["q", "k", "v"] {
            s.conv(&format!("{b}.{proj}"), w, w, 1, 1);
        }
        s.constant(&format!("{b}.temperature"), &[h, 1, 1], 1.0);
        s.constant(&format!("{b}.attn_bias"), &[h, d, d], 0.0);
        s.conv(&format!("{b}.proj"), w, w, 1, 1);
        s.layer_norm(&format!("{b}.norm2"), w);
        s.conv(&format!("{b}.ffn1"), w, w * cfg.ffn_expansion, 1, 1);
        s.conv(&format!("{b}.ffn2"), w * cfg.ffn_expansion, w, 1, 1);
    }
    s.output_conv("out", w, cfg.out_bands, 1);
    s.0
}

pub(crate) fn forward(cfg: &ModelConfig, p: &ParamMap, x: &Tensor) -> Result<Tensor> {
    let mut f = conv1(p, "embed", x)?;
    for i in 0..cfg.depth {
        let b = format!("block{i}");
        let y = channel_norm(p, &format!("{b}.norm1"), &f)?;
        let q = conv1(p, &format!("{b}.q"), &y)?;
        let k = conv1(p, &format!("{b}.k"), &y)?;
        let v = conv1(p, &format!("{b}.v"), &y)?;
        let temp = p.get(&format!("{b}.temperature"));
        let bias = p.get(&format!("{b}.attn_bias"));
        let a = channel_attention(&q, &k, &v, cfg.heads, temp, Some(bias))?;
        f = f.add(&conv1(p, &format!("{b}.proj"), &a)?)?;
        let y = channel_norm(p, &format!("{b}.norm2"), &f)?;
        let y = conv1(p, &format!("{b}.ffn1"), &y)?.gelu();
        f = f.add(&conv1(p, &format!("{b}.ffn2"), &y)?)?;
    }
    conv1(p, "out", &f)
}
