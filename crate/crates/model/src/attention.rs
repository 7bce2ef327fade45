//! Channel-axis ("transposed") multi-head attention: each head attends
//! over its channels, with the similarity computed as a Gram matrix over all
//! pixels. Queries and keys are L2-normalized along space and the logits
//! scaled by a learned per-head temperature over `√C`.

use candle_core::Tensor;

use crate::config::RfdOrder;
use crate::error::{ensure, Result};
use crate::layers::{ChannelNorm, Conv2d};
use crate::ops::softmax_last;
use crate::params::{Builder, Init};

#[derive(Debug, Clone)]
struct HeadAttention {
    heads: usize,
    temperature: Tensor,
}

impl HeadAttention {
    fn new(b: &mut Builder, c: usize, heads: usize) -> Result<Self> {
        ensure!(c % heads == 0, "channels {c} not divisible by {heads} heads");
        Ok(HeadAttention {
            heads,
            temperature: b.param("temperature", &[1, heads, 1, 1], Init::Const((c as f64).sqrt()))?,
        })
    }

    /// Attention weights `(N, heads, c_h, c_h)`; rows sum to 1.
    fn weights(&self, q: &Tensor, k: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = q.dims4()?;
        let ch = c / self.heads;
        let split = |t: &Tensor| t.reshape((n, self.heads, ch, h * w));
        let q = crate::ops::l2_normalize_last(&split(q)?)?;
        let k = crate::ops::l2_normalize_last(&split(k)?)?;
        let logits = q.matmul(&k.t()?)?;
        let logits = logits.broadcast_mul(&self.temperature)?.affine(1.0 / (c as f64).sqrt(), 0.0)?;
        softmax_last(&logits)
    }

    fn apply(&self, attn: &Tensor, v: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = v.dims4()?;
        let v = v.reshape((n, self.heads, c / self.heads, h * w))?;
        Ok(attn.matmul(&v)?.reshape((n, c, h, w))?)
    }
}

/// Channel attention block: `x + W_o · MHSA(LN(x))`.
#[derive(Debug, Clone)]
pub struct Cab {
    norm: ChannelNorm,
    qkv: Conv2d,
    attn: HeadAttention,
    out: Conv2d,
}

impl Cab {
    pub fn new(b: &mut Builder, name: &str, c: usize, heads: usize) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(Cab {
                norm: ChannelNorm::new(b, "norm", c)?,
                qkv: Conv2d::new(b, "qkv", c, 3 * c, 1)?,
                attn: HeadAttention::new(b, c, heads)?,
                out: Conv2d::zeros(b, "out", c, c, 1)?,
            })
        })
    }

    fn qkv(&self, x: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let c = x.dim(1)?;
        let p = self.qkv.forward(&self.norm.forward(x)?)?;
        Ok((p.narrow(1, 0, c)?, p.narrow(1, c, c)?, p.narrow(1, 2 * c, c)?))
    }

    pub fn attention_weights(&self, x: &Tensor) -> Result<Tensor> {
        let (q, k, _) = self.qkv(x)?;
        self.attn.weights(&q, &k)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (q, k, v) = self.qkv(x)?;
        let a = self.attn.weights(&q, &k)?;
        let y = self.out.forward(&self.attn.apply(&a, &v)?)?;
        Ok((x + y)?)
    }
}

/// Queries from one modality, keys and values from the other:
/// `X = q + V·softmax(QKᵀ)`, then `X + MLP(LN(X))`.
#[derive(Debug, Clone)]
pub struct CrossAttention {
    norm_q: ChannelNorm,
    norm_kv: ChannelNorm,
    q: Conv2d,
    k: Conv2d,
    v: Conv2d,
    attn: HeadAttention,
    norm_mlp: ChannelNorm,
    fc1: Conv2d,
    fc2: Conv2d,
}

impl CrossAttention {
    pub fn new(b: &mut Builder, name: &str, c: usize, heads: usize) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(CrossAttention {
                norm_q: ChannelNorm::new(b, "norm_q", c)?,
                norm_kv: ChannelNorm::new(b, "norm_kv", c)?,
                q: Conv2d::new(b, "q", c, c, 1)?,
                k: Conv2d::new(b, "k", c, c, 1)?,
                v: Conv2d::zeros(b, "v", c, c, 1)?,
                attn: HeadAttention::new(b, c, heads)?,
                norm_mlp: ChannelNorm::new(b, "norm_mlp", c)?,
                fc1: Conv2d::new(b, "fc1", c, 2 * c, 1)?,
                fc2: Conv2d::zeros(b, "fc2", 2 * c, c, 1)?,
            })
        })
    }

    fn check(query: &Tensor, kv: &Tensor) -> Result<()> {
        ensure!(
            query.dims() == kv.dims(),
            "cross attention inputs differ: {:?} vs {:?}",
            query.dims(),
            kv.dims()
        );
        Ok(())
    }

    pub fn attention_weights(&self, query: &Tensor, kv: &Tensor) -> Result<Tensor> {
        Self::check(query, kv)?;
        let q = self.q.forward(&self.norm_q.forward(query)?)?;
        let k = self.k.forward(&self.norm_kv.forward(kv)?)?;
        self.attn.weights(&q, &k)
    }

    pub fn forward(&self, query: &Tensor, kv: &Tensor) -> Result<Tensor> {
        Self::check(query, kv)?;
        let kvn = self.norm_kv.forward(kv)?;
        let q = self.q.forward(&self.norm_q.forward(query)?)?;
        let k = self.k.forward(&kvn)?;
        let v = self.v.forward(&kvn)?;
        let a = self.attn.weights(&q, &k)?;
        let x = (query + self.attn.apply(&a, &v)?)?;
        let m = self.fc2.forward(&self.fc1.forward(&self.norm_mlp.forward(&x)?)?.gelu()?)?;
        Ok((x + m)?)
    }
}

/// Reciprocal feature deblurring: channel self-attention on both
/// modalities, then frame→event enhancement and event→frame deblurring.
#[derive(Debug, Clone)]
pub struct Rfd {
    cab_i: Cab,
    cab_e: Cab,
    i_to_e: CrossAttention,
    e_to_i: CrossAttention,
    order: RfdOrder,
}

impl Rfd {
    pub fn new(b: &mut Builder, name: &str, c: usize, heads: usize, order: RfdOrder) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(Rfd {
                cab_i: Cab::new(b, "cab_i", c, heads)?,
                cab_e: Cab::new(b, "cab_e", c, heads)?,
                i_to_e: CrossAttention::new(b, "i_to_e", c, heads)?,
                e_to_i: CrossAttention::new(b, "e_to_i", c, heads)?,
                order,
            })
        })
    }

    /// Returns `(sharpened frame feature, enhanced event feature)`.
    pub fn forward(&self, fi: &Tensor, fe: &Tensor) -> Result<(Tensor, Tensor)> {
        ensure!(fi.dims() == fe.dims(), "RFD inputs differ: {:?} vs {:?}", fi.dims(), fe.dims());
        let ci = self.cab_i.forward(fi)?;
        let ce = self.cab_e.forward(fe)?;
        Ok(match self.order {
            RfdOrder::IeThenEi => {
                let e = self.i_to_e.forward(&ce, &ci)?;
                let i = self.e_to_i.forward(&ci, &e)?;
                (i, e)
            }
            RfdOrder::EiThenIe => {
                let i = self.e_to_i.forward(&ci, &ce)?;
                let e = self.i_to_e.forward(&ce, &i)?;
                (i, e)
            }
            RfdOrder::EiOnly => {
                let i = self.e_to_i.forward(&ci, &ce)?;
                (i, ce)
            }
        })
    }
}
