//! The U-Net: five encoder blocks, a bottleneck and four decoder blocks.
//!
//! ```text
//! E1(w) ─pool─ E2(2w) ─pool─ E3(4w) ─pool─ E4(8w) ─pool─ E5(16w) ─ B(16w)
//!   │            │             │             └────────────── D1(8w) ◄─ up
//!   │            │             └──────────────────────────── D2(4w) ◄─ up
//!   │            └────────────────────────────────────────── D3(2w) ◄─ up
//!   └─────────────────────────────────────────────────────── D4(w)  ◄─ up ─ 1×1 ─ σ
//! ```
//!
//! Every block is `(conv3×3 → batch norm → ReLU) × 2`. Downsampling is 2×2 max
//! pooling; upsampling is nearest 2× followed by a biased 3×3 convolution whose
//! output is concatenated with the encoder skip.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ops::{self, BnCache, Tensor};
use crate::{Error, Result};

/// Spatial sizes must be multiples of this (four 2× poolings).
pub const SIZE_MULTIPLE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UNetConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub base_width: usize,
    pub seed: u64,
}

impl Default for UNetConfig {
    fn default() -> Self {
        UNetConfig {
            in_channels: 9,
            out_channels: 16,
            base_width: 64,
            seed: 0,
        }
    }
}

impl UNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.base_width == 0 {
            return Err(Error::Config(format!(
                "in_channels, out_channels and base_width must be ≥ 1 (got {}, {}, {})",
                self.in_channels, self.out_channels, self.base_width
            )));
        }
        if self.base_width.checked_mul(16).is_none_or(|w| w > 1 << 16) {
            return Err(Error::Config(format!(
                "base_width {} is too large",
                self.base_width
            )));
        }
        Ok(())
    }

    /// Identifies the weight layout. The seed is not part of it: weights trained
    /// from any initialization fit the same architecture.
    pub fn fingerprint(&self) -> String {
        format!(
            "unet2d-v1/e5b1d4/in{}/out{}/w{}",
            self.in_channels, self.out_channels, self.base_width
        )
    }
}

/// One named parameter or buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
    /// Batch-norm running statistics are state, not optimized.
    pub trainable: bool,
}

/// Ordered named tensors plus the fingerprint of the config they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub fingerprint: String,
    pub tensors: Vec<NamedTensor>,
}

impl ModelWeights {
    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors
            .iter()
            .filter(|t| t.trainable)
            .map(|t| t.data.len())
            .sum()
    }
}

#[derive(Debug, Clone)]
struct Conv {
    w: usize,
    b: Option<usize>,
    cout: usize,
    k: usize,
}

#[derive(Debug, Clone)]
struct Bn {
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
}

#[derive(Debug, Clone)]
struct Block {
    c1: Conv,
    n1: Bn,
    c2: Conv,
    n2: Bn,
}

struct Builder {
    tensors: Vec<NamedTensor>,
    rng: ChaCha8Rng,
}

impl Builder {
    fn push(&mut self, name: String, shape: Vec<usize>, data: Vec<f32>, trainable: bool) -> usize {
        self.tensors.push(NamedTensor {
            name,
            shape,
            data,
            trainable,
        });
        self.tensors.len() - 1
    }

    /// Kaiming-normal weights (fan-in, ReLU gain), zero bias.
    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, bias: bool) -> Conv {
        let fan_in = (cin * k * k) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
        let data = (0..cout * cin * k * k)
            .map(|_| normal.sample(&mut self.rng) as f32)
            .collect();
        let w = self.push(format!("{name}.weight"), vec![cout, cin, k, k], data, true);
        let b = bias.then(|| self.push(format!("{name}.bias"), vec![cout], vec![0.0; cout], true));
        Conv { w, b, cout, k }
    }

    fn bn(&mut self, name: &str, c: usize) -> Bn {
        Bn {
            gamma: self.push(format!("{name}.gamma"), vec![c], vec![1.0; c], true),
            beta: self.push(format!("{name}.beta"), vec![c], vec![0.0; c], true),
            mean: self.push(format!("{name}.running_mean"), vec![c], vec![0.0; c], false),
            var: self.push(format!("{name}.running_var"), vec![c], vec![1.0; c], false),
        }
    }

    fn block(&mut self, name: &str, cin: usize, cout: usize) -> Block {
        Block {
            c1: self.conv(&format!("{name}.conv1"), cin, cout, 3, false),
            n1: self.bn(&format!("{name}.bn1"), cout),
            c2: self.conv(&format!("{name}.conv2"), cout, cout, 3, false),
            n2: self.bn(&format!("{name}.bn2"), cout),
        }
    }
}

struct BlockCache {
    x: Tensor,
    bn1: BnCache,
    a1: Tensor,
    bn2: BnCache,
    a2: Tensor,
}

/// Intermediate values kept from a training forward pass.
pub struct Tape {
    enc: Vec<BlockCache>,
    pool_args: Vec<(Vec<u8>, [usize; 4])>,
    bottleneck: BlockCache,
    up_inputs: Vec<Tensor>,
    up_widths: Vec<usize>,
    dec: Vec<BlockCache>,
    probs: Tensor,
}

impl Tape {
    pub fn probabilities(&self) -> &Tensor {
        &self.probs
    }
}

/// Gradients aligned with [`ModelWeights::tensors`]; empty for buffers.
pub type Gradients = Vec<Vec<f32>>;

#[derive(Debug, Clone)]
pub struct UNet {
    config: UNetConfig,
    weights: ModelWeights,
    enc: Vec<Block>,
    bottleneck: Block,
    up: Vec<Conv>,
    dec: Vec<Block>,
    head: Conv,
}

impl UNet {
    /// Fresh network with deterministic initialization from `config.seed`.
    pub fn new(config: UNetConfig) -> Result<UNet> {
        config.validate()?;
        let w = config.base_width;
        let mut b = Builder {
            tensors: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        };
        let widths = [w, 2 * w, 4 * w, 8 * w, 16 * w];
        let mut enc = Vec::new();
        let mut cin = config.in_channels;
        for (i, &c) in widths.iter().enumerate() {
            enc.push(b.block(&format!("enc{}", i + 1), cin, c));
            cin = c;
        }
        let bottleneck = b.block("bottleneck", 16 * w, 16 * w);
        let mut up = Vec::new();
        let mut dec = Vec::new();
        let mut prev = 16 * w;
        for d in 0..4 {
            let skip = widths[3 - d];
            up.push(b.conv(&format!("up{}", d + 1), prev, skip, 3, true));
            dec.push(b.block(&format!("dec{}", d + 1), 2 * skip, skip));
            prev = skip;
        }
        let head = b.conv("head", w, config.out_channels, 1, true);
        Ok(UNet {
            config,
            weights: ModelWeights {
                fingerprint: config.fingerprint(),
                tensors: b.tensors,
            },
            enc,
            bottleneck,
            up,
            dec,
            head,
        })
    }

    /// Network for `config` carrying `weights`, which must match the layout exactly.
    pub fn from_weights(config: UNetConfig, weights: ModelWeights) -> Result<UNet> {
        let mut net = UNet::new(config)?;
        if weights.fingerprint != net.weights.fingerprint {
            return Err(Error::Fingerprint(format!(
                "weights are for `{}`, model is `{}`",
                weights.fingerprint, net.weights.fingerprint
            )));
        }
        if weights.tensors.len() != net.weights.tensors.len() {
            return Err(Error::Fingerprint(format!(
                "{} tensors supplied, {} expected",
                weights.tensors.len(),
                net.weights.tensors.len()
            )));
        }
        for (have, want) in weights.tensors.iter().zip(&net.weights.tensors) {
            if have.name != want.name
                || have.shape != want.shape
                || have.data.len() != want.data.len()
            {
                return Err(Error::Fingerprint(format!(
                    "tensor `{}` {:?} does not match `{}` {:?}",
                    have.name, have.shape, want.name, want.shape
                )));
            }
        }
        for (dst, src) in net.weights.tensors.iter_mut().zip(weights.tensors) {
            dst.data = src.data;
        }
        Ok(net)
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut ModelWeights {
        &mut self.weights
    }

    pub fn zero_gradients(&self) -> Gradients {
        self.weights
            .tensors
            .iter()
            .map(|t| {
                if t.trainable {
                    vec![0.0; t.data.len()]
                } else {
                    Vec::new()
                }
            })
            .collect()
    }

    fn p(&self, i: usize) -> &[f32] {
        &self.weights.tensors[i].data
    }

    pub fn check_input(&self, x: &Tensor) -> Result<()> {
        let [n, c, h, w] = x.shape;
        if n == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        if c != self.config.in_channels {
            return Err(Error::Shape(format!(
                "input has {c} channels, model expects {}",
                self.config.in_channels
            )));
        }
        if h == 0 || w == 0 || h % SIZE_MULTIPLE != 0 || w % SIZE_MULTIPLE != 0 {
            return Err(Error::Shape(format!(
                "spatial size {h}×{w} is not a positive multiple of {SIZE_MULTIPLE}; pad the input"
            )));
        }
        Ok(())
    }

    fn conv(&self, c: &Conv, x: &Tensor) -> Tensor {
        ops::conv2d(x, self.p(c.w), c.b.map(|b| self.p(b)), c.cout, c.k)
    }

    fn block_eval(&self, b: &Block, x: &Tensor) -> Tensor {
        let mut t = self.conv(&b.c1, x);
        t = ops::batch_norm_eval(
            &t,
            self.p(b.n1.gamma),
            self.p(b.n1.beta),
            self.p(b.n1.mean),
            self.p(b.n1.var),
        );
        ops::relu_inplace(&mut t);
        t = self.conv(&b.c2, &t);
        t = ops::batch_norm_eval(
            &t,
            self.p(b.n2.gamma),
            self.p(b.n2.beta),
            self.p(b.n2.mean),
            self.p(b.n2.var),
        );
        ops::relu_inplace(&mut t);
        t
    }

    /// Evaluation-mode forward pass on an `[n, c, h, w]` batch; returns sigmoid
    /// probabilities. Samples do not interact.
    pub fn forward_nchw(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut skips = Vec::with_capacity(4);
        let mut t = x.clone();
        for (i, b) in self.enc.iter().enumerate() {
            t = self.block_eval(b, &t);
            if i < 4 {
                let (p, _) = ops::max_pool2(&t);
                skips.push(t);
                t = p;
            }
        }
        t = self.block_eval(&self.bottleneck, &t);
        for d in 0..4 {
            let u = self.conv(&self.up[d], &ops::upsample2(&t));
            t = self.block_eval(&self.dec[d], &ops::concat(&u, &skips[3 - d]));
        }
        let mut out = self.conv(&self.head, &t);
        out.data.iter_mut().for_each(|v| *v = ops::sigmoid(*v));
        Ok(out)
    }

    fn bn_train(&mut self, n: &Bn, x: &Tensor) -> (Tensor, BnCache) {
        // Running statistics live in the weight list next to gamma and beta.
        let mut mean = std::mem::take(&mut self.weights.tensors[n.mean].data);
        let mut var = std::mem::take(&mut self.weights.tensors[n.var].data);
        let out = ops::batch_norm_train(x, self.p(n.gamma), self.p(n.beta), &mut mean, &mut var);
        self.weights.tensors[n.mean].data = mean;
        self.weights.tensors[n.var].data = var;
        out
    }

    fn block_train(&mut self, b: &Block, x: Tensor) -> BlockCache {
        let t = self.conv(&b.c1, &x);
        let (mut a1, bn1) = self.bn_train(&b.n1, &t);
        ops::relu_inplace(&mut a1);
        let t = self.conv(&b.c2, &a1);
        let (mut a2, bn2) = self.bn_train(&b.n2, &t);
        ops::relu_inplace(&mut a2);
        BlockCache {
            x,
            bn1,
            a1,
            bn2,
            a2,
        }
    }

    /// Training-mode forward pass: batch statistics, running statistics updated.
    pub fn forward_train(&mut self, x: &Tensor) -> Result<Tape> {
        self.check_input(x)?;
        let enc_blocks = self.enc.clone();
        let mut enc = Vec::with_capacity(5);
        let mut pool_args = Vec::with_capacity(4);
        let mut t = x.clone();
        for (i, b) in enc_blocks.iter().enumerate() {
            let cache = self.block_train(b, t);
            if i < 4 {
                let (p, arg) = ops::max_pool2(&cache.a2);
                pool_args.push((arg, cache.a2.shape));
                t = p;
            } else {
                t = cache.a2.clone();
            }
            enc.push(cache);
        }
        let bn_block = self.bottleneck.clone();
        let bottleneck = self.block_train(&bn_block, t);
        let mut t = bottleneck.a2.clone();
        let mut up_inputs = Vec::with_capacity(4);
        let mut up_widths = Vec::with_capacity(4);
        let mut dec = Vec::with_capacity(4);
        let dec_blocks = self.dec.clone();
        for (d, b) in dec_blocks.iter().enumerate() {
            let u_in = ops::upsample2(&t);
            let u = self.conv(&self.up[d], &u_in);
            up_widths.push(u.c());
            up_inputs.push(u_in);
            let cat = ops::concat(&u, &enc[3 - d].a2);
            let cache = self.block_train(b, cat);
            t = cache.a2.clone();
            dec.push(cache);
        }
        let mut probs = self.conv(&self.head, &t);
        probs.data.iter_mut().for_each(|v| *v = ops::sigmoid(*v));
        Ok(Tape {
            enc,
            pool_args,
            bottleneck,
            up_inputs,
            up_widths,
            dec,
            probs,
        })
    }

    fn conv_back(
        &self,
        c: &Conv,
        x: &Tensor,
        dy: &Tensor,
        grads: &mut Gradients,
        need_dx: bool,
    ) -> Option<Tensor> {
        let (dx, dw, db) = ops::conv2d_backward(x, self.p(c.w), dy, c.k, c.b.is_some(), need_dx);
        add(&mut grads[c.w], &dw);
        if let (Some(b), Some(db)) = (c.b, db) {
            add(&mut grads[b], &db);
        }
        dx
    }

    fn bn_back(&self, n: &Bn, cache: &BnCache, dy: &Tensor, grads: &mut Gradients) -> Tensor {
        let (dx, dg, db) = ops::batch_norm_backward(dy, self.p(n.gamma), cache);
        add(&mut grads[n.gamma], &dg);
        add(&mut grads[n.beta], &db);
        dx
    }

    fn block_back(
        &self,
        b: &Block,
        c: &BlockCache,
        mut d: Tensor,
        grads: &mut Gradients,
        need_dx: bool,
    ) -> Option<Tensor> {
        ops::relu_backward_inplace(&mut d, &c.a2);
        let d = self.bn_back(&b.n2, &c.bn2, &d, grads);
        let mut d = self
            .conv_back(&b.c2, &c.a1, &d, grads, true)
            .expect("dx requested");
        ops::relu_backward_inplace(&mut d, &c.a1);
        let d = self.bn_back(&b.n1, &c.bn1, &d, grads);
        self.conv_back(&b.c1, &c.x, &d, grads, need_dx)
    }

    /// Accumulate parameter gradients given `dL/dprobabilities`.
    pub fn backward(&self, tape: &Tape, dprobs: &Tensor, grads: &mut Gradients) {
        let mut dz = dprobs.clone();
        dz.data
            .iter_mut()
            .zip(&tape.probs.data)
            .for_each(|(d, &p)| *d *= p * (1.0 - p));
        let mut d = self
            .conv_back(&self.head, &tape.dec[3].a2, &dz, grads, true)
            .expect("dx requested");
        let mut skip_grads: Vec<Option<Tensor>> = vec![None, None, None, None];
        for k in (0..4).rev() {
            let dcat = self
                .block_back(&self.dec[k], &tape.dec[k], d, grads, true)
                .expect("dx requested");
            let (du, dskip) = ops::split(&dcat, tape.up_widths[k]);
            skip_grads[3 - k] = Some(dskip);
            let du_in = self
                .conv_back(&self.up[k], &tape.up_inputs[k], &du, grads, true)
                .expect("dx requested");
            d = ops::upsample2_backward(&du_in);
        }
        d = self
            .block_back(&self.bottleneck, &tape.bottleneck, d, grads, true)
            .expect("dx requested");
        for i in (0..5).rev() {
            if i < 4 {
                let (arg, shape) = &tape.pool_args[i];
                let mut from_pool = ops::max_pool2_backward(&d, arg, *shape);
                let skip = skip_grads[i].take().expect("skip gradient");
                add(&mut from_pool.data, &skip.data);
                d = from_pool;
            }
            match self.block_back(&self.enc[i], &tape.enc[i], d, grads, i > 0) {
                Some(dx) => d = dx,
                None => break,
            }
        }
    }
}

fn add(dst: &mut [f32], src: &[f32]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
}
