use super::ModelError;
use crate::numerics::{Graph, ParamStore, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvKind {
    Dense,
    Depthwise,
    Transposed,
}

/// One convolution with bias and an optional trailing relu.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub name: String,
    pub kind: ConvKind,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub relu: bool,
}

impl ConvSpec {
    pub fn weight_shape(&self) -> [usize; 4] {
        match self.kind {
            ConvKind::Dense => [self.c_out, self.c_in, self.k, self.k],
            ConvKind::Depthwise => [self.c_out, 1, self.k, self.k],
            ConvKind::Transposed => [self.c_in, self.c_out, self.k, self.k],
        }
    }

    pub fn params(&self) -> u64 {
        self.weight_shape().iter().product::<usize>() as u64 + self.c_out as u64
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let (k, s, p) = (self.k, self.stride, self.pad);
        match self.kind {
            ConvKind::Transposed => {
                let o = |n: usize| ((n - 1) * s + k).checked_sub(2 * p).filter(|&v| v > 0);
                Some((o(h)?, o(w)?))
            }
            _ => {
                let o = |n: usize| (n + 2 * p).checked_sub(k).map(|v| v / s + 1);
                Some((o(h)?, o(w)?))
            }
        }
    }

    /// Multiply-adds ×2, plus one op per output element for the relu.
    pub fn flops(&self, h_in: usize, w_in: usize) -> Option<u64> {
        let (h, w) = self.output_hw(h_in, w_in)?;
        let kk = (self.k * self.k) as u64;
        let macs = match self.kind {
            ConvKind::Dense => kk * self.c_in as u64 * self.c_out as u64 * (h * w) as u64,
            ConvKind::Depthwise => kk * self.c_out as u64 * (h * w) as u64,
            ConvKind::Transposed => kk * self.c_in as u64 * self.c_out as u64 * (h_in * w_in) as u64,
        };
        let act = if self.relu { (self.c_out * h * w) as u64 } else { 0 };
        Some(2 * macs + act)
    }

    fn fan_in(&self) -> f64 {
        let kk = (self.k * self.k) as f64;
        match self.kind {
            ConvKind::Dense => self.c_in as f64 * kk,
            ConvKind::Depthwise => kk,
            ConvKind::Transposed => self.c_in as f64 * kk / (self.stride * self.stride) as f64,
        }
    }

    fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var, ModelError> {
        let wname = format!("{}.weight", self.name);
        let bname = format!("{}.bias", self.name);
        let w = g.param_by_name(store, &wname)?;
        let b = g.param_by_name(store, &bname)?;
        let y = match self.kind {
            ConvKind::Dense => g.conv2d(x, w, Some(b), self.stride, self.pad)?,
            ConvKind::Depthwise => g.depthwise_conv2d(x, w, Some(b), self.stride, self.pad)?,
            ConvKind::Transposed => g.conv_transpose2d(x, w, Some(b), self.stride, self.pad)?,
        };
        Ok(if self.relu { g.relu(y) } else { y })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    Plain(ConvSpec),
    /// Expand, depthwise, project; identity shortcut when `residual`.
    Bottleneck {
        expand: ConvSpec,
        depthwise: ConvSpec,
        project: ConvSpec,
        residual: bool,
    },
}

impl Block {
    pub fn convs(&self) -> Vec<&ConvSpec> {
        match self {
            Block::Plain(c) => vec![c],
            Block::Bottleneck { expand, depthwise, project, .. } => vec![expand, depthwise, project],
        }
    }
}

/// Feed-forward stack of blocks over a C×H×W input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub in_channels: usize,
    pub blocks: Vec<Block>,
}

impl Architecture {
    pub fn empty(in_channels: usize) -> Self {
        Self { in_channels, blocks: Vec::new() }
    }

    pub fn convs(&self) -> impl Iterator<Item = &ConvSpec> {
        self.blocks.iter().flat_map(Block::convs)
    }

    pub fn param_names(&self) -> Vec<String> {
        self.convs().flat_map(|c| [format!("{}.weight", c.name), format!("{}.bias", c.name)]).collect()
    }

    pub fn count_params(&self) -> u64 {
        self.convs().map(ConvSpec::params).sum()
    }

    pub fn output_shape(&self, input: [usize; 3]) -> Result<[usize; 3], ModelError> {
        self.trace(input).map(|(shape, _)| shape)
    }

    pub fn count_flops(&self, input: [usize; 3]) -> Result<u64, ModelError> {
        self.trace(input).map(|(_, f)| f)
    }

    fn trace(&self, input: [usize; 3]) -> Result<([usize; 3], u64), ModelError> {
        let [mut c, mut h, mut w] = input;
        if c != self.in_channels {
            return Err(ModelError::Dimension(format!("expected {} input channels, got {c}", self.in_channels)));
        }
        let mut flops = 0;
        for conv in self.convs() {
            if conv.c_in != c {
                return Err(ModelError::Dimension(format!("{} expects {} channels, got {c}", conv.name, conv.c_in)));
            }
            flops += conv
                .flops(h, w)
                .ok_or_else(|| ModelError::Dimension(format!("{} cannot consume a {h}x{w} input", conv.name)))?;
            (h, w) = conv.output_hw(h, w).unwrap();
            c = conv.c_out;
        }
        flops += self.residual_adds(input)?;
        Ok(([c, h, w], flops))
    }

    fn residual_adds(&self, input: [usize; 3]) -> Result<u64, ModelError> {
        let [_, mut h, mut w] = input;
        let mut adds = 0;
        for b in &self.blocks {
            for conv in b.convs() {
                (h, w) = conv.output_hw(h, w).ok_or_else(|| ModelError::Dimension(conv.name.clone()))?;
            }
            if let Block::Bottleneck { residual: true, project, .. } = b {
                adds += (project.c_out * h * w) as u64;
            }
        }
        Ok(adds)
    }

    /// Kaiming-normal weights (gain √2 before a relu, 1 otherwise) and zero
    /// biases, drawn in layer order from one seeded stream.
    pub fn init_params(&self, store: &mut ParamStore, seed: u64) -> Result<(), ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in self.convs() {
            let gain = if c.relu { 2.0 } else { 1.0 };
            let n = Normal::new(0.0, (gain / c.fan_in()).sqrt()).unwrap();
            let shape = c.weight_shape();
            let w = Tensor::from_fn(&shape, |_| n.sample(&mut rng));
            store.insert(&format!("{}.weight", c.name), w)?;
            store.insert(&format!("{}.bias", c.name), Tensor::zeros(&[c.c_out]))?;
        }
        Ok(())
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var, ModelError> {
        let mut h = x;
        for b in &self.blocks {
            h = match b {
                Block::Plain(c) => c.forward(g, store, h)?,
                Block::Bottleneck { expand, depthwise, project, residual } => {
                    let e = expand.forward(g, store, h)?;
                    let d = depthwise.forward(g, store, e)?;
                    let p = project.forward(g, store, d)?;
                    if *residual {
                        g.add(p, h)?
                    } else {
                        p
                    }
                }
            };
        }
        Ok(h)
    }
}
