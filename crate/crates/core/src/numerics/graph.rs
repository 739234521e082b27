//! Reverse-mode automatic differentiation over a single-use tape.
//!
//! A [`Graph`] records every operation applied during one forward pass.
//! Leaves are either constants, tracked tensors, or parameters borrowed by
//! value from a [`ParamStore`]. [`Graph::backward`] walks the tape in reverse
//! and accumulates into the store's gradient buffers.

use super::conv::{self, Window};
use super::{NumericsError, ParamId, ParamStore, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    Conv {
        x: Var,
        kernel: Var,
        bias: Option<Var>,
        c_in: usize,
        c_out: usize,
        win: Window,
        cols: Option<Vec<f64>>,
    },
    Depthwise {
        x: Var,
        kernel: Var,
        bias: Option<Var>,
        channels: usize,
        win: Window,
    },
    ConvTranspose {
        x: Var,
        kernel: Var,
        bias: Option<Var>,
        c_in: usize,
        c_out: usize,
        win: Window,
    },
    Combine {
        a: Var,
        ca: f64,
        b: Var,
        cb: f64,
    },
    ChannelAffine {
        x: Var,
        scale: Var,
        shift: Var,
        channels: usize,
    },
    /// Elementwise map with the local derivative stored at forward time.
    Map {
        x: Var,
        deriv: Vec<f64>,
    },
    Mean(Var),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
    param: Option<ParamId>,
}

/// Gradients of one backward pass, indexed by node.
pub struct Grads {
    grads: Vec<Option<Vec<f64>>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Constant leaf; never receives a gradient.
    pub fn input(&mut self, t: Tensor) -> Var {
        let mut t = t;
        t.set_requires_grad(false);
        self.push(t, Op::Leaf, false)
    }

    /// Leaf whose gradient is reported by [`Graph::grads`].
    pub fn tracked(&mut self, t: Tensor) -> Var {
        let mut t = t;
        t.set_requires_grad(true);
        self.push(t, Op::Leaf, true)
    }

    /// Parameter leaf. Frozen parameters enter as constants.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let src = store.get(id);
        let mut value = Tensor::new(src.shape(), src.data().to_vec()).unwrap();
        let needs_grad = src.requires_grad();
        value.set_requires_grad(needs_grad);
        let v = self.push(value, Op::Leaf, needs_grad);
        self.nodes[v.0].param = Some(id);
        v
    }

    pub fn param_by_name(&mut self, store: &ParamStore, name: &str) -> Result<Var, NumericsError> {
        let id = store
            .id(name)
            .ok_or_else(|| NumericsError::Contract(format!("unknown parameter `{name}`")))?;
        Ok(self.param(store, id))
    }

    fn chw(&self, v: Var, what: &str) -> Result<(usize, usize, usize), NumericsError> {
        match *self.shape(v) {
            [c, h, w] => Ok((c, h, w)),
            ref s => Err(NumericsError::Dimension(format!("{what}: expected C×H×W, got {s:?}"))),
        }
    }

    fn kernel4(&self, v: Var) -> Result<[usize; 4], NumericsError> {
        match *self.shape(v) {
            [a, b, c, d] if c == d => Ok([a, b, c, d]),
            ref s => Err(NumericsError::Dimension(format!(
                "kernel must be 4-D with square spatial extent, got {s:?}"
            ))),
        }
    }

    fn check_bias(&self, bias: Option<Var>, channels: usize) -> Result<(), NumericsError> {
        if let Some(b) = bias {
            if self.value(b).len() != channels {
                return Err(NumericsError::Dimension(format!(
                    "bias has {} entries, expected {channels}",
                    self.value(b).len()
                )));
            }
        }
        Ok(())
    }

    fn any_ng(&self, vars: &[Option<Var>]) -> bool {
        vars.iter().flatten().any(|&v| self.ng(v))
    }

    /// Dense 2-D convolution of a C_in×H×W input with a C_out×C_in×k×k kernel.
    pub fn conv2d(&mut self, x: Var, kernel: Var, bias: Option<Var>, stride: usize, pad: usize) -> Result<Var, NumericsError> {
        let (c_in, h, w) = self.chw(x, "conv2d input")?;
        let [c_out, kc, k, _] = self.kernel4(kernel)?;
        if kc != c_in {
            return Err(NumericsError::Dimension(format!(
                "conv2d: kernel expects {kc} input channels, input has {c_in}"
            )));
        }
        self.check_bias(bias, c_out)?;
        let win = Window::forward(h, w, k, stride, pad).ok_or_else(|| {
            NumericsError::Dimension(format!("conv2d: kernel {k} (stride {stride}, pad {pad}) does not fit {h}×{w}"))
        })?;
        let (out, cols) = conv::conv_forward(
            self.value(x).data(),
            c_in,
            self.value(kernel).data(),
            c_out,
            bias.map(|b| self.value(b).data()),
            &win,
        );
        let ng = self.any_ng(&[Some(x), Some(kernel), bias]);
        // The patch matrix is only needed for the kernel gradient.
        let cols = if self.ng(kernel) { cols } else { None };
        let value = Tensor::new(&[c_out, win.h_out, win.w_out], out)?;
        Ok(self.push(value, Op::Conv { x, kernel, bias, c_in, c_out, win, cols }, ng))
    }

    /// Depthwise convolution; kernel is C×1×k×k.
    pub fn depthwise_conv2d(&mut self, x: Var, kernel: Var, bias: Option<Var>, stride: usize, pad: usize) -> Result<Var, NumericsError> {
        let (c, h, w) = self.chw(x, "depthwise input")?;
        let [kc, one, k, _] = self.kernel4(kernel)?;
        if kc != c || one != 1 {
            return Err(NumericsError::Dimension(format!(
                "depthwise: kernel shape {:?} does not match {c} channels",
                self.shape(kernel)
            )));
        }
        self.check_bias(bias, c)?;
        let win = Window::forward(h, w, k, stride, pad).ok_or_else(|| {
            NumericsError::Dimension(format!("depthwise: kernel {k} does not fit {h}×{w}"))
        })?;
        let out = conv::depthwise_forward(
            self.value(x).data(),
            c,
            self.value(kernel).data(),
            bias.map(|b| self.value(b).data()),
            &win,
        );
        let ng = self.any_ng(&[Some(x), Some(kernel), bias]);
        let value = Tensor::new(&[c, win.h_out, win.w_out], out)?;
        Ok(self.push(value, Op::Depthwise { x, kernel, bias, channels: c, win }, ng))
    }

    /// Transposed convolution; kernel is C_in×C_out×k×k.
    pub fn conv_transpose2d(&mut self, x: Var, kernel: Var, bias: Option<Var>, stride: usize, pad: usize) -> Result<Var, NumericsError> {
        let (c_in, h, w) = self.chw(x, "conv_transpose2d input")?;
        let [kc, c_out, k, _] = self.kernel4(kernel)?;
        if kc != c_in {
            return Err(NumericsError::Dimension(format!(
                "conv_transpose2d: kernel expects {kc} input channels, input has {c_in}"
            )));
        }
        self.check_bias(bias, c_out)?;
        let win = Window::transposed(h, w, k, stride, pad)
            .ok_or_else(|| NumericsError::Dimension("conv_transpose2d: empty output".into()))?;
        let out = conv::conv_transpose_forward(
            self.value(x).data(),
            c_in,
            self.value(kernel).data(),
            c_out,
            bias.map(|b| self.value(b).data()),
            &win,
        );
        let ng = self.any_ng(&[Some(x), Some(kernel), bias]);
        let value = Tensor::new(&[c_out, win.h, win.w], out)?;
        Ok(self.push(value, Op::ConvTranspose { x, kernel, bias, c_in, c_out, win }, ng))
    }

    /// `ca·a + cb·b`, elementwise over equal shapes.
    pub fn combine(&mut self, a: Var, ca: f64, b: Var, cb: f64) -> Result<Var, NumericsError> {
        if self.shape(a) != self.shape(b) {
            return Err(NumericsError::Dimension(format!(
                "combine: shapes {:?} and {:?} differ",
                self.shape(a),
                self.shape(b)
            )));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| ca * x + cb * y)
            .collect();
        let value = Tensor::new(self.shape(a), data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Combine { a, ca, b, cb }, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.combine(a, 1.0, b, 1.0)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.combine(a, 1.0, b, -1.0)
    }

    /// Per-channel `scale[c]·x + shift[c]` on a C×H×W tensor.
    pub fn channel_affine(&mut self, x: Var, scale: Var, shift: Var) -> Result<Var, NumericsError> {
        let (c, h, w) = self.chw(x, "channel_affine input")?;
        if self.value(scale).len() != c || self.value(shift).len() != c {
            return Err(NumericsError::Dimension(format!(
                "channel_affine: scale/shift must have {c} entries"
            )));
        }
        let plane = h * w;
        let s = self.value(scale).data();
        let t = self.value(shift).data();
        let data = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| s[i / plane] * v + t[i / plane])
            .collect();
        let value = Tensor::new(&[c, h, w], data)?;
        let ng = self.ng(x) || self.ng(scale) || self.ng(shift);
        Ok(self.push(value, Op::ChannelAffine { x, scale, shift, channels: c }, ng))
    }

    /// Elementwise map; `f` returns `(value, derivative)` at each input.
    pub fn map(&mut self, x: Var, f: impl Fn(f64) -> (f64, f64)) -> Var {
        let (vals, deriv): (Vec<f64>, Vec<f64>) = self.value(x).data().iter().map(|&v| f(v)).unzip();
        let value = Tensor::new(self.shape(x), vals).unwrap();
        let ng = self.ng(x);
        self.push(value, Op::Map { x, deriv: if ng { deriv } else { Vec::new() } }, ng)
    }

    /// Elementwise map against a same-length constant buffer (e.g. targets).
    pub fn map_with(&mut self, x: Var, aux: &[f64], f: impl Fn(f64, f64) -> (f64, f64)) -> Result<Var, NumericsError> {
        if aux.len() != self.value(x).len() {
            return Err(NumericsError::Dimension(format!(
                "map_with: {} auxiliary values for {} elements",
                aux.len(),
                self.value(x).len()
            )));
        }
        let (vals, deriv): (Vec<f64>, Vec<f64>) = self
            .value(x)
            .data()
            .iter()
            .zip(aux)
            .map(|(&v, &a)| f(v, a))
            .unzip();
        let value = Tensor::new(self.shape(x), vals)?;
        let ng = self.ng(x);
        Ok(self.push(value, Op::Map { x, deriv: if ng { deriv } else { Vec::new() } }, ng))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, |v| if v > 0.0 { (v, 1.0) } else { (0.0, 0.0) })
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.map(x, |v| (v.abs(), if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 }))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.map(x, |v| (c * v, c))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        let ng = self.ng(x);
        self.push(Tensor::scalar(m), Op::Mean(x), ng)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum::<f64>();
        let ng = self.ng(x);
        self.push(Tensor::scalar(s), Op::Sum(x), ng)
    }

    /// Gradients of scalar `loss` w.r.t. every node that needs one.
    pub fn grads(&self, loss: Var) -> Result<Grads, NumericsError> {
        if !self.value(loss).is_scalar() {
            return Err(NumericsError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
                continue;
            }
            let mut send = |v: Var, delta: Vec<f64>| accumulate(&mut grads[v.0], delta);
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Conv { x, kernel, bias, c_in, c_out, win, cols } => {
                    if let Some(b) = bias.filter(|b| self.ng(*b)) {
                        send(b, conv::channel_sums(&g, *c_out, win.out_len()));
                    }
                    if self.ng(*kernel) {
                        let patches = cols.as_deref().unwrap_or(self.value(*x).data());
                        send(*kernel, conv::conv_backward_kernel(&g, patches, *c_in, *c_out, win));
                    }
                    if self.ng(*x) {
                        let k = self.value(*kernel).data();
                        send(*x, conv::conv_backward_input(&g, k, *c_in, *c_out, win));
                    }
                }
                Op::Depthwise { x, kernel, bias, channels, win } => {
                    if let Some(b) = bias.filter(|b| self.ng(*b)) {
                        send(b, conv::channel_sums(&g, *channels, win.out_len()));
                    }
                    let (dx, dk) = conv::depthwise_backward(
                        &g,
                        self.value(*x).data(),
                        *channels,
                        self.value(*kernel).data(),
                        win,
                        self.ng(*x),
                        self.ng(*kernel),
                    );
                    if let Some(dk) = dk {
                        send(*kernel, dk);
                    }
                    if let Some(dx) = dx {
                        send(*x, dx);
                    }
                }
                Op::ConvTranspose { x, kernel, bias, c_in, c_out, win } => {
                    if let Some(b) = bias.filter(|b| self.ng(*b)) {
                        send(b, conv::channel_sums(&g, *c_out, win.h * win.w));
                    }
                    let dcols = conv::conv_transpose_unfold(&g, *c_out, win);
                    if self.ng(*kernel) {
                        let xv = self.value(*x).data();
                        send(*kernel, conv::conv_transpose_backward_kernel(xv, &dcols, *c_in, *c_out, win));
                    }
                    if self.ng(*x) {
                        let k = self.value(*kernel).data();
                        send(*x, conv::conv_transpose_backward_input(&dcols, k, *c_in, *c_out, win));
                    }
                }
                Op::Combine { a, ca, b, cb } => {
                    if self.ng(*a) {
                        send(*a, g.iter().map(|v| ca * v).collect());
                    }
                    if self.ng(*b) {
                        send(*b, g.iter().map(|v| cb * v).collect());
                    }
                }
                Op::ChannelAffine { x, scale, shift, channels } => {
                    let plane = g.len() / channels;
                    if self.ng(*shift) {
                        send(*shift, conv::channel_sums(&g, *channels, plane));
                    }
                    if self.ng(*scale) {
                        let xv = self.value(*x).data();
                        let ds = (0..*channels)
                            .map(|c| {
                                let r = c * plane..(c + 1) * plane;
                                g[r.clone()].iter().zip(&xv[r]).map(|(a, b)| a * b).sum()
                            })
                            .collect();
                        send(*scale, ds);
                    }
                    if self.ng(*x) {
                        let s = self.value(*scale).data();
                        send(*x, g.iter().enumerate().map(|(i, v)| s[i / plane] * v).collect());
                    }
                }
                Op::Map { x, deriv } => {
                    send(*x, g.iter().zip(deriv).map(|(a, b)| a * b).collect());
                }
                Op::Mean(x) => {
                    let n = self.value(*x).len();
                    send(*x, vec![g[0] / n as f64; n]);
                }
                Op::Sum(x) => {
                    let n = self.value(*x).len();
                    send(*x, vec![g[0]; n]);
                }
            }
        }
        // Keep only leaf gradients.
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !matches!(node.op, Op::Leaf) {
                *g = None;
            }
        }
        Ok(Grads { grads })
    }

    /// Runs [`Graph::grads`] and adds parameter gradients into `store`.
    /// Repeated calls accumulate; zero the store between batches.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<(), NumericsError> {
        let grads = self.grads(loss)?;
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Some(id), Some(g)) = (node.param, grads.grads[i].as_deref()) {
                store.get_mut(id).accumulate_grad(g);
            }
        }
        Ok(())
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, delta: Vec<f64>) {
    match slot {
        Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, b)| *a += b),
        None => *slot = Some(delta),
    }
}
