//! Convolution kernels on raw row-major buffers.
//!
//! Dense and transposed convolutions lower to im2col + GEMM; depthwise
//! convolution uses direct loops since it has no channel reduction.

/// Spatial geometry of a strided, zero-padded sliding window.
///
/// `h`/`w` describe the larger ("image") grid and `h_out`/`w_out` the window
/// grid. For a transposed convolution the roles flip: the image grid is the
/// output and the window grid is the input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl Window {
    /// Window grid for a forward convolution over an `h`×`w` image.
    pub fn forward(h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Option<Self> {
        if stride == 0 || k == 0 || k > h + 2 * pad || k > w + 2 * pad {
            return None;
        }
        Some(Self {
            h,
            w,
            k,
            stride,
            pad,
            h_out: (h + 2 * pad - k) / stride + 1,
            w_out: (w + 2 * pad - k) / stride + 1,
        })
    }

    /// Image grid produced by a transposed convolution over an `h_in`×`w_in` input.
    pub fn transposed(h_in: usize, w_in: usize, k: usize, stride: usize, pad: usize) -> Option<Self> {
        if stride == 0 || k == 0 {
            return None;
        }
        let h = ((h_in - 1) * stride + k).checked_sub(2 * pad)?;
        let w = ((w_in - 1) * stride + k).checked_sub(2 * pad)?;
        if h == 0 || w == 0 {
            return None;
        }
        Some(Self {
            h,
            w,
            k,
            stride,
            pad,
            h_out: h_in,
            w_out: w_in,
        })
    }

    pub fn out_len(&self) -> usize {
        self.h_out * self.w_out
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }
}

/// `c = alpha * op(a) * op(b) + beta * c` for row-major matrices, `c` is m×n.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slice lengths were checked above against the stated dimensions
    // and strides, so every index matrixmultiply touches is in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfolds `channels`×h×w into a (channels·k·k)×(h_out·w_out) patch matrix.
pub fn im2col(src: &[f64], channels: usize, g: &Window) -> Vec<f64> {
    let n = g.out_len();
    let mut cols = vec![0.0; channels * g.k * g.k * n];
    for c in 0..channels {
        let plane = &src[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oh in 0..g.h_out {
                    let ih = (oh * g.stride + ki) as isize - g.pad as isize;
                    if ih < 0 || ih >= g.h as isize {
                        continue;
                    }
                    let src_row = &plane[ih as usize * g.w..(ih as usize + 1) * g.w];
                    let dst_row = &mut dst[oh * g.w_out..(oh + 1) * g.w_out];
                    for (ow, d) in dst_row.iter_mut().enumerate() {
                        let iw = (ow * g.stride + kj) as isize - g.pad as isize;
                        if iw >= 0 && (iw as usize) < g.w {
                            *d = src_row[iw as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch columns back onto the image grid, accumulating.
pub fn col2im(cols: &[f64], channels: usize, g: &Window, dst: &mut [f64]) {
    let n = g.out_len();
    debug_assert_eq!(cols.len(), channels * g.k * g.k * n);
    debug_assert_eq!(dst.len(), channels * g.h * g.w);
    for c in 0..channels {
        let plane = &mut dst[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let src = &cols[row * n..(row + 1) * n];
                for oh in 0..g.h_out {
                    let ih = (oh * g.stride + ki) as isize - g.pad as isize;
                    if ih < 0 || ih >= g.h as isize {
                        continue;
                    }
                    let base = ih as usize * g.w;
                    let src_row = &src[oh * g.w_out..(oh + 1) * g.w_out];
                    for (ow, s) in src_row.iter().enumerate() {
                        let iw = (ow * g.stride + kj) as isize - g.pad as isize;
                        if iw >= 0 && (iw as usize) < g.w {
                            plane[base + iw as usize] += s;
                        }
                    }
                }
            }
        }
    }
}

/// Dense convolution forward. Returns the output and, unless the kernel is
/// pointwise, the patch matrix needed for the kernel gradient.
pub fn conv_forward(
    x: &[f64],
    c_in: usize,
    kernel: &[f64],
    c_out: usize,
    bias: Option<&[f64]>,
    g: &Window,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = g.out_len();
    let kk = c_in * g.k * g.k;
    let mut out = vec![0.0; c_out * n];
    add_bias(&mut out, bias, n);
    let beta = if bias.is_some() { 1.0 } else { 0.0 };
    if g.is_pointwise() {
        gemm(c_out, kk, n, kernel, false, x, false, beta, &mut out);
        (out, None)
    } else {
        let cols = im2col(x, c_in, g);
        gemm(c_out, kk, n, kernel, false, &cols, false, beta, &mut out);
        (out, Some(cols))
    }
}

/// Gradient of a dense convolution w.r.t. its input.
pub fn conv_backward_input(dout: &[f64], kernel: &[f64], c_in: usize, c_out: usize, g: &Window) -> Vec<f64> {
    let n = g.out_len();
    let kk = c_in * g.k * g.k;
    if g.is_pointwise() {
        let mut dx = vec![0.0; kk * n];
        gemm(kk, c_out, n, kernel, true, dout, false, 0.0, &mut dx);
        return dx;
    }
    let mut dcols = vec![0.0; kk * n];
    gemm(kk, c_out, n, kernel, true, dout, false, 0.0, &mut dcols);
    let mut dx = vec![0.0; c_in * g.h * g.w];
    col2im(&dcols, c_in, g, &mut dx);
    dx
}

/// Gradient of a dense convolution w.r.t. its kernel. `cols` is the patch
/// matrix from the forward pass, or the input itself for pointwise kernels.
pub fn conv_backward_kernel(dout: &[f64], cols: &[f64], c_in: usize, c_out: usize, g: &Window) -> Vec<f64> {
    let n = g.out_len();
    let kk = c_in * g.k * g.k;
    let mut dk = vec![0.0; c_out * kk];
    gemm(c_out, n, kk, dout, false, cols, true, 0.0, &mut dk);
    dk
}

/// Transposed convolution forward. `kernel` is c_in×c_out×k×k; `g` is the
/// window whose image grid is the output.
pub fn conv_transpose_forward(
    x: &[f64],
    c_in: usize,
    kernel: &[f64],
    c_out: usize,
    bias: Option<&[f64]>,
    g: &Window,
) -> Vec<f64> {
    let n = g.out_len();
    let kk = c_out * g.k * g.k;
    let mut cols = vec![0.0; kk * n];
    gemm(kk, c_in, n, kernel, true, x, false, 0.0, &mut cols);
    let mut out = vec![0.0; c_out * g.h * g.w];
    add_bias(&mut out, bias, g.h * g.w);
    col2im(&cols, c_out, g, &mut out);
    out
}

/// Transposed convolution backward; returns the unfolded output gradient so
/// input and kernel gradients can share it.
pub fn conv_transpose_unfold(dout: &[f64], c_out: usize, g: &Window) -> Vec<f64> {
    im2col(dout, c_out, g)
}

pub fn conv_transpose_backward_input(dcols: &[f64], kernel: &[f64], c_in: usize, c_out: usize, g: &Window) -> Vec<f64> {
    let n = g.out_len();
    let kk = c_out * g.k * g.k;
    let mut dx = vec![0.0; c_in * n];
    gemm(c_in, kk, n, kernel, false, dcols, false, 0.0, &mut dx);
    dx
}

pub fn conv_transpose_backward_kernel(x: &[f64], dcols: &[f64], c_in: usize, c_out: usize, g: &Window) -> Vec<f64> {
    let n = g.out_len();
    let kk = c_out * g.k * g.k;
    let mut dk = vec![0.0; c_in * kk];
    gemm(c_in, n, kk, x, false, dcols, true, 0.0, &mut dk);
    dk
}

/// Depthwise convolution forward; `kernel` is c×1×k×k.
pub fn depthwise_forward(x: &[f64], channels: usize, kernel: &[f64], bias: Option<&[f64]>, g: &Window) -> Vec<f64> {
    let n = g.out_len();
    let mut out = vec![0.0; channels * n];
    add_bias(&mut out, bias, n);
    for c in 0..channels {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        let kern = &kernel[c * g.k * g.k..(c + 1) * g.k * g.k];
        let dst = &mut out[c * n..(c + 1) * n];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let wv = kern[ki * g.k + kj];
                for oh in 0..g.h_out {
                    let ih = (oh * g.stride + ki) as isize - g.pad as isize;
                    if ih < 0 || ih >= g.h as isize {
                        continue;
                    }
                    let src_row = &plane[ih as usize * g.w..(ih as usize + 1) * g.w];
                    let dst_row = &mut dst[oh * g.w_out..(oh + 1) * g.w_out];
                    for (ow, d) in dst_row.iter_mut().enumerate() {
                        let iw = (ow * g.stride + kj) as isize - g.pad as isize;
                        if iw >= 0 && (iw as usize) < g.w {
                            *d += wv * src_row[iw as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Depthwise convolution backward: `(d_input, d_kernel)`; either side is
/// skipped when not requested.
pub fn depthwise_backward(
    dout: &[f64],
    x: &[f64],
    channels: usize,
    kernel: &[f64],
    g: &Window,
    want_input: bool,
    want_kernel: bool,
) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
    let n = g.out_len();
    let mut dx = want_input.then(|| vec![0.0; channels * g.h * g.w]);
    let mut dk = want_kernel.then(|| vec![0.0; channels * g.k * g.k]);
    for c in 0..channels {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        let kern = &kernel[c * g.k * g.k..(c + 1) * g.k * g.k];
        let grad = &dout[c * n..(c + 1) * n];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let wv = kern[ki * g.k + kj];
                let mut acc = 0.0;
                for oh in 0..g.h_out {
                    let ih = (oh * g.stride + ki) as isize - g.pad as isize;
                    if ih < 0 || ih >= g.h as isize {
                        continue;
                    }
                    let row_off = c * g.h * g.w + ih as usize * g.w;
                    for ow in 0..g.w_out {
                        let iw = (ow * g.stride + kj) as isize - g.pad as isize;
                        if iw < 0 || iw as usize >= g.w {
                            continue;
                        }
                        let go = grad[oh * g.w_out + ow];
                        if let Some(dx) = dx.as_mut() {
                            dx[row_off + iw as usize] += wv * go;
                        }
                        acc += go * plane[ih as usize * g.w + iw as usize];
                    }
                }
                if let Some(dk) = dk.as_mut() {
                    dk[(c * g.k + ki) * g.k + kj] += acc;
                }
            }
        }
    }
    (dx, dk)
}

/// Per-channel sums of a channels×plane buffer (the bias gradient).
pub fn channel_sums(dout: &[f64], channels: usize, plane: usize) -> Vec<f64> {
    (0..channels)
        .map(|c| dout[c * plane..(c + 1) * plane].iter().sum())
        .collect()
}

/// Fills each channel plane of `out` with its bias.
fn add_bias(out: &mut [f64], bias: Option<&[f64]>, plane: usize) {
    if let Some(b) = bias {
        for (c, chunk) in out.chunks_mut(plane).enumerate() {
            chunk.iter_mut().for_each(|v| *v = b[c]);
        }
    }
}

/// Bilinear resampling of one channel to `out_h`×`out_w` using pixel-center
/// alignment. Not differentiable; used for preprocessing only.
pub fn resize_bilinear(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let mut out = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        let y = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = y - y0 as f64;
        for ox in 0..out_w {
            let x = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = x.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = x - x0 as f64;
            let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
            let bot = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}
