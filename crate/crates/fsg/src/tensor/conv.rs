//! 2-D convolution (cross-correlation) with stride, zero padding, and
//! dilation, plus its three gradients.
//!
//! The stride-1 path — the only one the grasp network uses — is an
//! implicit-GEMM formulation: each input plane is copied once into a
//! zero-padded buffer, and the microkernel then consumes *shifted row
//! segments* of that buffer as if they were rows of an im2col matrix, without
//! ever materializing one (for an 11×11 kernel over 300×300 that matrix
//! would be ~121× the input). A 4×64 register-tile kernel accumulates four
//! output channels over 64 consecutive output pixels; the backward-data pass
//! reuses the same kernel by rewriting itself as a forward convolution with
//! channel-swapped, 180°-rotated weights, and the backward-weights pass runs
//! dot-product tiles of output-gradient rows against shifted padded-input
//! segments. Strided convolutions fall back to a direct loop (correct, slow,
//! unused by the network).
//!
//! Everything is generic over [`Scalar`]; `f64` spills registers but is only
//! used by gradient-check tests on tiny tensors.

use super::{Scalar, Tensor};
use crate::error::{FsgError, FsgResult};

/// Geometry of one convolution: square kernel, symmetric zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvSpec {
    pub fn new(kernel_size: usize, stride: usize, padding: usize, dilation: usize) -> FsgResult<Self> {
        if kernel_size == 0 {
            return Err(FsgError::param("kernel_size", "must be ≥ 1"));
        }
        if stride == 0 {
            return Err(FsgError::param("stride", "must be ≥ 1"));
        }
        if dilation == 0 {
            return Err(FsgError::param("dilation", "must be ≥ 1"));
        }
        Ok(ConvSpec {
            kernel_size,
            stride,
            padding,
            dilation,
        })
    }

    /// Stride-1 spec whose padding keeps the spatial size unchanged
    /// (requires an odd kernel).
    pub fn same(kernel_size: usize, dilation: usize) -> FsgResult<Self> {
        if kernel_size % 2 == 0 {
            return Err(FsgError::param(
                "kernel_size",
                "size-preserving padding needs an odd kernel",
            ));
        }
        ConvSpec::new(kernel_size, 1, dilation * (kernel_size - 1) / 2, dilation)
    }

    /// Effective receptive-field extent of the dilated kernel.
    #[inline]
    pub fn span(&self) -> usize {
        self.dilation * (self.kernel_size - 1) + 1
    }

    /// Output size along one spatial axis; errors when the kernel does not
    /// fit even once.
    pub fn out_size(&self, in_size: usize) -> FsgResult<usize> {
        let padded = in_size + 2 * self.padding;
        if padded < self.span() {
            return Err(FsgError::dim_ctx(
                "output size",
                "≥ 1",
                "0",
                format!(
                    "input {in_size} + 2·pad {} < kernel span {}",
                    self.padding,
                    self.span()
                ),
            ));
        }
        Ok((padded - self.span()) / self.stride + 1)
    }
}

/// Validated geometry of one conv call, shared by forward and backward.
struct ConvDims {
    n: usize,
    ci: usize,
    h: usize,
    w: usize,
    co: usize,
    k: usize,
    ho: usize,
    wo: usize,
}

fn validate<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    bias_len: usize,
    spec: &ConvSpec,
) -> FsgResult<ConvDims> {
    let [n, ci, h, w] = input.shape();
    let [co, kci, kh, kw] = kernel.shape();
    if kci != ci {
        return Err(FsgError::dim_ctx(
            "channels",
            ci,
            kci,
            "kernel input-channel count vs input channels",
        ));
    }
    if kh != spec.kernel_size || kw != spec.kernel_size {
        return Err(FsgError::dim_ctx(
            "kernel size",
            spec.kernel_size,
            format!("{kh}×{kw}"),
            "kernel tensor vs ConvSpec",
        ));
    }
    if bias_len != co {
        return Err(FsgError::dim_ctx("bias length", co, bias_len, "one bias per output channel"));
    }
    let ho = spec.out_size(h)?;
    let wo = spec.out_size(w)?;
    Ok(ConvDims {
        n,
        ci,
        h,
        w,
        co,
        k: spec.kernel_size,
        ho,
        wo,
    })
}

/// Copies one sample's planes into a zero-padded buffer of `ci` planes of
/// (h + 2p) × (w + 2p).
fn pad_sample<S: Scalar>(input: &Tensor<S>, n: usize, pad: usize, buf: &mut Vec<S>) {
    let (ci, h, w) = (input.c(), input.h(), input.w());
    let hp = h + 2 * pad;
    let wp = w + 2 * pad;
    buf.clear();
    buf.resize(ci * hp * wp, S::zero());
    for c in 0..ci {
        let src = input.plane(n, c);
        for y in 0..h {
            let d = c * hp * wp + (y + pad) * wp + pad;
            buf[d..d + w].copy_from_slice(&src[y * w..y * w + w]);
        }
    }
}

/// Per-tap offsets into a padded sample buffer for the output pixel (0,0):
/// tap (ci, ky, kx) lives at `ci·hp·wp + ky·dil·wp + kx·dil`.
fn tap_offsets(ci: usize, k: usize, dil: usize, hp: usize, wp: usize) -> Vec<usize> {
    let mut offs = Vec::with_capacity(ci * k * k);
    for c in 0..ci {
        for ky in 0..k {
            for kx in 0..k {
                offs.push(c * hp * wp + ky * dil * wp + kx * dil);
            }
        }
    }
    offs
}

const NR: usize = 64;

/// 4-output-channel × 64-pixel register tile: the throughput kernel.
/// `pix` is the flat index of output pixel (y, x) in the padded buffer, `oo`
/// the flat index of plane-relative (y, x) in `out` (which holds the whole
/// sample, one plane per output channel).
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn tile4x64<S: Scalar>(
    co: usize,
    kvol: usize,
    plane_out: usize,
    offs: &[usize],
    pix: usize,
    oo: usize,
    weights: &[S],
    bias: &[S],
    padded: &[S],
    out: &mut [S],
) {
    let b = [bias[co], bias[co + 1], bias[co + 2], bias[co + 3]];
    let mut acc = [[S::zero(); NR]; 4];
    let w0 = &weights[co * kvol..(co + 1) * kvol];
    let w1 = &weights[(co + 1) * kvol..(co + 2) * kvol];
    let w2 = &weights[(co + 2) * kvol..(co + 3) * kvol];
    let w3 = &weights[(co + 3) * kvol..(co + 4) * kvol];
    for kk in 0..kvol {
        let b0 = offs[kk] + pix;
        let brow = &padded[b0..b0 + NR];
        let (x0, x1, x2, x3) = (w0[kk], w1[kk], w2[kk], w3[kk]);
        for j in 0..NR {
            let bv = brow[j];
            acc[0][j] = x0.mul_add(bv, acc[0][j]);
            acc[1][j] = x1.mul_add(bv, acc[1][j]);
            acc[2][j] = x2.mul_add(bv, acc[2][j]);
            acc[3][j] = x3.mul_add(bv, acc[3][j]);
        }
    }
    for r in 0..4 {
        let crow = &mut out[(co + r) * plane_out + oo..(co + r) * plane_out + oo + NR];
        for j in 0..NR {
            crow[j] = acc[r][j] + b[r];
        }
    }
}

/// Same tile with a partial width (right edge of a row).
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn tile4xn<S: Scalar>(
    co: usize,
    kvol: usize,
    plane_out: usize,
    nw: usize,
    offs: &[usize],
    pix: usize,
    oo: usize,
    weights: &[S],
    bias: &[S],
    padded: &[S],
    out: &mut [S],
) {
    let b = [bias[co], bias[co + 1], bias[co + 2], bias[co + 3]];
    let mut acc = [[S::zero(); NR]; 4];
    let w0 = &weights[co * kvol..(co + 1) * kvol];
    let w1 = &weights[(co + 1) * kvol..(co + 2) * kvol];
    let w2 = &weights[(co + 2) * kvol..(co + 3) * kvol];
    let w3 = &weights[(co + 3) * kvol..(co + 4) * kvol];
    for kk in 0..kvol {
        let b0 = offs[kk] + pix;
        let brow = &padded[b0..b0 + nw];
        let (x0, x1, x2, x3) = (w0[kk], w1[kk], w2[kk], w3[kk]);
        for j in 0..nw {
            let bv = brow[j];
            acc[0][j] = x0.mul_add(bv, acc[0][j]);
            acc[1][j] = x1.mul_add(bv, acc[1][j]);
            acc[2][j] = x2.mul_add(bv, acc[2][j]);
            acc[3][j] = x3.mul_add(bv, acc[3][j]);
        }
    }
    for r in 0..4 {
        let crow = &mut out[(co + r) * plane_out + oo..(co + r) * plane_out + oo + nw];
        for j in 0..nw {
            crow[j] = acc[r][j] + b[r];
        }
    }
}

/// Single-output-channel row tile for the `co % 4` remainder.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn tile1xn<S: Scalar>(
    co: usize,
    kvol: usize,
    plane_out: usize,
    nw: usize,
    offs: &[usize],
    pix: usize,
    oo: usize,
    weights: &[S],
    bias: &[S],
    padded: &[S],
    out: &mut [S],
) {
    let mut acc = [S::zero(); NR];
    let w0 = &weights[co * kvol..(co + 1) * kvol];
    for kk in 0..kvol {
        let b0 = offs[kk] + pix;
        let brow = &padded[b0..b0 + nw];
        let x0 = w0[kk];
        for j in 0..nw {
            acc[j] = x0.mul_add(brow[j], acc[j]);
        }
    }
    let crow = &mut out[co * plane_out + oo..co * plane_out + oo + nw];
    for j in 0..nw {
        crow[j] = acc[j] + bias[co];
    }
}

/// Stride-1 forward over one padded sample; writes all `co` planes of the
/// sample's output slice. Outer loop over rows, inner over channel tiles, so
/// each padded row strip is streamed once while all filters stay cached.
#[allow(clippy::too_many_arguments)]
fn forward_sample<S: Scalar>(
    dims: &ConvDims,
    dil: usize,
    padded: &[S],
    hp: usize,
    wp: usize,
    kernel: &Tensor<S>,
    bias: &[S],
    out: &mut [S],
) {
    let kvol = dims.ci * dims.k * dims.k;
    let offs = tap_offsets(dims.ci, dims.k, dil, hp, wp);
    let weights = kernel.data();
    let plane = dims.ho * dims.wo;
    for y in 0..dims.ho {
        let mut co = 0;
        while co + 4 <= dims.co {
            let mut x = 0;
            while x < dims.wo {
                let nw = NR.min(dims.wo - x);
                let pix = y * wp + x;
                let oo = y * dims.wo + x;
                if nw == NR {
                    tile4x64(co, kvol, plane, &offs, pix, oo, weights, bias, padded, out);
                } else {
                    tile4xn(co, kvol, plane, nw, &offs, pix, oo, weights, bias, padded, out);
                }
                x += nw;
            }
            co += 4;
        }
        while co < dims.co {
            let mut x = 0;
            while x < dims.wo {
                let nw = NR.min(dims.wo - x);
                tile1xn(co, kvol, plane, nw, &offs, y * wp + x, y * dims.wo + x, weights, bias, padded, out);
                x += nw;
            }
            co += 1;
        }
    }
}

/// Dilated cross-correlation: `out[n,co,y,x] = bias[co] + Σ kernel[co,ci,ky,kx]
/// · input[n,ci,y·s + ky·d − p, x·s + kx·d − p]` (zero outside bounds).
pub fn conv2d<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    bias: &[S],
    spec: &ConvSpec,
) -> FsgResult<Tensor<S>> {
    let dims = validate(input, kernel, bias.len(), spec)?;
    let mut out = Tensor::zeros([dims.n, dims.co, dims.ho, dims.wo]);
    if spec.stride == 1 {
        let hp = dims.h + 2 * spec.padding;
        let wp = dims.w + 2 * spec.padding;
        let sample_len = dims.co * dims.ho * dims.wo;
        let mut padded = Vec::new();
        for n in 0..dims.n {
            pad_sample(input, n, spec.padding, &mut padded);
            let slab = &mut out.data_mut()[n * sample_len..(n + 1) * sample_len];
            forward_sample(&dims, spec.dilation, &padded, hp, wp, kernel, bias, slab);
        }
    } else {
        conv2d_direct(input, kernel, bias, spec, &dims, &mut out);
    }
    out.ensure_finite("conv2d")?;
    Ok(out)
}

/// Plain nested-loop convolution: the strided fallback.
fn conv2d_direct<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    bias: &[S],
    spec: &ConvSpec,
    dims: &ConvDims,
    out: &mut Tensor<S>,
) {
    let (s, p, d, k) = (spec.stride, spec.padding as isize, spec.dilation, dims.k);
    for n in 0..dims.n {
        for co in 0..dims.co {
            for y in 0..dims.ho {
                for x in 0..dims.wo {
                    let mut acc = bias[co];
                    for ci in 0..dims.ci {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (y * s + ky * d) as isize - p;
                                let ix = (x * s + kx * d) as isize - p;
                                if iy >= 0 && iy < dims.h as isize && ix >= 0 && ix < dims.w as isize {
                                    acc = kernel.at(co, ci, ky, kx).mul_add(
                                        input.at(n, ci, iy as usize, ix as usize),
                                        acc,
                                    );
                                }
                            }
                        }
                    }
                    *out.at_mut(n, co, y, x) = acc;
                }
            }
        }
    }
}

/// Gradients of [`conv2d`] w.r.t. (input, kernel, bias) for a given upstream
/// gradient. `grad_out` must have the forward output's shape.
pub fn conv2d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    spec: &ConvSpec,
    grad_out: &Tensor<S>,
) -> FsgResult<(Tensor<S>, Tensor<S>, Vec<S>)> {
    let dims = validate(input, kernel, kernel.shape()[0], spec)?;
    let expect = [dims.n, dims.co, dims.ho, dims.wo];
    if grad_out.shape() != expect {
        return Err(FsgError::dim_ctx(
            "grad shape",
            format!("{expect:?}"),
            format!("{:?}", grad_out.shape()),
            "upstream gradient vs conv output",
        ));
    }

    // ∂L/∂bias: plain per-channel reduction of the upstream gradient.
    let mut dbias = vec![S::zero(); dims.co];
    for n in 0..dims.n {
        for co in 0..dims.co {
            dbias[co] += grad_out.plane(n, co).iter().copied().sum::<S>();
        }
    }

    let (dinput, dkernel);
    if spec.stride == 1 && spec.dilation * (dims.k - 1) >= spec.padding {
        dinput = backward_data_as_forward(kernel, spec, grad_out, &dims)?;
        dkernel = backward_weights_implicit(input, spec, grad_out, &dims);
    } else {
        let (di, dk) = backward_direct(input, kernel, spec, grad_out, &dims);
        dinput = di;
        dkernel = dk;
    }
    dinput.ensure_finite("conv2d_backward (input grad)")?;
    dkernel.ensure_finite("conv2d_backward (kernel grad)")?;
    if !dbias.iter().all(|v| v.is_finite()) {
        return Err(FsgError::NonFinite {
            op: "conv2d_backward (bias grad)",
        });
    }
    Ok((dinput, dkernel, dbias))
}

/// Backward-data for stride 1 expressed as a forward convolution: correlate
/// the upstream gradient with channel-swapped, spatially rotated weights at
/// padding `dil·(K−1) − pad`. Exact for any dilation (the gradient w.r.t. an
/// input pixel sums upstream pixels at the mirrored dilated taps).
fn backward_data_as_forward<S: Scalar>(
    kernel: &Tensor<S>,
    spec: &ConvSpec,
    grad_out: &Tensor<S>,
    dims: &ConvDims,
) -> FsgResult<Tensor<S>> {
    let k = dims.k;
    let mut swapped = Tensor::zeros([dims.ci, dims.co, k, k]);
    for co in 0..dims.co {
        for ci in 0..dims.ci {
            for ky in 0..k {
                for kx in 0..k {
                    *swapped.at_mut(ci, co, k - 1 - ky, k - 1 - kx) = kernel.at(co, ci, ky, kx);
                }
            }
        }
    }
    let back_spec = ConvSpec {
        kernel_size: k,
        stride: 1,
        padding: spec.dilation * (k - 1) - spec.padding,
        dilation: spec.dilation,
    };
    let zero_bias = vec![S::zero(); dims.ci];
    let di = conv2d(grad_out, &swapped, &zero_bias, &back_spec)?;
    debug_assert_eq!(di.shape(), [dims.n, dims.ci, dims.h, dims.w]);
    Ok(di)
}

/// Dot-product tile for backward-weights: `MR` output-channel gradient
/// planes (row stride `wo`) against `KX` kernel-x taps (`dil` apart) of one
/// padded input plane slice whose row 0 is the current tap row (row stride
/// `wp`), accumulated over `rows` × `nx` pixels.
///
/// Eight lanes per accumulator: at the production tile (4×4) that is 16 live
/// vector accumulators plus the load streams, which is exactly what fits the
/// register file — wider lanes spill and run ~4× slower. Must stay
/// `inline(always)`: compiled out-of-line the by-memory slice-array argument
/// blocks alias analysis and the accumulation silently scalarizes.
#[inline(always)]
fn nt_tile<S: Scalar, const MR: usize, const KX: usize>(
    rows: usize,
    nx: usize,
    a: [&[S]; MR],
    wo: usize,
    b: &[S],
    wp: usize,
    dil: usize,
) -> [[S; KX]; MR] {
    const L: usize = super::LANES;
    let mut acc = [[[S::zero(); L]; KX]; MR];
    let chunks = nx / L;
    let mut tail = [[S::zero(); KX]; MR];
    for y in 0..rows {
        let mut ar = a;
        for (r, row) in ar.iter_mut().enumerate() {
            *row = &a[r][y * wo..y * wo + nx];
        }
        let br = &b[y * wp..];
        for ch in 0..chunks {
            let o = ch * L;
            // fixed-size views (no copies) so every lane access is
            // statically in bounds
            let av: [&[S; L]; MR] =
                std::array::from_fn(|r| ar[r][o..o + L].try_into().unwrap());
            let bu: [&[S; L]; KX] = std::array::from_fn(|s| {
                br[o + s * dil..o + s * dil + L].try_into().unwrap()
            });
            for r in 0..MR {
                for s in 0..KX {
                    S::fma_lanes(av[r], bu[s], &mut acc[r][s]);
                }
            }
        }
        for x in chunks * L..nx {
            for r in 0..MR {
                let v = ar[r][x];
                for s in 0..KX {
                    tail[r][s] = v.mul_add(br[x + s * dil], tail[r][s]);
                }
            }
        }
    }
    let mut out = tail;
    for r in 0..MR {
        for s in 0..KX {
            out[r][s] += acc[r][s].iter().copied().sum::<S>();
        }
    }
    out
}

/// Runs [`nt_tile`] for runtime tile sizes 1..=4 × 1..=4 and scatters the
/// partial sums into the kernel gradient at (co.., ci, ky, kx..).
#[allow(clippy::too_many_arguments)]
fn nt_tile_into<S: Scalar>(
    dkernel: &mut Tensor<S>,
    (co, ci, ky, kx): (usize, usize, usize, usize),
    (mr, kxn): (usize, usize),
    rows: usize,
    nx: usize,
    planes: &[&[S]],
    wo: usize,
    b: &[S],
    wp: usize,
    dil: usize,
) {
    let mut part = [[S::zero(); 4]; 4];
    macro_rules! run {
        ($mr:literal, $kx:literal) => {{
            let mut a = [planes[0]; $mr];
            a.copy_from_slice(&planes[..$mr]);
            let p = nt_tile::<S, $mr, $kx>(rows, nx, a, wo, b, wp, dil);
            for r in 0..$mr {
                part[r][..$kx].copy_from_slice(&p[r]);
            }
        }};
    }
    match (mr, kxn) {
        (1, 1) => run!(1, 1),
        (1, 2) => run!(1, 2),
        (1, 3) => run!(1, 3),
        (1, 4) => run!(1, 4),
        (2, 1) => run!(2, 1),
        (2, 2) => run!(2, 2),
        (2, 3) => run!(2, 3),
        (2, 4) => run!(2, 4),
        (3, 1) => run!(3, 1),
        (3, 2) => run!(3, 2),
        (3, 3) => run!(3, 3),
        (3, 4) => run!(3, 4),
        (4, 1) => run!(4, 1),
        (4, 2) => run!(4, 2),
        (4, 3) => run!(4, 3),
        _ => run!(4, 4),
    }
    for r in 0..mr {
        for s in 0..kxn {
            *dkernel.at_mut(co + r, ci, ky, kx + s) += part[r][s];
        }
    }
}

/// Backward-weights for stride 1: for every (ci, ky) pair, tile the (co, kx)
/// plane-dot products against the padded input.
fn backward_weights_implicit<S: Scalar>(
    input: &Tensor<S>,
    spec: &ConvSpec,
    grad_out: &Tensor<S>,
    dims: &ConvDims,
) -> Tensor<S> {
    let k = dims.k;
    let dil = spec.dilation;
    let wp = dims.w + 2 * spec.padding;
    let hp = dims.h + 2 * spec.padding;
    let mut dkernel = Tensor::zeros([dims.co, dims.ci, k, k]);
    let mut padded = Vec::new();
    for n in 0..dims.n {
        pad_sample(input, n, spec.padding, &mut padded);
        for ci in 0..dims.ci {
            let plane = &padded[ci * hp * wp..(ci + 1) * hp * wp];
            for ky in 0..k {
                let b = &plane[ky * dil * wp..];
                let mut co = 0;
                while co < dims.co {
                    let mr = 4.min(dims.co - co);
                    let planes: Vec<&[S]> =
                        (0..mr).map(|r| grad_out.plane(n, co + r)).collect();
                    let mut kx = 0;
                    while kx < k {
                        let kxn = 4.min(k - kx);
                        nt_tile_into(
                            &mut dkernel,
                            (co, ci, ky, kx),
                            (mr, kxn),
                            dims.ho,
                            dims.wo,
                            &planes,
                            dims.wo,
                            &b[kx * dil..],
                            wp,
                            dil,
                        );
                        kx += kxn;
                    }
                    co += mr;
                }
            }
        }
    }
    dkernel
}

/// Direct-loop gradients for strided convolutions (and any geometry the
/// rewrite above does not cover).
fn backward_direct<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    spec: &ConvSpec,
    grad_out: &Tensor<S>,
    dims: &ConvDims,
) -> (Tensor<S>, Tensor<S>) {
    let mut dinput = Tensor::zeros(input.shape());
    let mut dkernel = Tensor::zeros(kernel.shape());
    let (s, p, d, k) = (spec.stride, spec.padding as isize, spec.dilation, dims.k);
    for n in 0..dims.n {
        for co in 0..dims.co {
            for y in 0..dims.ho {
                for x in 0..dims.wo {
                    let g = grad_out.at(n, co, y, x);
                    for ci in 0..dims.ci {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (y * s + ky * d) as isize - p;
                                let ix = (x * s + kx * d) as isize - p;
                                if iy >= 0 && iy < dims.h as isize && ix >= 0 && ix < dims.w as isize {
                                    let (iy, ix) = (iy as usize, ix as usize);
                                    *dinput.at_mut(n, ci, iy, ix) += g * kernel.at(co, ci, ky, kx);
                                    *dkernel.at_mut(co, ci, ky, kx) += g * input.at(n, ci, iy, ix);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (dinput, dkernel)
}
