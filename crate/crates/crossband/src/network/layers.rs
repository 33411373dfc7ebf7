//! Layer kernels: direct convolution, 2x2 max pooling, dense, ReLU.
//!
//! All kernels are single-threaded and allocation-free; batch-level
//! parallelism lives in the callers. Convolutions are "same"-padded with unit
//! stride; the inner loops run over contiguous row slices so the hot
//! multiply-add vectorizes.

use crate::scalar::Scalar;

/// Valid output range along one axis for a tap displacement `d`: outputs `p`
/// with `p + d` inside `[0, len)`.
#[inline]
fn tap_range(len: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d.max(0)).max(0) as usize;
    (lo, hi)
}

/// Same-padded convolution: `out[oc] = b[oc] + sum_ic w[oc][ic] * inp[ic]`.
///
/// `inp` is `in_c` planes of `side^2`, `out` is `out_c` planes of `side^2`,
/// `w` is `[out_c][in_c][k][k]` row-major.
pub fn conv_forward<F: Scalar>(
    inp: &[F],
    in_c: usize,
    side: usize,
    w: &[F],
    b: &[F],
    out_c: usize,
    k: usize,
    out: &mut [F],
) {
    let plane = side * side;
    let pad = (k / 2) as isize;
    debug_assert_eq!(inp.len(), in_c * plane);
    debug_assert_eq!(out.len(), out_c * plane);
    debug_assert_eq!(w.len(), out_c * in_c * k * k);
    for oc in 0..out_c {
        let out_plane = &mut out[oc * plane..(oc + 1) * plane];
        out_plane.fill(b[oc]);
        for ic in 0..in_c {
            let in_plane = &inp[ic * plane..(ic + 1) * plane];
            let w_base = (oc * in_c + ic) * k * k;
            for ky in 0..k {
                let dy = ky as isize - pad;
                let (y0, y1) = tap_range(side, dy);
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let (x0, x1) = tap_range(side, dx);
                    if x0 >= x1 {
                        continue;
                    }
                    let wgt = w[w_base + ky * k + kx];
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let sx = (x0 as isize + dx) as usize;
                        let src = &in_plane[sy * side + sx..sy * side + sx + (x1 - x0)];
                        let dst = &mut out_plane[y * side + x0..y * side + x1];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d = *d + wgt * s;
                        }
                    }
                }
            }
        }
    }
}

/// Weight and bias gradients for a same-padded convolution.
pub fn conv_backward_params<F: Scalar>(
    inp: &[F],
    in_c: usize,
    side: usize,
    dz: &[F],
    out_c: usize,
    k: usize,
    dw: &mut [F],
    db: &mut [F],
) {
    let plane = side * side;
    let pad = (k / 2) as isize;
    for oc in 0..out_c {
        let dz_plane = &dz[oc * plane..(oc + 1) * plane];
        let mut bias_acc = F::zero();
        for &g in dz_plane {
            bias_acc += g;
        }
        db[oc] += bias_acc;
        for ic in 0..in_c {
            let in_plane = &inp[ic * plane..(ic + 1) * plane];
            let w_base = (oc * in_c + ic) * k * k;
            for ky in 0..k {
                let dy = ky as isize - pad;
                let (y0, y1) = tap_range(side, dy);
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let (x0, x1) = tap_range(side, dx);
                    if x0 >= x1 {
                        continue;
                    }
                    let mut acc = F::zero();
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let sx = (x0 as isize + dx) as usize;
                        let src = &in_plane[sy * side + sx..sy * side + sx + (x1 - x0)];
                        let g = &dz_plane[y * side + x0..y * side + x1];
                        for (&gv, &sv) in g.iter().zip(src) {
                            acc += gv * sv;
                        }
                    }
                    dw[w_base + ky * k + kx] += acc;
                }
            }
        }
    }
}

/// Input gradient for a same-padded convolution; `din` is overwritten.
pub fn conv_backward_input<F: Scalar>(
    w: &[F],
    out_c: usize,
    in_c: usize,
    side: usize,
    k: usize,
    dz: &[F],
    din: &mut [F],
) {
    let plane = side * side;
    let pad = (k / 2) as isize;
    din.fill(F::zero());
    for oc in 0..out_c {
        let dz_plane = &dz[oc * plane..(oc + 1) * plane];
        for ic in 0..in_c {
            let din_plane = &mut din[ic * plane..(ic + 1) * plane];
            let w_base = (oc * in_c + ic) * k * k;
            for ky in 0..k {
                let dy = ky as isize - pad;
                let (y0, y1) = tap_range(side, dy);
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let (x0, x1) = tap_range(side, dx);
                    if x0 >= x1 {
                        continue;
                    }
                    let wgt = w[w_base + ky * k + kx];
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let sx = (x0 as isize + dx) as usize;
                        let g = &dz_plane[y * side + x0..y * side + x1];
                        let dst = &mut din_plane[sy * side + sx..sy * side + sx + (x1 - x0)];
                        for (d, &gv) in dst.iter_mut().zip(g) {
                            *d = *d + wgt * gv;
                        }
                    }
                }
            }
        }
    }
}

/// 2x2 max pooling with stride 2. Ties take the first element in scan order
/// (top-left, top-right, bottom-left, bottom-right). `idx` records the argmax
/// position within each input plane for the backward pass.
pub fn maxpool_forward<F: Scalar>(inp: &[F], channels: usize, side: usize, out: &mut [F], idx: &mut [u32]) {
    let oside = side / 2;
    let plane = side * side;
    let oplane = oside * oside;
    for c in 0..channels {
        let in_plane = &inp[c * plane..(c + 1) * plane];
        let out_plane = &mut out[c * oplane..(c + 1) * oplane];
        let idx_plane = &mut idx[c * oplane..(c + 1) * oplane];
        for oy in 0..oside {
            for ox in 0..oside {
                let base = (2 * oy) * side + 2 * ox;
                let cand = [base, base + 1, base + side, base + side + 1];
                let mut best = cand[0];
                let mut best_v = in_plane[best];
                for &p in &cand[1..] {
                    if in_plane[p] > best_v {
                        best_v = in_plane[p];
                        best = p;
                    }
                }
                out_plane[oy * oside + ox] = best_v;
                idx_plane[oy * oside + ox] = best as u32;
            }
        }
    }
}

/// Scatter pooled gradients back to the argmax positions; `din` is overwritten.
pub fn maxpool_backward<F: Scalar>(
    dout: &[F],
    idx: &[u32],
    channels: usize,
    side: usize,
    din: &mut [F],
) {
    let oside = side / 2;
    let plane = side * side;
    let oplane = oside * oside;
    din.fill(F::zero());
    for c in 0..channels {
        let din_plane = &mut din[c * plane..(c + 1) * plane];
        let dout_plane = &dout[c * oplane..(c + 1) * oplane];
        let idx_plane = &idx[c * oplane..(c + 1) * oplane];
        for (&g, &p) in dout_plane.iter().zip(idx_plane) {
            din_plane[p as usize] += g;
        }
    }
}

/// `out[o] = b[o] + w[o] . x`
pub fn dense_forward<F: Scalar>(x: &[F], w: &[F], b: &[F], out_d: usize, in_d: usize, out: &mut [F]) {
    for o in 0..out_d {
        let row = &w[o * in_d..(o + 1) * in_d];
        let mut acc = b[o];
        for (&wi, &xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        out[o] = acc;
    }
}

/// Dense gradients; `dx` is overwritten when provided.
pub fn dense_backward<F: Scalar>(
    x: &[F],
    w: &[F],
    dz: &[F],
    out_d: usize,
    in_d: usize,
    dw: &mut [F],
    db: &mut [F],
    dx: Option<&mut [F]>,
) {
    for o in 0..out_d {
        let g = dz[o];
        db[o] += g;
        let drow = &mut dw[o * in_d..(o + 1) * in_d];
        for (d, &xi) in drow.iter_mut().zip(x) {
            *d = *d + g * xi;
        }
    }
    if let Some(dx) = dx {
        dx.fill(F::zero());
        for o in 0..out_d {
            let g = dz[o];
            let row = &w[o * in_d..(o + 1) * in_d];
            for (d, &wi) in dx.iter_mut().zip(row) {
                *d = *d + g * wi;
            }
        }
    }
}

/// ReLU in place.
pub fn relu_inplace<F: Scalar>(buf: &mut [F]) {
    for v in buf.iter_mut() {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
}

/// Zero the gradient where the activation was clamped (`act <= 0`).
pub fn relu_backward<F: Scalar>(dbuf: &mut [F], act: &[F]) {
    for (d, &a) in dbuf.iter_mut().zip(act) {
        if a <= F::zero() {
            *d = F::zero();
        }
    }
}
