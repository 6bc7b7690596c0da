//! Dense kernels on row-major tensors stored as flat slices.

use nalgebra::DMatrix;

use crate::C64;

#[inline]
fn split(dims: &[usize], axis: usize) -> (usize, usize, usize) {
    let pre = dims[..axis].iter().product();
    let post = dims[axis + 1..].iter().product();
    (pre, dims[axis], post)
}

/// `Σ conj(x) y` with independent partial sums so the loop vectorizes.
#[inline]
fn dotc(x: &[C64], y: &[C64]) -> C64 {
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let (xc, xr) = x.split_at(x.len() / 4 * 4);
    let (yc, yr) = y.split_at(xc.len());
    for (xs, ys) in xc.chunks_exact(4).zip(yc.chunks_exact(4)) {
        for k in 0..4 {
            re[k] += xs[k].re * ys[k].re + xs[k].im * ys[k].im;
            im[k] += xs[k].re * ys[k].im - xs[k].im * ys[k].re;
        }
    }
    let mut acc = C64::new(re.iter().sum(), im.iter().sum());
    for (a, b) in xr.iter().zip(yr) {
        acc += a.conj() * b;
    }
    acc
}

/// `y += c x`.
#[inline]
fn axpy(c: C64, x: &[C64], y: &mut [C64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        yv.re += c.re * xv.re - c.im * xv.im;
        yv.im += c.re * xv.im + c.im * xv.re;
    }
}

/// `out[.., a, ..] += Σ_b m[a, b] t[.., b, ..]` along `axis`; `m` is square.
pub(crate) fn apply_axis_add(t: &[C64], dims: &[usize], axis: usize, m: &DMatrix<C64>, out: &mut [C64]) {
    let (pre, d, post) = split(dims, axis);
    debug_assert_eq!(m.nrows(), d);
    debug_assert_eq!(m.ncols(), d);
    debug_assert_eq!(t.len(), pre * d * post);
    if post == 1 {
        for o in 0..pre {
            let src = &t[o * d..(o + 1) * d];
            let dst = &mut out[o * d..(o + 1) * d];
            for (a, y) in dst.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (b, x) in src.iter().enumerate() {
                    acc += m[(a, b)] * x;
                }
                *y += acc;
            }
        }
        return;
    }
    let block = d * post;
    for o in 0..pre {
        let src = &t[o * block..(o + 1) * block];
        let dst = &mut out[o * block..(o + 1) * block];
        for a in 0..d {
            let row = &mut dst[a * post..(a + 1) * post];
            for b in 0..d {
                let c = m[(a, b)];
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                axpy(c, &src[b * post..(b + 1) * post], row);
            }
        }
    }
}

pub(crate) fn apply_axis(t: &[C64], dims: &[usize], axis: usize, m: &DMatrix<C64>) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); t.len()];
    apply_axis_add(t, dims, axis, m, &mut out);
    out
}

/// `R[j, l] = Σ conj(a[.., j, ..]) b[.., l, ..]` summed over every other axis.
pub(crate) fn hole(a: &[C64], b: &[C64], dims: &[usize], axis: usize) -> DMatrix<C64> {
    let (pre, d, post) = split(dims, axis);
    let mut r = DMatrix::zeros(d, d);
    let block = d * post;
    for o in 0..pre {
        let ab = &a[o * block..(o + 1) * block];
        let bb = &b[o * block..(o + 1) * block];
        for j in 0..d {
            let aj = &ab[j * post..(j + 1) * post];
            for l in 0..d {
                let bl = &bb[l * post..(l + 1) * post];
                r[(j, l)] += dotc(aj, bl);
            }
        }
    }
    r
}

/// Copies `t` with axes `a < b` moved to the front (other axes keep their order).
fn to_front(t: &[C64], dims: &[usize], a: usize, b: usize) -> Vec<C64> {
    let (s0, d0, m0) = split(dims, a);
    let (_, d1, p1) = split(dims, b);
    let mid = m0 / (d1 * p1);
    let rest = s0 * mid * p1;
    let mut out = vec![C64::new(0.0, 0.0); t.len()];
    for o in 0..s0 {
        for i in 0..d0 {
            for m in 0..mid {
                for j in 0..d1 {
                    let src = ((((o * d0 + i) * mid + m) * d1 + j) * p1)..;
                    let dst = (i * d1 + j) * rest + (o * mid + m) * p1;
                    out[dst..dst + p1].copy_from_slice(&t[src][..p1]);
                }
            }
        }
    }
    out
}

/// Inverse of [`to_front`], accumulating into `out`.
fn add_from_front(f: &[C64], dims: &[usize], a: usize, b: usize, out: &mut [C64]) {
    let (s0, d0, m0) = split(dims, a);
    let (_, d1, p1) = split(dims, b);
    let mid = m0 / (d1 * p1);
    let rest = s0 * mid * p1;
    for o in 0..s0 {
        for i in 0..d0 {
            for m in 0..mid {
                for j in 0..d1 {
                    let dst = (((o * d0 + i) * mid + m) * d1 + j) * p1;
                    let src = (i * d1 + j) * rest + (o * mid + m) * p1;
                    for (y, x) in out[dst..dst + p1].iter_mut().zip(&f[src..src + p1]) {
                        *y += x;
                    }
                }
            }
        }
    }
}

/// `out += m` applied jointly on axes `a < b`; `m` acts on the combined
/// index `i_a · d_b + i_b`.
pub(crate) fn apply_pair_add(t: &[C64], dims: &[usize], a: usize, b: usize, m: &DMatrix<C64>, out: &mut [C64]) {
    let d = dims[a] * dims[b];
    let f = to_front(t, dims, a, b);
    let g = apply_axis(&f, &[d, t.len() / d], 0, m);
    add_from_front(&g, dims, a, b, out);
}

/// `D[(j, j'), (l, l')] = Σ conj(x[.., j, .., j', ..]) y[.., l, .., l', ..]`
/// over every axis except `a < b`.
pub(crate) fn pair_hole(x: &[C64], y: &[C64], dims: &[usize], a: usize, b: usize) -> DMatrix<C64> {
    let d = dims[a] * dims[b];
    hole(&to_front(x, dims, a, b), &to_front(y, dims, a, b), &[d, x.len() / d], 0)
}

/// Overlap matrix `S[j, l] = ⟨row_j|row_l⟩` of an `m x (len/m)` row block.
pub(crate) fn row_gram(a: &[C64], m: usize) -> DMatrix<C64> {
    hole(a, a, &[m, a.len() / m], 0)
}

/// `max |⟨row_j|row_l⟩ - δ_jl|`.
pub(crate) fn orthonormality_residual(a: &[C64], m: usize) -> f64 {
    let g = row_gram(a, m);
    let mut worst: f64 = 0.0;
    for j in 0..m {
        for l in 0..m {
            let target = if j == l { 1.0 } else { 0.0 };
            worst = worst.max((g[(j, l)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Replaces the rows of `a` by an orthonormal set `q` with `a = r q`,
/// `r` lower triangular. Rows that vanish are completed from canonical
/// unit vectors (with a zero diagonal entry in `r`).
pub(crate) fn orthonormalize_rows(a: &mut [C64], m: usize) -> DMatrix<C64> {
    let n = a.len() / m;
    let mut r = DMatrix::zeros(m, m);
    let mut canon = 0;
    for j in 0..m {
        let (done, rest) = a.split_at_mut(j * n);
        let row = &mut rest[..n];
        let original: f64 = row.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for k in 0..j {
                let q = &done[k * n..(k + 1) * n];
                let c: C64 = q.iter().zip(row.iter()).map(|(x, y)| x.conj() * y).sum();
                r[(j, k)] += c;
                for (y, x) in row.iter_mut().zip(q) {
                    *y -= c * x;
                }
            }
        }
        let norm: f64 = row.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 * original.max(1e-300) && norm > 1e-300 {
            r[(j, j)] = C64::new(norm, 0.0);
            row.iter_mut().for_each(|x| *x /= norm);
            continue;
        }
        // Degenerate row: keep its projection in `r`, complete with a fresh direction.
        loop {
            row.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            row[canon % n] = C64::new(1.0, 0.0);
            canon += 1;
            for _ in 0..2 {
                for k in 0..j {
                    let q = &done[k * n..(k + 1) * n];
                    let c: C64 = q.iter().zip(row.iter()).map(|(x, y)| x.conj() * y).sum();
                    for (y, x) in row.iter_mut().zip(q) {
                        *y -= c * x;
                    }
                }
            }
            let norm: f64 = row.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                row.iter_mut().for_each(|x| *x /= norm);
                break;
            }
        }
    }
    r
}
