//! Row-level numeric kernels shared by the training pass and the cached
//! decoder. Every reduction has a fixed evaluation order, so results are
//! bitwise reproducible for a given build.

use crate::real::Real;

pub const LN_EPS: f64 = 1e-5;

/// Dot product with eight independent accumulators.
#[inline]
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [F::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s = s + *x * *y;
    }
    s
}

/// `y += a * x`
#[inline]
pub fn axpy<F: Real>(y: &mut [F], a: F, x: &[F]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * *xi;
    }
}

/// `out[r] = w @ inp[r] + bias` for each row, with `w` stored `(out_dim, in_dim)`.
pub fn matmul_forward<F: Real>(
    out: &mut [F],
    inp: &[F],
    w: &[F],
    bias: Option<&[F]>,
    in_dim: usize,
    out_dim: usize,
) {
    for (o, x) in out.chunks_exact_mut(out_dim).zip(inp.chunks_exact(in_dim)) {
        for (j, (oj, wj)) in o.iter_mut().zip(w.chunks_exact(in_dim)).enumerate() {
            let b = bias.map_or(F::zero(), |b| b[j]);
            *oj = dot(x, wj) + b;
        }
    }
}

/// Accumulates input, weight and bias gradients of [`matmul_forward`].
#[allow(clippy::too_many_arguments)]
pub fn matmul_backward<F: Real>(
    dinp: &mut [F],
    dw: &mut [F],
    dbias: Option<&mut [F]>,
    dout: &[F],
    inp: &[F],
    w: &[F],
    in_dim: usize,
    out_dim: usize,
) {
    for ((di, d), x) in dinp
        .chunks_exact_mut(in_dim)
        .zip(dout.chunks_exact(out_dim))
        .zip(inp.chunks_exact(in_dim))
    {
        for ((&g, wj), dwj) in d
            .iter()
            .zip(w.chunks_exact(in_dim))
            .zip(dw.chunks_exact_mut(in_dim))
        {
            axpy(di, g, wj);
            axpy(dwj, g, x);
        }
    }
    if let Some(db) = dbias {
        for d in dout.chunks_exact(out_dim) {
            for (b, &g) in db.iter_mut().zip(d) {
                *b = *b + g;
            }
        }
    }
}

/// Normalizes one row; returns `(mean, rstd)` for the backward pass.
#[inline]
pub fn layernorm_row<F: Real>(out: &mut [F], x: &[F], w: &[F], b: &[F]) -> (F, F) {
    let n = F::c(x.len() as f64);
    let mean = x.iter().fold(F::zero(), |s, &v| s + v) / n;
    let var = x
        .iter()
        .fold(F::zero(), |s, &v| s + (v - mean) * (v - mean))
        / n;
    let rstd = F::one() / (var + F::c(LN_EPS)).sqrt();
    for i in 0..x.len() {
        out[i] = (x[i] - mean) * rstd * w[i] + b[i];
    }
    (mean, rstd)
}

#[allow(clippy::too_many_arguments)]
#[inline]
pub fn layernorm_row_backward<F: Real>(
    dx: &mut [F],
    dw: &mut [F],
    db: &mut [F],
    dout: &[F],
    x: &[F],
    w: &[F],
    mean: F,
    rstd: F,
) {
    let n = F::c(x.len() as f64);
    let mut dnorm_mean = F::zero();
    let mut dnorm_norm_mean = F::zero();
    for i in 0..x.len() {
        let norm = (x[i] - mean) * rstd;
        let dnorm = w[i] * dout[i];
        dnorm_mean = dnorm_mean + dnorm;
        dnorm_norm_mean = dnorm_norm_mean + dnorm * norm;
    }
    dnorm_mean = dnorm_mean / n;
    dnorm_norm_mean = dnorm_norm_mean / n;
    for i in 0..x.len() {
        let norm = (x[i] - mean) * rstd;
        let dnorm = w[i] * dout[i];
        db[i] = db[i] + dout[i];
        dw[i] = dw[i] + norm * dout[i];
        dx[i] = dx[i] + (dnorm - dnorm_mean - norm * dnorm_norm_mean) * rstd;
    }
}

const GELU_SCALE: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_CUBIC: f64 = 0.044715;

#[inline]
pub fn gelu<F: Real>(x: F) -> F {
    let inner = F::c(GELU_SCALE) * (x + F::c(GELU_CUBIC) * x * x * x);
    F::c(0.5) * x * (F::one() + inner.tanh())
}

#[inline]
pub fn gelu_grad<F: Real>(x: F) -> F {
    let x3 = x * x * x;
    let inner = F::c(GELU_SCALE) * (x + F::c(GELU_CUBIC) * x3);
    let th = inner.tanh();
    let sech2 = F::one() - th * th;
    F::c(0.5) * (F::one() + th)
        + F::c(0.5) * x * sech2 * F::c(GELU_SCALE) * (F::one() + F::c(3.0 * GELU_CUBIC) * x * x)
}

/// Causal attention for one query row of one head. `key(t2)` and `value(t2)`
/// return the head slices at position `t2`; positions `0..=t` are attended.
/// Writes probabilities into `att[..=t]` and accumulates into `out`.
#[inline]
pub fn attend_row<'a, F: Real>(
    q: &[F],
    key: impl Fn(usize) -> &'a [F],
    value: impl Fn(usize) -> &'a [F],
    t: usize,
    att: &mut [F],
    out: &mut [F],
) {
    let scale = F::one() / F::c(q.len() as f64).sqrt();
    let mut max = F::neg_infinity();
    for (t2, a) in att[..=t].iter_mut().enumerate() {
        let s = dot(q, key(t2)) * scale;
        *a = s;
        if s > max {
            max = s;
        }
    }
    let mut sum = F::zero();
    for a in att[..=t].iter_mut() {
        *a = (*a - max).exp();
        sum = sum + *a;
    }
    let inv = F::one() / sum;
    out.iter_mut().for_each(|o| *o = F::zero());
    for (t2, a) in att[..=t].iter_mut().enumerate() {
        *a = *a * inv;
        axpy(out, *a, value(t2));
    }
}

/// Row softmax with the maximum subtracted.
#[inline]
pub fn softmax_row<F: Real>(out: &mut [F], logits: &[F]) {
    let max = logits
        .iter()
        .fold(F::neg_infinity(), |m, &v| if v > m { v } else { m });
    let mut sum = F::zero();
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum = sum + *o;
    }
    let inv = F::one() / sum;
    out.iter_mut().for_each(|o| *o = *o * inv);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..19).map(|i| i as f64 * 0.5 - 3.0).collect();
        let b: Vec<f64> = (0..19).map(|i| (i as f64).sin()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn gelu_grad_matches_difference() {
        for x in [-3.0, -0.7, 0.0, 0.4, 2.5f64] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - fd).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut p = [0.0f32; 5];
        softmax_row(&mut p, &[1.0, -200.0, 3.0, 0.5, 80.0]);
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn layernorm_output_is_standardized() {
        let x = [1.0, 2.0, 4.0, 9.0f64];
        let mut out = [0.0; 4];
        layernorm_row(&mut out, &x, &[1.0; 4], &[0.0; 4]);
        let mean: f64 = out.iter().sum::<f64>() / 4.0;
        let var: f64 = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-4);
    }
}
