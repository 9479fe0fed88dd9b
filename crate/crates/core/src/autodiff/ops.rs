//! Numerically stable softmax family on slices.

use super::Tensor2;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Softmax with max subtraction, written into `out`.
pub fn softmax_into(xs: &[f64], out: &mut [f64]) {
    debug_assert_eq!(xs.len(), out.len());
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, x) in out.iter_mut().zip(xs) {
        *o = (x - m).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len()];
    softmax_into(xs, &mut out);
    out
}

pub fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| x - lse).collect()
}

pub fn softmax_rows(t: &Tensor2) -> Tensor2 {
    let mut out = t.clone();
    softmax_rows_in_place(&mut out);
    out
}

pub fn softmax_rows_in_place(t: &mut Tensor2) {
    let cols = t.cols();
    if cols == 0 {
        return;
    }
    let mut buf = vec![0.0; cols];
    for row in t.data_mut().chunks_exact_mut(cols) {
        softmax_into(row, &mut buf);
        row.copy_from_slice(&buf);
    }
}

/// Vector–Jacobian product of softmax: `p ⊙ (g − ⟨p, g⟩)`.
pub fn softmax_vjp(p: &[f64], g: &[f64], out: &mut [f64]) {
    let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    for ((o, pi), gi) in out.iter_mut().zip(p).zip(g) {
        *o = pi * (gi - dot);
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
