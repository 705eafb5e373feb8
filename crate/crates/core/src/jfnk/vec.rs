//! Masked vector kernels. Reductions run in index order so results do not
//! depend on scheduling.

#[inline]
pub fn dot(mask: &[bool], a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        if mask[i] {
            s += a[i] * b[i];
        }
    }
    s
}

#[inline]
pub fn norm2(mask: &[bool], a: &[f64]) -> f64 {
    dot(mask, a, a).sqrt()
}

#[inline]
pub fn norm1(mask: &[bool], a: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        if mask[i] {
            s += a[i].abs();
        }
    }
    s
}

/// Zeroes unmasked entries.
#[inline]
pub fn apply_mask(mask: &[bool], a: &mut [f64]) {
    for (v, &m) in a.iter_mut().zip(mask) {
        if !m {
            *v = 0.0;
        }
    }
}

/// `y += a x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
