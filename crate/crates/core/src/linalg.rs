//! Plain vector kernels on complex slices.
//!
//! Reductions run sequentially in index order so results are reproducible
//! bit for bit regardless of the thread pool.

use num_complex::Complex64;

pub type C64 = Complex64;

/// `Σ conj(a_i) b_i` with four interleaved partial sums.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = [0.0; 4];
    let mut im = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            re[l] += x[l].re * y[l].re + x[l].im * y[l].im;
            im[l] += x[l].re * y[l].im - x[l].im * y[l].re;
        }
    }
    for (x, y) in ta.iter().zip(tb) {
        re[0] += x.re * y.re + x.im * y.im;
        im[0] += x.re * y.im - x.im * y.re;
    }
    C64::new((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3]))
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.chunks_exact(4);
    let tail = chunks.remainder();
    for x in chunks {
        for l in 0..4 {
            acc[l] += x[l].re * x[l].re + x[l].im * x[l].im;
        }
    }
    for x in tail {
        acc[0] += x.re * x.re + x.im * x.im;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `y += alpha x`.
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: C64, x: &mut [C64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

pub fn scale_real(alpha: f64, x: &mut [C64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// Subtract the per-component mean of a two-component spinor buffer.
pub fn remove_spinor_mean(x: &mut [C64]) {
    let n = x.len() / 2;
    for c in 0..2 {
        let part = &mut x[c * n..(c + 1) * n];
        let mean = part.iter().sum::<C64>() / n as f64;
        part.iter_mut().for_each(|v| *v -= mean);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_is_conjugate_linear_in_first_slot() {
        let a = [C64::new(1.0, 2.0), C64::new(0.0, -1.0)];
        let b = [C64::new(3.0, 0.0), C64::new(1.0, 1.0)];
        let expect: C64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
        assert_eq!(dot(&a, &b), expect);
        assert_eq!(norm_sqr(&a), 6.0);
    }

    #[test]
    fn mean_removal() {
        let mut x = vec![C64::new(1.0, 0.0), C64::new(3.0, 0.0), C64::new(0.0, 2.0), C64::new(0.0, 4.0)];
        remove_spinor_mean(&mut x);
        assert_eq!(x, vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0)]);
    }
}
