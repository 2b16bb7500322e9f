//! Block kernels on lists of complex vectors: Gram matrices `A^H B` and
//! linear combinations `V C`.
//!
//! Rows are processed in fixed chunks. Each chunk is packed into separate
//! real and imaginary column-major panels and handed to a real GEMM, so the
//! accumulation order depends only on the sizes.

use nalgebra::DMatrix;

use crate::linalg::C64;

const ROWS: usize = 4096;

struct Panel {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Panel {
    fn new(cols: usize) -> Self {
        Panel {
            re: vec![0.0; ROWS * cols],
            im: vec![0.0; ROWS * cols],
        }
    }

    /// Column `c` of the panel holds `v[c][start..start + len]`.
    fn pack(&mut self, v: &[&[C64]], start: usize, len: usize) {
        for (c, col) in v.iter().enumerate() {
            let (re, im) = (&mut self.re[c * len..(c + 1) * len], &mut self.im[c * len..(c + 1) * len]);
            for ((r, i), z) in re.iter_mut().zip(im.iter_mut()).zip(&col[start..start + len]) {
                *r = z.re;
                *i = z.im;
            }
        }
    }
}

/// `C += alpha Aᵀ B` for column-major `A` (len × m) and `B` (len × n); `C` is
/// row-major m × n.
fn at_b(alpha: f64, a: &[f64], b: &[f64], len: usize, m: usize, n: usize, c: &mut [f64]) {
    // SAFETY: the slices hold len·m, len·n and m·n values with the strides given.
    unsafe {
        matrixmultiply::dgemm(
            m,
            len,
            n,
            alpha,
            a.as_ptr(),
            len as isize,
            1,
            b.as_ptr(),
            1,
            len as isize,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `C += alpha A B` for column-major `A` (len × m), row-major `B` (m × n) and
/// column-major `C` (len × n).
fn a_b(alpha: f64, a: &[f64], b: &[f64], len: usize, m: usize, n: usize, c: &mut [f64]) {
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            len,
            m,
            n,
            alpha,
            a.as_ptr(),
            1,
            len as isize,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            1,
            len as isize,
        );
    }
}

/// `G[i, j] = ⟨a_i, b_j⟩`.
pub(crate) fn gram(a: &[&[C64]], b: &[&[C64]]) -> DMatrix<C64> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return DMatrix::zeros(m, n);
    }
    let dim = a[0].len();
    let mut pa = Panel::new(m);
    let mut pb = Panel::new(n);
    let mut gre = vec![0.0; m * n];
    let mut gim = vec![0.0; m * n];
    let mut start = 0;
    while start < dim {
        let len = ROWS.min(dim - start);
        pa.pack(a, start, len);
        pb.pack(b, start, len);
        at_b(1.0, &pa.re, &pb.re, len, m, n, &mut gre);
        at_b(1.0, &pa.im, &pb.im, len, m, n, &mut gre);
        at_b(1.0, &pa.re, &pb.im, len, m, n, &mut gim);
        at_b(-1.0, &pa.im, &pb.re, len, m, n, &mut gim);
        start += len;
    }
    DMatrix::from_fn(m, n, |i, j| C64::new(gre[i * n + j], gim[i * n + j]))
}

/// `out_j = Σ_i v_i C[i, j]`.
pub(crate) fn combine(v: &[&[C64]], c: &DMatrix<C64>) -> Vec<Vec<C64>> {
    let (m, n) = (c.nrows(), c.ncols());
    assert_eq!(v.len(), m, "coefficient rows must match the vector count");
    if m == 0 {
        return vec![Vec::new(); n];
    }
    let dim = v[0].len();
    let cre: Vec<f64> = (0..m * n).map(|k| c[(k / n, k % n)].re).collect();
    let cim: Vec<f64> = (0..m * n).map(|k| c[(k / n, k % n)].im).collect();
    let mut out = vec![vec![C64::new(0.0, 0.0); dim]; n];
    let mut pv = Panel::new(m);
    let mut ore = vec![0.0; ROWS * n];
    let mut oim = vec![0.0; ROWS * n];
    let mut start = 0;
    while start < dim {
        let len = ROWS.min(dim - start);
        pv.pack(v, start, len);
        let (ore, oim) = (&mut ore[..len * n], &mut oim[..len * n]);
        ore.fill(0.0);
        oim.fill(0.0);
        a_b(1.0, &pv.re, &cre, len, m, n, ore);
        a_b(-1.0, &pv.im, &cim, len, m, n, ore);
        a_b(1.0, &pv.re, &cim, len, m, n, oim);
        a_b(1.0, &pv.im, &cre, len, m, n, oim);
        for (j, o) in out.iter_mut().enumerate() {
            let dst = &mut o[start..start + len];
            for (r, z) in dst.iter_mut().enumerate() {
                *z = C64::new(ore[j * len + r], oim[j * len + r]);
            }
        }
        start += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    fn vectors(count: usize, dim: usize, salt: usize) -> Vec<Vec<C64>> {
        (0..count)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        let h = (i * 7919 + j * 104729 + salt * 31) % 1009;
                        C64::new(h as f64 / 1009.0 - 0.5, ((h * 17) % 1009) as f64 / 1009.0 - 0.5)
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn gram_matches_dot_products() {
        let dim = 2 * ROWS + 37;
        let a = vectors(5, dim, 1);
        let b = vectors(3, dim, 2);
        let ar: Vec<&[C64]> = a.iter().map(|v| v.as_slice()).collect();
        let br: Vec<&[C64]> = b.iter().map(|v| v.as_slice()).collect();
        let g = gram(&ar, &br);
        for i in 0..5 {
            for j in 0..3 {
                let d = linalg::dot(&a[i], &b[j]);
                assert!((g[(i, j)] - d).norm() <= 1e-10 * d.norm().max(1.0));
            }
        }
    }

    #[test]
    fn combine_matches_axpy() {
        let dim = ROWS + 11;
        let v = vectors(4, dim, 3);
        let vr: Vec<&[C64]> = v.iter().map(|x| x.as_slice()).collect();
        let c = DMatrix::from_fn(4, 2, |i, j| C64::new(i as f64 - 1.5, 0.25 * j as f64 + 0.1 * i as f64));
        let out = combine(&vr, &c);
        for j in 0..2 {
            let mut want = vec![C64::new(0.0, 0.0); dim];
            for i in 0..4 {
                linalg::axpy(c[(i, j)], &v[i], &mut want);
            }
            let err = out[j].iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err <= 1e-12, "{err}");
        }
    }
}
