//! Thick-restart Lanczos for the largest eigenpairs of a bounded Hermitian
//! operator. The basis is kept fully reorthogonalized; on restart the
//! wanted Ritz vectors are retained and the expansion continues from the
//! common residual direction.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::lobpcg::{combine, gram};
use super::{to_spinors, BSOperator, LinearOperator, SpectralResult};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    pub tol: f64,
    /// Largest basis before a restart.
    pub max_basis: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-4,
            max_basis: 16,
            max_restarts: 30,
            seed: 0xb5,
        }
    }
}

/// Largest `k` eigenpairs of the Birman–Schwinger operator, descending.
pub fn largest_eigs(op: &BSOperator, k: usize, tol: f64) -> Result<SpectralResult> {
    let opts = LanczosOptions {
        tol,
        max_basis: (2 * k + 8).max(12),
        ..Default::default()
    };
    let out = largest_eigs_with(op, k, &opts)?;
    Ok(SpectralResult {
        eigenvalues: out.0,
        eigenvectors: to_spinors(op.context(), out.1)?,
        residuals: out.2,
        iterations: out.3,
        converged: out.4,
    })
}

type LanczosOutput = (Vec<f64>, Vec<Vec<C64>>, Vec<f64>, usize, Vec<bool>);

/// Generic form: (values descending, vectors, residuals, operator applications, converged).
pub fn largest_eigs_with(op: &dyn LinearOperator, k: usize, opts: &LanczosOptions) -> Result<LanczosOutput> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!("cannot compute {k} eigenpairs in dimension {dim}")));
    }
    let m = opts.max_basis.max(k + 2).min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut next: Vec<C64> = (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        })
        .collect();
    op.constrain(&mut next);

    let mut v: Vec<Vec<C64>> = Vec::new();
    let mut kv: Vec<Vec<C64>> = Vec::new();
    let mut applications = 0;
    let mut result = None;
    for restart in 0..=opts.max_restarts {
        // Expand the basis to m vectors.
        while v.len() < m {
            for _ in 0..2 {
                for q in &v {
                    let c = linalg::dot(q, &next);
                    linalg::axpy(-c, q, &mut next);
                }
            }
            let nrm = linalg::norm(&next);
            if !(nrm > 1e-14) {
                break; // invariant subspace found
            }
            linalg::scale_real(1.0 / nrm, &mut next);
            let mut image = vec![ZERO; dim];
            op.apply(&next, &mut image)?;
            op.constrain(&mut image);
            applications += 1;
            v.push(std::mem::replace(&mut next, image.clone()));
            kv.push(image);
        }

        let refs: Vec<&[C64]> = v.iter().map(|x| x.as_slice()).collect();
        let krefs: Vec<&[C64]> = kv.iter().map(|x| x.as_slice()).collect();
        let h = gram(&refs, &krefs);
        let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let keep = (k + (m - k) / 2).min(order.len());
        let c = DMatrix::from_fn(v.len(), keep, |r, col| eig.eigenvectors[(r, order[col])]);
        let theta: Vec<f64> = order[..keep].iter().map(|&i| eig.eigenvalues[i]).collect();
        let y = combine(&v, &c);
        let ky = combine(&kv, &c);
        let mut residuals = Vec::with_capacity(keep);
        let mut resid_vecs = Vec::with_capacity(keep);
        for ((yi, kyi), &th) in y.iter().zip(&ky).zip(&theta) {
            let mut r = kyi.clone();
            linalg::axpy(C64::new(-th, 0.0), yi, &mut r);
            residuals.push(linalg::norm(&r));
            resid_vecs.push(r);
        }
        let conv: Vec<bool> = (0..k.min(keep))
            .map(|i| residuals[i] <= opts.tol * theta[i].abs().max(1.0))
            .collect();
        let done = conv.iter().all(|&c| c) || v.len() < m || restart == opts.max_restarts;
        if done {
            let kk = k.min(keep);
            result = Some((
                theta[..kk].to_vec(),
                y[..kk].to_vec(),
                residuals[..kk].to_vec(),
                applications,
                conv,
            ));
            break;
        }
        // Continue from the residual of the first unconverged Ritz pair.
        let first = (0..k).find(|&i| !conv[i]).unwrap_or(0);
        next = resid_vecs.swap_remove(first);
        v = y;
        kv = ky;
    }
    result.ok_or_else(|| Error::Eigensolver("Lanczos produced no Ritz values".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::DiagonalOperator;

    #[test]
    fn diagonal_top_eigenvalues() {
        let op = DiagonalOperator((0..300).map(|i| 1.0 / (1.0 + i as f64)).collect());
        let out = largest_eigs_with(&op, 3, &LanczosOptions { tol: 1e-10, max_basis: 20, ..Default::default() }).unwrap();
        for (got, want) in out.0.iter().zip([1.0, 0.5, 1.0 / 3.0]) {
            assert!((got - want).abs() < 1e-9, "{got}");
        }
        assert!(out.4.iter().all(|&c| c));
    }
}
