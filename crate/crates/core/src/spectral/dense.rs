//! Dense ground truth for tiny grids: the Pauli operator on the resolved
//! modes, assembled in the plane-wave basis and diagonalized in full.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{to_spinors, SpectralResult};
use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::linalg::C64;
use crate::pauli::PauliContext;

pub const DENSE_MAX_POINTS: usize = 8;

/// Fourier indices with no axis at the Nyquist frequency.
fn resolved_modes(ctx: &PauliContext) -> Vec<usize> {
    let g = ctx.grid();
    let nyq = g.points_per_axis() / 2;
    (0..g.sites())
        .filter(|&s| g.site_coords(s).iter().all(|&i| i != nyq))
        .collect()
}

/// The matrix of `P_{tA}` in the orthonormal basis of resolved plane waves,
/// spin-up modes first. Row and column `c·M + j` is spin `c`, mode `modes[j]`.
pub fn assemble_dense(ctx: &PauliContext) -> Result<DMatrix<C64>> {
    let n = ctx.grid().points_per_axis();
    if n > DENSE_MAX_POINTS {
        return Err(Error::InvalidArgument(format!(
            "dense oracle limited to N ≤ {DENSE_MAX_POINTS}, got {n}"
        )));
    }
    let modes = resolved_modes(ctx);
    let sites = ctx.grid().sites();
    let fft = Fft3::for_size(n);
    let dim = 2 * modes.len();
    let mut m = DMatrix::zeros(dim, dim);
    let mut hat = vec![C64::new(0.0, 0.0); 2 * sites];
    let mut col = vec![C64::new(0.0, 0.0); 2 * sites];
    for j in 0..dim {
        // Unit plane wave: inverse transform of sqrt(N³) e_k.
        hat.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let (c, k) = (j / modes.len(), modes[j % modes.len()]);
        hat[c * sites + k] = C64::new((sites as f64).sqrt(), 0.0);
        for part in hat.chunks_mut(sites) {
            fft.inverse(part);
        }
        ctx.pauli_raw(&hat, &mut col);
        for part in col.chunks_mut(sites) {
            fft.forward(part);
        }
        let scale = 1.0 / (sites as f64).sqrt();
        for i in 0..dim {
            let (ci, ki) = (i / modes.len(), modes[i % modes.len()]);
            m[(i, j)] = col[ci * sites + ki] * scale;
        }
    }
    Ok(m)
}

/// Full spectrum of `P_{tA}` on the resolved modes, ascending.
pub fn dense_oracle(ctx: &PauliContext) -> Result<SpectralResult> {
    let m = assemble_dense(ctx)?;
    let modes = resolved_modes(ctx);
    let sites = ctx.grid().sites();
    let fft = Fft3::for_size(ctx.grid().points_per_axis());
    let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let residuals = order
        .iter()
        .map(|&i| {
            let v = eig.eigenvectors.column(i);
            (&h * v - v * C64::new(eig.eigenvalues[i], 0.0)).norm()
        })
        .collect::<Vec<f64>>();
    let vectors: Vec<Vec<C64>> = order
        .iter()
        .map(|&i| {
            let mut out = vec![C64::new(0.0, 0.0); 2 * sites];
            for (r, v) in eig.eigenvectors.column(i).iter().enumerate() {
                let (c, k) = (r / modes.len(), modes[r % modes.len()]);
                out[c * sites + k] = *v;
            }
            for part in out.chunks_mut(sites) {
                fft.inverse(part);
            }
            out
        })
        .collect();
    let converged = vec![true; eigenvalues.len()];
    Ok(SpectralResult {
        eigenvalues,
        eigenvectors: to_spinors(ctx, vectors)?,
        residuals,
        iterations: 0,
        converged,
    })
}
