//! Hermitian eigensolvers for the Pauli operator and the Birman–Schwinger
//! operator `K_t = (t|B|)^{1/2} P_t⁻¹ (t|B|)^{1/2}`.

mod block;
mod bs;
mod dense;
mod lanczos;
mod lobpcg;
mod nullity;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::SpinorField;
use crate::linalg::{self, C64};
use crate::pauli::{PauliContext, Subspace};

pub use bs::{bs_top_pencil, sobolev_constant_sq, BSOperator, BsPencilResult, MeanFreePencil};
pub use dense::{assemble_dense, dense_oracle, DENSE_MAX_POINTS};
pub use lanczos::{largest_eigs, largest_eigs_with, LanczosOptions};
pub use lobpcg::{lobpcg, smallest_eigs, smallest_eigs_with, LobpcgOptions, LobpcgOutput};
pub use nullity::{
    boundary_shell_mass, classify, clusters, default_gap_tol, nullity_estimate, nullity_estimate_with, Cluster,
    NullityEstimate, NullityOptions, ResolvedMode, LOCALIZATION_MAX_SHELL_MASS, SHELL_FRACTION,
};

/// A Hermitian operator on `C^dim` acting on raw buffers.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[C64], y: &mut [C64]) -> Result<()>;

    /// Approximate inverse used to precondition residuals. The output must
    /// satisfy `constrain`; the default is the constrained identity.
    fn precondition(&self, r: &[C64], z: &mut [C64]) {
        z.copy_from_slice(r);
        self.constrain(z);
    }

    /// Projection applied to every trial vector (identity by default). Used to
    /// restrict a problem to an invariant subspace.
    fn constrain(&self, _x: &mut [C64]) {}
}

/// The Pauli operator `P_{tA}` compressed to the resolved modes, with a
/// shifted-Laplacian preconditioner.
pub struct PauliOperator<'a> {
    pub ctx: &'a PauliContext,
    pub shift: f64,
    pub subspace: Subspace,
}

impl<'a> PauliOperator<'a> {
    pub fn new(ctx: &'a PauliContext) -> Self {
        let l = ctx.grid().half_width();
        let free_gap = (std::f64::consts::PI / l).powi(2);
        PauliOperator {
            ctx,
            shift: free_gap.max(ctx.t() * ctx.mean_abs_b()),
            subspace: Subspace::Resolved,
        }
    }
}

impl LinearOperator for PauliOperator<'_> {
    fn dim(&self) -> usize {
        self.ctx.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
        self.ctx.pauli_raw(x, y);
        self.ctx.project_raw(self.subspace, y);
        Ok(())
    }

    fn precondition(&self, r: &[C64], z: &mut [C64]) {
        self.ctx.precondition_raw(self.shift, self.subspace, r, z);
    }

    fn constrain(&self, x: &mut [C64]) {
        self.ctx.project_raw(self.subspace, x);
    }
}

/// Operator given by an explicit diagonal.
pub struct DiagonalOperator(pub Vec<f64>);

impl LinearOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.0) {
            *yi = xi * d;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<SpinorField>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: Vec<bool>,
}

impl SpectralResult {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

/// Normalize raw vectors to unit L² norm on the grid and wrap them.
pub(crate) fn to_spinors(ctx: &PauliContext, vectors: Vec<Vec<C64>>) -> Result<Vec<SpinorField>> {
    vectors
        .into_iter()
        .map(|mut v| {
            let n = linalg::norm(&v) * ctx.grid().cell_volume().sqrt();
            if n > 0.0 {
                linalg::scale_real(1.0 / n, &mut v);
            }
            SpinorField::from_vec(*ctx.grid(), v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_smallest_three() {
        let op = DiagonalOperator((1..=40).map(|v| v as f64).collect());
        let out = lobpcg(&op, None, 3, &LobpcgOptions { tol: 1e-10, ..Default::default() }, None).unwrap();
        for (got, want) in out.values.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12, "{got}");
        }
        assert!(out.converged.iter().all(|&c| c));
    }
}

