//! The Birman–Schwinger operator `K_t = W^{1/2} P_t⁻¹ W^{1/2}`, `W = t|B|`,
//! `P_t = P_{tA} + W`.
//!
//! On the torus the constant spinors are almost annihilated by `P_{tA}` but
//! carry the whole weight `∫W`, which pins an eigenvalue of `K_t` near 1 for
//! every small `t`. The same happens to the Fourier modes at the Nyquist
//! frequency. Both realizations below therefore act on resolved spinors whose
//! components have zero mean.
//!
//! With `Π` the projection onto that subspace the operator is
//! `W^{1/2} Π (Π P_t Π)⁻¹ Π W^{1/2}`. `K_t f = μ f` with `u = Π P_t⁻¹ Π W^{1/2} f`
//! is then equivalent to the pencil `Π P_{tA} Π u = ν Π W Π u`,
//! `μ = 1/(1+ν)`, so the top of the spectrum of `K_t` is also available from
//! the bottom of the pencil without inner solves.

use std::f64::consts::PI;

use super::lobpcg::{lobpcg, LobpcgOptions};
use super::LinearOperator;
use crate::error::{Error, Result};
use crate::fields::lp_norm;
use crate::linalg::C64;
use crate::pauli::{PauliContext, SolveStats, Subspace};

/// `γ²` for the sharp Sobolev inequality `‖f‖_6 ≤ γ ‖∇f‖_2` on ℝ³.
pub fn sobolev_constant_sq() -> f64 {
    1.0 / (3.0 * (PI / 2.0).powf(4.0 / 3.0))
}

fn check_invertible(ctx: &PauliContext) -> Result<()> {
    if ctx.t() == 0.0 {
        return Err(Error::SingularOperator("Birman–Schwinger operator needs t > 0".into()));
    }
    if ctx.mean_abs_b() == 0.0 {
        return Err(Error::SingularOperator("Birman–Schwinger operator needs |B| ≢ 0".into()));
    }
    Ok(())
}

pub struct BSOperator {
    ctx: PauliContext,
    sqrt_w: Vec<f64>,
    mean_free: bool,
    last: std::sync::Mutex<Vec<SolveStats>>,
}

impl BSOperator {
    /// Mean-free realization (the default throughout the crate).
    pub fn new(ctx: &PauliContext) -> Result<Self> {
        Self::build(ctx, true)
    }

    /// The operator on all resolved spinors, constant modes included.
    pub fn with_constants(ctx: &PauliContext) -> Result<Self> {
        Self::build(ctx, false)
    }

    fn build(ctx: &PauliContext, mean_free: bool) -> Result<Self> {
        check_invertible(ctx)?;
        let t = ctx.t();
        let sqrt_w = ctx.abs_b().values().iter().map(|v| (t * v.re).sqrt()).collect();
        Ok(BSOperator {
            ctx: ctx.clone(),
            sqrt_w,
            mean_free,
            last: std::sync::Mutex::new(Vec::new()),
        })
    }

    pub fn context(&self) -> &PauliContext {
        &self.ctx
    }

    pub fn is_mean_free(&self) -> bool {
        self.mean_free
    }

    /// `γ² t ‖B‖_{3/2}`, the continuum bound on the spectrum.
    pub fn bound(&self) -> Result<f64> {
        Ok(sobolev_constant_sq() * self.ctx.t() * lp_norm(self.ctx.b(), 1.5)?.value)
    }

    /// Statistics of every inner solve so far.
    pub fn solve_stats(&self) -> Vec<SolveStats> {
        self.last.lock().expect("stats lock").clone()
    }

    fn subspace(&self) -> Subspace {
        if self.mean_free {
            Subspace::ResolvedMeanFree
        } else {
            Subspace::Resolved
        }
    }

    fn weigh(&self, x: &mut [C64]) {
        let n = self.sqrt_w.len();
        for c in 0..2 {
            for (v, w) in x[c * n..(c + 1) * n].iter_mut().zip(&self.sqrt_w) {
                *v *= w;
            }
        }
    }
}

impl LinearOperator for BSOperator {
    fn dim(&self) -> usize {
        self.ctx.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
        let sub = self.subspace();
        let mut rhs = x.to_vec();
        self.weigh(&mut rhs);
        self.ctx.project_raw(sub, &mut rhs);
        let (mut u, stats) = self.ctx.solve_raw(&rhs, sub).map_err(|e| match e {
            Error::SolverDiverged { iterations, residual, history } => Error::SolverDiverged {
                iterations,
                residual,
                history,
            },
            other => Error::Eigensolver(format!("inner solve inside the Birman–Schwinger operator: {other}")),
        })?;
        self.last.lock().expect("stats lock").push(stats);
        self.weigh(&mut u);
        y.copy_from_slice(&u);
        Ok(())
    }
}

/// Stiffness side `Π P_{tA} Π` of the pencil, `Π` the projection onto
/// resolved mean-free spinors.
pub struct MeanFreePencil<'a> {
    ctx: &'a PauliContext,
    shift: f64,
}

impl<'a> MeanFreePencil<'a> {
    pub fn new(ctx: &'a PauliContext) -> Result<Self> {
        check_invertible(ctx)?;
        Ok(MeanFreePencil {
            ctx,
            shift: ctx.t() * ctx.mean_abs_b(),
        })
    }

    pub fn mass(&self) -> PencilMass<'a> {
        PencilMass(self.ctx)
    }
}

impl LinearOperator for MeanFreePencil<'_> {
    fn dim(&self) -> usize {
        self.ctx.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
        self.ctx.pauli_raw(x, y);
        self.ctx.project_raw(Subspace::ResolvedMeanFree, y);
        Ok(())
    }

    fn precondition(&self, r: &[C64], z: &mut [C64]) {
        self.ctx.precondition_raw(self.shift, Subspace::ResolvedMeanFree, r, z);
    }

    fn constrain(&self, x: &mut [C64]) {
        self.ctx.project_raw(Subspace::ResolvedMeanFree, x);
    }
}

/// Mass side `Π t|B| Π` of the mean-free pencil.
pub struct PencilMass<'a>(&'a PauliContext);

impl LinearOperator for PencilMass<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        self.0.add_weight(x, y);
        self.0.project_raw(Subspace::ResolvedMeanFree, y);
        Ok(())
    }

    fn constrain(&self, x: &mut [C64]) {
        self.0.project_raw(Subspace::ResolvedMeanFree, x);
    }
}

#[derive(Clone, Debug)]
pub struct BsPencilResult {
    /// Top Birman–Schwinger eigenvalues, descending.
    pub mu: Vec<f64>,
    /// Pencil eigenvalues `ν = 1/μ − 1`, ascending.
    pub nu: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: Vec<bool>,
}

/// Top `k` eigenvalues of the mean-free `K_t` via the pencil.
pub fn bs_top_pencil(
    ctx: &PauliContext,
    k: usize,
    opts: &LobpcgOptions,
    start: Option<&[Vec<C64>]>,
) -> Result<BsPencilResult> {
    let stiff = MeanFreePencil::new(ctx)?;
    let mass = stiff.mass();
    let out = lobpcg(&stiff, Some(&mass), k, opts, start)?;
    let nu: Vec<f64> = out.values.iter().map(|v| v.max(0.0)).collect();
    Ok(BsPencilResult {
        mu: nu.iter().map(|v| 1.0 / (1.0 + v)).collect(),
        nu,
        vectors: out.vectors,
        residuals: out.residuals,
        iterations: out.iterations,
        converged: out.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{random_band_limited_spinor, sample, FieldSource};
    use crate::grid::make_grid;
    use crate::linalg;
    use crate::spectral::largest_eigs_with;
    use crate::spectral::LanczosOptions;

    fn ctx(t: f64) -> PauliContext {
        let g = make_grid(6.0, 16).unwrap();
        let b = sample(&FieldSource::LossYau, &g).unwrap();
        PauliContext::from_field(&b, t).unwrap().0
    }

    #[test]
    fn sharp_sobolev_times_loss_yau_norm_is_four() {
        let norm = 12.0 * (PI / 2.0).powf(4.0 / 3.0);
        assert!((sobolev_constant_sq() * norm - 4.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_and_nonnegative() {
        let c = ctx(0.8);
        for op in [BSOperator::new(&c).unwrap(), BSOperator::with_constants(&c).unwrap()] {
            let f = random_band_limited_spinor(c.grid(), 4, 1);
            let g = random_band_limited_spinor(c.grid(), 4, 2);
            let mut kf = vec![C64::default(); op.dim()];
            let mut kg = vec![C64::default(); op.dim()];
            op.apply(f.as_slice(), &mut kf).unwrap();
            op.apply(g.as_slice(), &mut kg).unwrap();
            let a = linalg::dot(&kf, g.as_slice());
            let b = linalg::dot(f.as_slice(), &kg);
            assert!((a - b).norm() <= 1e-6 * a.norm(), "{a} {b}");
            assert!(linalg::dot(f.as_slice(), &kf).re >= 0.0);
            assert!(!op.solve_stats().is_empty());
        }
    }

    #[test]
    fn pencil_matches_krylov_on_the_operator() {
        let c = ctx(1.0);
        let op = BSOperator::new(&c).unwrap();
        let lan = largest_eigs_with(&op, 3, &LanczosOptions { tol: 1e-7, max_basis: 14, ..Default::default() }).unwrap();
        let pen = bs_top_pencil(&c, 3, &LobpcgOptions { tol: 1e-8, ..Default::default() }, None).unwrap();
        for (a, b) in lan.0.iter().zip(&pen.mu) {
            assert!((a - b).abs() < 1e-6, "{:?} vs {:?}", lan.0, pen.mu);
        }
        // Decreasing spectrum, inside the unit interval.
        assert!(pen.mu.windows(2).all(|w| w[0] >= w[1]));
        assert!(pen.mu.iter().all(|&m| m > 0.0 && m <= 1.0));
    }

    #[test]
    fn rejects_singular_settings() {
        assert!(BSOperator::new(&ctx(0.0)).is_err());
        let g = make_grid(2.0, 8).unwrap();
        let zero = crate::grid::VectorField::zeros(g);
        let c = PauliContext::new(zero.clone(), zero, 1.0).unwrap();
        assert!(matches!(BSOperator::new(&c), Err(Error::SingularOperator(_))));
    }
}
