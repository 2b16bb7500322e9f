//! Matrix-free Dirac–Weyl, Pauli and magnetic Schrödinger operators at
//! coupling `t`, and the conjugate-gradient inverse of `P_t = P_{tA} + t|B|`.
//!
//! Spinor buffers are component-major (`2N³` values). The Pauli operator is
//! the square of the discrete Dirac–Weyl operator, so `⟨P_{tA}ψ, ψ⟩ = ‖D_{tA}ψ‖²`
//! holds exactly.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::gauge::{biot_savart, GaugeData};
use crate::grid::{GridSpec, ScalarField, SpinorField, VectorField};
use crate::linalg::{self, C64};

const ZERO: C64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rtol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rtol: 1e-8,
            max_iterations: 5000,
        }
    }
}

/// Galerkin restrictions of the operators.
///
/// Fourier modes with an index at the Nyquist frequency on some axis have a
/// zero derivative symbol along that axis, so they are almost annihilated by
/// the discrete Dirac operator whatever their profile. `Resolved` removes them.
/// `ResolvedMeanFree` also removes the constant spinors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subspace {
    #[default]
    Full,
    Resolved,
    ResolvedMeanFree,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

struct FieldData {
    grid: GridSpec,
    a: VectorField,
    b: VectorField,
    abs_b: ScalarField,
    a_re: [Vec<f64>; 3],
    abs_b_re: Vec<f64>,
    mean_abs_b: f64,
    ks: Vec<f64>,
    k2: Vec<f64>,
    /// Per Fourier index: no axis at the Nyquist frequency.
    resolved: Vec<bool>,
    fft: Arc<Fft3>,
}

/// A, B, |B| and the coupling. Cloning is cheap; the field data are shared.
#[derive(Clone)]
pub struct PauliContext {
    data: Arc<FieldData>,
    t: f64,
    pub solver: SolverOptions,
}

impl std::fmt::Debug for PauliContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PauliContext")
            .field("grid", &self.data.grid)
            .field("t", &self.t)
            .field("solver", &self.solver)
            .finish()
    }
}

impl PauliContext {
    pub fn new(a: VectorField, b: VectorField, t: f64) -> Result<Self> {
        a.grid().check_same(b.grid(), "PauliContext")?;
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("coupling must be finite and ≥ 0, got {t}")));
        }
        let grid = *a.grid();
        let abs_b = b.magnitude();
        let abs_b_re: Vec<f64> = abs_b.values().iter().map(|v| v.re).collect();
        let mean_abs_b = abs_b_re.iter().sum::<f64>() / grid.sites() as f64;
        let a_re = [0, 1, 2].map(|c| a.component(c).iter().map(|v| v.re).collect());
        let nyq = grid.points_per_axis() / 2;
        let resolved = (0..grid.sites())
            .map(|s| grid.site_coords(s).iter().all(|&i| i != nyq))
            .collect();
        Ok(PauliContext {
            data: Arc::new(FieldData {
                grid,
                ks: grid.wavenumbers(),
                k2: grid.laplacian_symbol(),
                resolved,
                fft: Fft3::for_size(grid.points_per_axis()),
                a,
                b,
                abs_b,
                a_re,
                abs_b_re,
                mean_abs_b,
            }),
            t,
            solver: SolverOptions::default(),
        })
    }

    /// Coulomb-gauge context for a divergence-free field.
    pub fn from_field(b: &VectorField, t: f64) -> Result<(Self, GaugeData)> {
        let gauge = biot_savart(b)?;
        let ctx = PauliContext::new(gauge.a.clone(), b.clone(), t)?;
        Ok((ctx, gauge))
    }

    /// Same fields at another coupling.
    pub fn with_coupling(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("coupling must be finite and ≥ 0, got {t}")));
        }
        Ok(PauliContext {
            data: self.data.clone(),
            t,
            solver: self.solver,
        })
    }

    /// Same B and coupling with a different potential (for gauge changes).
    pub fn with_potential(&self, a: VectorField) -> Result<Self> {
        let mut ctx = PauliContext::new(a, self.data.b.clone(), self.t)?;
        ctx.solver = self.solver;
        Ok(ctx)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.data.grid
    }

    pub fn a(&self) -> &VectorField {
        &self.data.a
    }

    pub fn b(&self) -> &VectorField {
        &self.data.b
    }

    pub fn abs_b(&self) -> &ScalarField {
        &self.data.abs_b
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn mean_abs_b(&self) -> f64 {
        self.data.mean_abs_b
    }

    /// Length of a spinor buffer, `2N³`.
    pub fn dim(&self) -> usize {
        2 * self.data.grid.sites()
    }

    /// `σ·((1/i)∇ + tA)ψ` on raw buffers.
    pub fn dirac_raw(&self, psi: &[C64], out: &mut [C64]) {
        let d = &*self.data;
        let n = d.grid.sites();
        let np = d.grid.points_per_axis();
        let (pu, pd) = psi.split_at(n);
        let (ou, od) = out.split_at_mut(n);
        ou.copy_from_slice(pu);
        od.copy_from_slice(pd);
        d.fft.forward(ou);
        d.fft.forward(od);
        let ks = &d.ks;
        ou.par_iter_mut().zip(od.par_iter_mut()).enumerate().for_each(|(s, (u, v))| {
            let (k1, k2, k3) = (ks[s % np], ks[(s / np) % np], ks[s / (np * np)]);
            let (a, b) = (*u, *v);
            *u = k3 * a + C64::new(k1, -k2) * b;
            *v = C64::new(k1, k2) * a - k3 * b;
        });
        d.fft.inverse(ou);
        d.fft.inverse(od);
        if self.t != 0.0 {
            let t = self.t;
            let [a1, a2, a3] = &d.a_re;
            ou.par_iter_mut().zip(od.par_iter_mut()).enumerate().for_each(|(s, (u, v))| {
                let (x1, x2, x3) = (t * a1[s], t * a2[s], t * a3[s]);
                let (a, b) = (pu[s], pd[s]);
                *u += x3 * a + C64::new(x1, -x2) * b;
                *v += C64::new(x1, x2) * a - x3 * b;
            });
        }
    }

    /// `D_{tA}²ψ` on raw buffers.
    pub fn pauli_raw(&self, psi: &[C64], out: &mut [C64]) {
        let mut tmp = vec![ZERO; psi.len()];
        self.dirac_raw(psi, &mut tmp);
        self.dirac_raw(&tmp, out);
    }

    /// `(P_{tA} + t|B|)ψ` on raw buffers.
    pub fn p_raw(&self, psi: &[C64], out: &mut [C64]) {
        self.pauli_raw(psi, out);
        self.add_weight(psi, out);
    }

    /// `out += t|B| ψ`.
    pub(crate) fn add_weight(&self, psi: &[C64], out: &mut [C64]) {
        let n = self.data.grid.sites();
        let w = &self.data.abs_b_re;
        let t = self.t;
        for c in 0..2 {
            out[c * n..(c + 1) * n]
                .par_iter_mut()
                .zip(&psi[c * n..(c + 1) * n])
                .zip(w)
                .for_each(|((o, p), wv)| *o += t * wv * p);
        }
    }

    /// `out = F⁻¹ (|k|² + shift)⁻¹ F r`, restricted to `sub`.
    pub fn precondition_raw(&self, shift: f64, sub: Subspace, r: &[C64], out: &mut [C64]) {
        let d = &*self.data;
        let n = d.grid.sites();
        out.copy_from_slice(r);
        for c in 0..2 {
            let part = &mut out[c * n..(c + 1) * n];
            d.fft.forward(part);
            part.par_iter_mut().zip(&d.k2).for_each(|(v, k2)| *v /= k2 + shift);
            self.mask(sub, part);
            d.fft.inverse(part);
        }
    }

    fn mask(&self, sub: Subspace, hat: &mut [C64]) {
        if sub == Subspace::Full {
            return;
        }
        hat.par_iter_mut().zip(&self.data.resolved).for_each(|(v, &keep)| {
            if !keep {
                *v = ZERO;
            }
        });
        if sub == Subspace::ResolvedMeanFree {
            hat[0] = ZERO;
        }
    }

    /// Orthogonal projection onto `sub`, in place.
    pub fn project_raw(&self, sub: Subspace, x: &mut [C64]) {
        if sub == Subspace::Full {
            return;
        }
        let d = &*self.data;
        let n = d.grid.sites();
        for c in 0..2 {
            let part = &mut x[c * n..(c + 1) * n];
            d.fft.forward(part);
            self.mask(sub, part);
            d.fft.inverse(part);
        }
    }

    /// Sitewise `t σ·B ψ`.
    pub fn zeeman_raw(&self, psi: &[C64], out: &mut [C64]) {
        let d = &*self.data;
        let n = d.grid.sites();
        let t = self.t;
        let (pu, pd) = psi.split_at(n);
        let (ou, od) = out.split_at_mut(n);
        let [b1, b2, b3] = [0, 1, 2].map(|c| d.b.component(c));
        ou.par_iter_mut().zip(od.par_iter_mut()).enumerate().for_each(|(s, (u, v))| {
            let (x1, x2, x3) = (t * b1[s].re, t * b2[s].re, t * b3[s].re);
            *u = x3 * pu[s] + C64::new(x1, -x2) * pd[s];
            *v = C64::new(x1, x2) * pu[s] - x3 * pd[s];
        });
    }

    /// `−Δψ + t(D·A + A·D)ψ + t²|A|²ψ` componentwise, `D = (1/i)∇`.
    pub fn schrodinger_raw(&self, psi: &[C64], out: &mut [C64]) {
        let d = &*self.data;
        let n = d.grid.sites();
        let np = d.grid.points_per_axis();
        let t = self.t;
        let [a1, a2, a3] = &d.a_re;
        let axis_k = |s: usize, j: usize| d.ks[[s % np, (s / np) % np, s / (np * np)][j]];
        for c in 0..2 {
            let phi = &psi[c * n..(c + 1) * n];
            let mut hat = phi.to_vec();
            d.fft.forward(&mut hat);
            let mut acc: Vec<C64> = hat.iter().zip(&d.k2).map(|(v, k2)| v * k2).collect();
            if t != 0.0 {
                // (1/i)∂_j(A_j φ) accumulated in frequency space.
                for (j, aj) in [a1, a2, a3].into_iter().enumerate() {
                    let mut prod: Vec<C64> = phi.iter().zip(aj.iter()).map(|(p, a)| p * a).collect();
                    d.fft.forward(&mut prod);
                    acc.par_iter_mut()
                        .zip(&prod)
                        .enumerate()
                        .for_each(|(s, (o, p))| *o += t * axis_k(s, j) * p);
                }
            }
            d.fft.inverse(&mut acc);
            if t != 0.0 {
                for (j, aj) in [a1, a2, a3].into_iter().enumerate() {
                    // A_j (1/i)∂_j φ
                    let mut grad: Vec<C64> = hat.par_iter().enumerate().map(|(s, v)| axis_k(s, j) * v).collect();
                    d.fft.inverse(&mut grad);
                    acc.par_iter_mut()
                        .zip(&grad)
                        .zip(aj.par_iter())
                        .for_each(|((o, g), a)| *o += t * a * g);
                }
                acc.par_iter_mut().zip(phi).enumerate().for_each(|(s, (o, p))| {
                    let a2s = a1[s] * a1[s] + a2[s] * a2[s] + a3[s] * a3[s];
                    *o += t * t * a2s * p;
                });
            }
            out[c * n..(c + 1) * n].copy_from_slice(&acc);
        }
    }

    /// Preconditioned CG for `P_t x = b`, with the system compressed to `sub`.
    pub fn solve_raw(&self, rhs: &[C64], sub: Subspace) -> Result<(Vec<C64>, SolveStats)> {
        if self.t == 0.0 {
            return Err(Error::SingularOperator("P is singular at t = 0 on the torus".into()));
        }
        if self.data.mean_abs_b == 0.0 {
            return Err(Error::SingularOperator("|B| vanishes identically; P is singular on the torus".into()));
        }
        let dim = rhs.len();
        let mut b = rhs.to_vec();
        self.project_raw(sub, &mut b);
        let bnorm = linalg::norm(&b);
        let mut x = vec![ZERO; dim];
        if bnorm == 0.0 {
            return Ok((x, SolveStats::default()));
        }
        let shift = self.t * self.data.mean_abs_b;
        let opts = self.solver;
        let apply = |v: &[C64], out: &mut [C64]| {
            self.p_raw(v, out);
            self.project_raw(sub, out);
        };
        let mut history = Vec::new();
        let mut iterations = 0;
        let mut r = b.clone();
        let mut z = vec![ZERO; dim];
        let mut p = vec![ZERO; dim];
        let mut ap = vec![ZERO; dim];
        loop {
            // (Re)start from the true residual of the current iterate.
            if iterations > 0 {
                apply(&x, &mut ap);
                for ((ri, bi), ai) in r.iter_mut().zip(&b).zip(&ap) {
                    *ri = bi - ai;
                }
            }
            let rel = linalg::norm(&r) / bnorm;
            if rel <= opts.rtol {
                return Ok((
                    x,
                    SolveStats {
                        iterations,
                        relative_residual: rel,
                    },
                ));
            }
            if iterations >= opts.max_iterations {
                return Err(Error::SolverDiverged {
                    iterations,
                    residual: rel,
                    history,
                });
            }
            self.precondition_raw(shift, sub, &r, &mut z);
            p.copy_from_slice(&z);
            let mut rz = linalg::dot(&r, &z).re;
            while iterations < opts.max_iterations {
                apply(&p, &mut ap);
                let pap = linalg::dot(&p, &ap).re;
                if !(pap > 0.0) {
                    return Err(Error::SingularOperator(format!(
                        "non-positive curvature {pap:.3e} in conjugate gradients"
                    )));
                }
                let alpha = rz / pap;
                linalg::axpy(C64::new(alpha, 0.0), &p, &mut x);
                linalg::axpy(C64::new(-alpha, 0.0), &ap, &mut r);
                iterations += 1;
                let rel = linalg::norm(&r) / bnorm;
                history.push(rel);
                if rel <= opts.rtol {
                    break;
                }
                self.precondition_raw(shift, sub, &r, &mut z);
                let rz_new = linalg::dot(&r, &z).re;
                let beta = rz_new / rz;
                rz = rz_new;
                for (pi, zi) in p.iter_mut().zip(&z) {
                    *pi = zi + beta * *pi;
                }
            }
        }
    }
}

fn check(ctx: &PauliContext, psi: &SpinorField, what: &str) -> Result<()> {
    ctx.grid().check_same(psi.grid(), what)
}

fn run(ctx: &PauliContext, psi: &SpinorField, what: &str, f: impl Fn(&[C64], &mut [C64])) -> Result<SpinorField> {
    check(ctx, psi, what)?;
    let mut out = vec![ZERO; ctx.dim()];
    f(psi.as_slice(), &mut out);
    SpinorField::from_vec(*ctx.grid(), out)
}

pub fn apply_dirac(ctx: &PauliContext, psi: &SpinorField) -> Result<SpinorField> {
    run(ctx, psi, "apply_dirac", |p, o| ctx.dirac_raw(p, o))
}

pub fn apply_pauli(ctx: &PauliContext, psi: &SpinorField) -> Result<SpinorField> {
    run(ctx, psi, "apply_pauli", |p, o| ctx.pauli_raw(p, o))
}

pub fn apply_schrodinger(ctx: &PauliContext, psi: &SpinorField) -> Result<SpinorField> {
    run(ctx, psi, "apply_schrodinger", |p, o| ctx.schrodinger_raw(p, o))
}

pub fn apply_zeeman(ctx: &PauliContext, psi: &SpinorField) -> Result<SpinorField> {
    run(ctx, psi, "apply_zeeman", |p, o| ctx.zeeman_raw(p, o))
}

#[allow(non_snake_case)]
pub fn apply_P(ctx: &PauliContext, psi: &SpinorField) -> Result<SpinorField> {
    run(ctx, psi, "apply_P", |p, o| ctx.p_raw(p, o))
}

#[allow(non_snake_case)]
pub fn solve_P(ctx: &PauliContext, b: &SpinorField) -> Result<SpinorField> {
    Ok(solve_p_with_stats(ctx, b)?.0)
}

pub fn solve_p_with_stats(ctx: &PauliContext, b: &SpinorField) -> Result<(SpinorField, SolveStats)> {
    check(ctx, b, "solve_P")?;
    let (x, stats) = ctx.solve_raw(b.as_slice(), Subspace::Full)?;
    Ok((SpinorField::from_vec(*ctx.grid(), x)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{
        loss_yau_coulomb_zero_mode, random_band_limited_scalar, random_band_limited_spinor, sample, FieldSource,
    };
    use crate::gauge::gauge_shift;
    use crate::grid::{curl, make_grid};
    use std::f64::consts::PI;

    fn rel(a: &SpinorField, b: &SpinorField) -> f64 {
        a.relative_distance(b)
    }

    /// Band-limited divergence-free potential and its exact curl.
    fn smooth_context(t: f64) -> PauliContext {
        let g = make_grid(3.0, 24).unwrap();
        let k = PI / 3.0;
        let a = VectorField::from_real_fn(g, |x| {
            [
                0.6 * (k * x[2]).sin() + 0.2 * (k * x[1]).cos(),
                0.4 * (k * x[0]).cos() - 0.3 * (k * x[2]).sin(),
                0.5 * (k * (x[0] + x[1])).sin(),
            ]
        });
        let b = curl(&a);
        PauliContext::new(a, b, t).unwrap()
    }

    fn loss_yau_context(l: f64, n: usize, t: f64) -> PauliContext {
        let g = make_grid(l, n).unwrap();
        let b = sample(&FieldSource::LossYau, &g).unwrap();
        PauliContext::from_field(&b, t).unwrap().0
    }

    #[test]
    fn free_dirac_on_plane_waves() {
        let g = make_grid(2.0, 8).unwrap();
        let ctx = PauliContext::new(VectorField::zeros(g), VectorField::zeros(g), 1.0).unwrap();
        let m = [1i64, -2, 3];
        let k = m.map(|v| g.frequency(v));
        let chi = [C64::new(0.3, 0.1), C64::new(-0.5, 0.7)];
        let psi = SpinorField::from_fn(g, |x| {
            let ph = C64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
            [ph * chi[0], ph * chi[1]]
        });
        let got = apply_dirac(&ctx, &psi).unwrap();
        let m2 = crate::grid::SpinorAlgebra::sigma_dot(k.map(|v| C64::new(v, 0.0)));
        let expect = SpinorField::from_fn(g, |x| {
            let ph = C64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
            let r = crate::grid::SpinorAlgebra::apply(&m2, chi);
            [ph * r[0], ph * r[1]]
        });
        assert!(rel(&got, &expect) < 1e-12);
        let p = apply_pauli(&ctx, &psi).unwrap();
        let k2: f64 = k.iter().map(|v| v * v).sum();
        let mut scaled = psi.clone();
        scaled.scale(C64::new(k2, 0.0));
        assert!(rel(&p, &scaled) < 1e-12);
        assert!(rel(&apply_schrodinger(&ctx, &psi).unwrap(), &scaled) < 1e-12);
    }

    #[test]
    fn hermitian_and_positive() {
        let ctx = loss_yau_context(4.0, 16, 1.3);
        for seed in 0..4 {
            let psi = random_band_limited_spinor(ctx.grid(), 8, seed);
            let phi = random_band_limited_spinor(ctx.grid(), 8, seed + 100);
            for op in [apply_dirac, apply_pauli, apply_P, apply_schrodinger] {
                let lhs = op(&ctx, &psi).unwrap().inner(&phi);
                let rhs = psi.inner(&op(&ctx, &phi).unwrap());
                assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0), "{lhs} {rhs}");
            }
            let dpsi = apply_dirac(&ctx, &psi).unwrap();
            let form = psi.inner(&apply_pauli(&ctx, &psi).unwrap());
            assert!((form.re - dpsi.norm_sqr()).abs() <= 1e-12 * form.re);
            assert!(form.re >= 0.0);
            assert!(psi.inner(&apply_schrodinger(&ctx, &psi).unwrap()).re >= 0.0);
            assert!(psi.inner(&apply_P(&ctx, &psi).unwrap()).re > 0.0);
        }
    }

    #[test]
    fn zeeman_decomposition_on_band_limited_data() {
        for t in [0.0, 0.7, 2.0] {
            let ctx = smooth_context(t);
            for seed in 0..3 {
                let psi = random_band_limited_spinor(ctx.grid(), 3, seed);
                let p = apply_pauli(&ctx, &psi).unwrap();
                let s = apply_schrodinger(&ctx, &psi).unwrap();
                let z = apply_zeeman(&ctx, &psi).unwrap();
                let sum = s.axpy(C64::new(1.0, 0.0), &z).unwrap();
                assert!(rel(&sum, &p) < 1e-6, "t={t}: {}", rel(&sum, &p));
            }
        }
    }

    #[test]
    fn dirac_is_affine_in_t() {
        let base = smooth_context(0.0);
        let psi = random_band_limited_spinor(base.grid(), 4, 9);
        let d0 = apply_dirac(&base, &psi).unwrap();
        let d1 = apply_dirac(&base.with_coupling(1.0).unwrap(), &psi).unwrap();
        let d3 = apply_dirac(&base.with_coupling(3.0).unwrap(), &psi).unwrap();
        // D_3 = D_0 + 3(D_1 − D_0)
        let expect = d0.axpy(C64::new(3.0, 0.0), &d1.axpy(C64::new(-1.0, 0.0), &d0).unwrap()).unwrap();
        assert!(rel(&d3, &expect) < 1e-12);
    }

    #[test]
    fn gauge_covariance() {
        let ctx = smooth_context(1.0);
        for seed in 0..3 {
            let f = random_band_limited_scalar(ctx.grid(), 1, seed);
            // (1/i)∇(e^{-if}ψ) = e^{-if}((1/i)∇ − ∇f)ψ, so A + ∇f pairs with e^{-if}ψ.
            let shifted = ctx.with_potential(gauge_shift(ctx.a(), &f).unwrap()).unwrap();
            let phase: Vec<C64> = f.values().iter().map(|v| C64::from_polar(1.0, -v.re)).collect();
            let psi = random_band_limited_spinor(ctx.grid(), 2, seed + 7);
            let moved = psi.multiply_sitewise(&phase);
            for op in [apply_pauli, apply_schrodinger] {
                let lhs = op(&shifted, &moved).unwrap();
                let rhs = op(&ctx, &psi).unwrap().multiply_sitewise(&phase);
                assert!(rel(&lhs, &rhs) < 1e-8, "{}", rel(&lhs, &rhs));
            }
        }
    }

    #[test]
    fn p_reduces_to_laplacian_plus_weight_without_potential() {
        let g = make_grid(3.0, 16).unwrap();
        let bump = VectorField::from_real_fn(g, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            [0.0, 0.0, (-r2).exp()]
        });
        let ctx = PauliContext::new(VectorField::zeros(g), bump, 0.8).unwrap();
        let psi = random_band_limited_spinor(&g, 4, 1);
        let got = apply_P(&ctx, &psi).unwrap();
        let lap = apply_pauli(&ctx, &psi).unwrap();
        let w: Vec<C64> = ctx.abs_b().values().iter().map(|v| 0.8 * v).collect();
        let expect = lap.axpy(C64::new(1.0, 0.0), &psi.multiply_sitewise(&w)).unwrap();
        assert!(rel(&got, &expect) < 1e-14);
    }

    #[test]
    fn solve_inverts_p() {
        let ctx = loss_yau_context(4.0, 16, 1.0);
        for seed in 0..3 {
            let x0 = random_band_limited_spinor(ctx.grid(), 6, seed);
            let b = apply_P(&ctx, &x0).unwrap();
            let (x, stats) = solve_p_with_stats(&ctx, &b).unwrap();
            assert!(rel(&x, &x0) < 1e-6, "{}", rel(&x, &x0));
            let r = apply_P(&ctx, &x).unwrap();
            assert!(rel(&r, &b) <= 1e-8);
            assert!(stats.relative_residual <= 1e-8 && stats.iterations > 0);
        }
        // Linearity.
        let b1 = random_band_limited_spinor(ctx.grid(), 6, 40);
        let b2 = random_band_limited_spinor(ctx.grid(), 6, 41);
        let x1 = solve_P(&ctx, &b1).unwrap();
        let x2 = solve_P(&ctx, &b2).unwrap();
        let x12 = solve_P(&ctx, &b1.axpy(C64::new(2.0, -1.0), &b2).unwrap()).unwrap();
        let expect = x1.axpy(C64::new(2.0, -1.0), &x2).unwrap();
        assert!(rel(&x12, &expect) < 1e-6);
    }

    #[test]
    fn singular_and_stalled_solves_are_reported() {
        let ctx = loss_yau_context(4.0, 8, 0.0);
        let b = random_band_limited_spinor(ctx.grid(), 2, 0);
        assert!(matches!(solve_P(&ctx, &b), Err(Error::SingularOperator(_))));
        let g = *ctx.grid();
        let free = PauliContext::new(VectorField::zeros(g), VectorField::zeros(g), 1.0).unwrap();
        assert!(matches!(solve_P(&free, &b), Err(Error::SingularOperator(_))));
        let mut capped = ctx.with_coupling(1.0).unwrap();
        capped.solver.max_iterations = 2;
        match solve_P(&capped, &b) {
            Err(Error::SolverDiverged { iterations, history, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(history.len(), 2);
            }
            other => panic!("expected divergence report, got {other:?}"),
        }
    }

    /// The closed-form mode decays like 1/r², so its periodic truncation has a
    /// jump at the box faces. The residual is small in the interior and
    /// concentrated at the faces.
    #[test]
    fn loss_yau_zero_mode_residual() {
        let ctx = loss_yau_context(16.0, 96, 1.0);
        let g = *ctx.grid();
        let psi = SpinorField::from_fn(g, loss_yau_coulomb_zero_mode);
        let d = apply_dirac(&ctx, &psi).unwrap();
        let (dr, pr) = (d.density(), psi.density());
        let (mut num, mut den) = (0.0, 0.0);
        for s in 0..g.sites() {
            if g.position(s).iter().all(|c| c.abs() <= 8.0) {
                num += dr[s];
                den += pr[s];
            }
        }
        let interior = (num / den).sqrt();
        let full = d.norm() / psi.norm();
        assert!(interior <= 1.5e-2, "{interior}");
        assert!(full > 5.0 * interior, "{full} vs {interior}");
    }
}
