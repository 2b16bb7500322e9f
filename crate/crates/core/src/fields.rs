//! Magnetic field catalog, sampling, L^p norms and the inequality probes
//! (Hardy, diamagnetic) used by the validation suites.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::grid::{divergence, spectral_gradient, GridSpec, ScalarField, SpinorField, VectorField};

pub mod io;

/// Relative divergence tolerance for imported field data.
pub const GRID_DATA_DIV_TOL: f64 = 1e-6;

/// The Loss–Yau magnetic field `12/(1+r²)³ · (2x₁x₃−2x₂, 2x₂x₃+2x₁, 1−x₁²−x₂²+x₃²)`.
pub fn eval_loss_yau(x: [f64; 3]) -> [f64; 3] {
    let w = loss_yau_direction(x);
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let pref = 12.0 / (1.0 + r2).powi(3);
    [pref * w[0], pref * w[1], pref * w[2]]
}

/// The Loss–Yau vector potential `A_LY = 3/(1+r²)² · w(x)`. Its curl is the
/// Loss–Yau field but it is not divergence free.
pub fn loss_yau_potential(x: [f64; 3]) -> [f64; 3] {
    let w = loss_yau_direction(x);
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let pref = 3.0 / (1.0 + r2).powi(2);
    [pref * w[0], pref * w[1], pref * w[2]]
}

/// The Loss–Yau spinor `(1+r²)^{-3/2} (I + i x·σ)(1, 0)ᵀ`.
///
/// It is annihilated by `σ·((1/i)∇ − A_LY)`; with the `+A` sign convention
/// used throughout this crate the kernel element is its time reverse,
/// [`loss_yau_zero_mode`].
pub fn loss_yau_spinor(x: [f64; 3]) -> [Complex64; 2] {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let pref = (1.0 + r2).powf(-1.5);
    // (I + i x·σ) e₁ = (1 + i x₃, i x₁ − x₂)
    [
        Complex64::new(pref, pref * x[2]),
        Complex64::new(-pref * x[1], pref * x[0]),
    ]
}

/// Kernel element of `σ·((1/i)∇ + A_LY)`: `iσ₂ conj(ψ_LY)`.
pub fn loss_yau_zero_mode(x: [f64; 3]) -> [Complex64; 2] {
    let [a, b] = loss_yau_spinor(x);
    [b.conj(), -a.conj()]
}

/// Gauge function `f = 3x₃(atan r − r)/r³` with `A_C = A_LY − ∇f` divergence free.
pub fn loss_yau_coulomb_gauge_function(x: [f64; 3]) -> f64 {
    x[2] * coulomb_radial(x).0
}

/// `g(r) = 3(atan r − r)/r³` and `g'(r)/r`.
fn coulomb_radial(x: [f64; 3]) -> (f64, f64) {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let r = r2.sqrt();
    if r < 1e-2 {
        (-1.0 + 0.6 * r2 - 3.0 / 7.0 * r2 * r2, 1.2 - 12.0 / 7.0 * r2)
    } else {
        let g = 3.0 * (r.atan() - r) / (r2 * r);
        let dg = -3.0 / (r * (1.0 + r2)) - 9.0 * (r.atan() - r) / (r2 * r2);
        (g, dg / r)
    }
}

/// Closed-form Coulomb-gauge potential of the Loss–Yau field, `A_LY − ∇f`.
pub fn loss_yau_coulomb_potential(x: [f64; 3]) -> [f64; 3] {
    let a = loss_yau_potential(x);
    let (g, dg_over_r) = coulomb_radial(x);
    [
        a[0] - x[2] * dg_over_r * x[0],
        a[1] - x[2] * dg_over_r * x[1],
        a[2] - g - x[2] * dg_over_r * x[2],
    ]
}

/// Kernel element of `σ·((1/i)∇ + A_C)` in the Coulomb gauge: `e^{if}·iσ₂ conj(ψ_LY)`.
pub fn loss_yau_coulomb_zero_mode(x: [f64; 3]) -> [Complex64; 2] {
    let phase = Complex64::from_polar(1.0, loss_yau_coulomb_gauge_function(x));
    let [a, b] = loss_yau_zero_mode(x);
    [phase * a, phase * b]
}

fn loss_yau_direction(x: [f64; 3]) -> [f64; 3] {
    [
        2.0 * x[0] * x[2] - 2.0 * x[1],
        2.0 * x[1] * x[2] + 2.0 * x[0],
        1.0 - x[0] * x[0] - x[1] * x[1] + x[2] * x[2],
    ]
}

/// A magnetic field definition that can be sampled on any grid.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSource {
    LossYau,
    Scaled(Box<FieldSource>, f64),
    Sum(Vec<FieldSource>),
    /// Random solenoidal field whose L^{3/2} norm on the sampling grid equals `amplitude`.
    RandomDivFree {
        seed: u64,
        amplitude: f64,
        correlation_length: f64,
    },
    GridData(VectorField),
}

impl FieldSource {
    pub fn scaled(self, factor: f64) -> Self {
        FieldSource::Scaled(Box::new(self), factor)
    }

    /// Short human-readable description, used in result records.
    pub fn describe(&self) -> String {
        match self {
            FieldSource::LossYau => "loss-yau".into(),
            FieldSource::Scaled(b, f) => format!("{f}*({})", b.describe()),
            FieldSource::Sum(parts) => parts.iter().map(|p| p.describe()).collect::<Vec<_>>().join(" + "),
            FieldSource::RandomDivFree {
                seed,
                amplitude,
                correlation_length,
            } => format!("random(seed={seed}, l3/2={amplitude}, corr={correlation_length})"),
            FieldSource::GridData(v) => format!(
                "grid-data({}^3, L={})",
                v.grid().points_per_axis(),
                v.grid().half_width()
            ),
        }
    }
}

/// Sitewise evaluation of a source, without any projection.
///
/// Random sources are generated in frequency space and are solenoidal by
/// construction; analytic sources are evaluated exactly at the grid sites.
pub fn sample_pointwise(source: &FieldSource, grid: &GridSpec) -> Result<VectorField> {
    match source {
        FieldSource::LossYau => Ok(VectorField::from_real_fn(*grid, eval_loss_yau)),
        FieldSource::Scaled(base, factor) => Ok(sample_pointwise(base, grid)?.scaled(*factor)),
        FieldSource::Sum(parts) => {
            let mut acc = VectorField::zeros(*grid);
            for p in parts {
                acc = acc.add(&sample_pointwise(p, grid)?)?;
            }
            Ok(acc)
        }
        FieldSource::RandomDivFree {
            seed,
            amplitude,
            correlation_length,
        } => random_div_free(grid, *seed, *amplitude, *correlation_length),
        FieldSource::GridData(v) => {
            v.grid().check_same(grid, "grid data source")?;
            Ok(v.clone())
        }
    }
}

/// Samples a source as an admissible torus field: sitewise evaluation followed
/// by the solenoidal projection `I − kkᵀ/|k|²` with the mean mode removed.
///
/// The projection only changes analytic sources by their discretization and
/// truncation defect (aliasing, boundary flux); random and grid-data sources
/// pass through unchanged up to rounding.
pub fn sample(source: &FieldSource, grid: &GridSpec) -> Result<VectorField> {
    let raw = sample_pointwise(source, grid)?;
    Ok(project_solenoidal(&raw))
}

/// Leray projection onto divergence-free, zero-mean fields; returns a real field.
pub fn project_solenoidal(v: &VectorField) -> VectorField {
    let grid = *v.grid();
    let fft = Fft3::for_size(grid.points_per_axis());
    let mut hats: [Vec<Complex64>; 3] = [0, 1, 2].map(|c| {
        let mut h = v.component(c).to_vec();
        fft.forward(&mut h);
        h
    });
    apply_projection(&grid, &mut hats);
    for h in hats.iter_mut() {
        h[0] = Complex64::new(0.0, 0.0);
        fft.inverse(h);
    }
    VectorField::from_raw(grid, hats).real_part()
}

/// In-place `v̂ ← (I − kkᵀ/|k|²) v̂`. Modes with a vanishing derivative symbol
/// (the mean and pure-Nyquist modes) are removed: no potential reaches them.
fn apply_projection(grid: &GridSpec, hats: &mut [Vec<Complex64>; 3]) {
    let ks = grid.wavenumbers();
    let n = grid.points_per_axis();
    let [h0, h1, h2] = hats;
    h0.par_iter_mut()
        .zip(h1.par_iter_mut())
        .zip(h2.par_iter_mut())
        .enumerate()
        .for_each(|(s, ((a, b), c))| {
            let k = [ks[s % n], ks[(s / n) % n], ks[s / (n * n)]];
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                *a = Complex64::new(0.0, 0.0);
                *b = Complex64::new(0.0, 0.0);
                *c = Complex64::new(0.0, 0.0);
                return;
            }
            let kv = (k[0] * *a + k[1] * *b + k[2] * *c) / k2;
            *a -= k[0] * kv;
            *b -= k[1] * kv;
            *c -= k[2] * kv;
        });
}

fn random_div_free(grid: &GridSpec, seed: u64, amplitude: f64, correlation_length: f64) -> Result<VectorField> {
    if !(correlation_length > 0.0) || !(amplitude >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "random field needs correlation length > 0 and amplitude ≥ 0, got {correlation_length}, {amplitude}"
        )));
    }
    if amplitude == 0.0 {
        return Ok(VectorField::zeros(*grid));
    }
    let fft = Fft3::for_size(grid.points_per_axis());
    let ks = grid.wavenumbers();
    let n = grid.points_per_axis();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // White noise with Gaussian spectral envelope exp(−|k|²ℓ²/4), k = 0 dropped.
    let mut hats: [Vec<Complex64>; 3] = [0, 1, 2].map(|_| {
        (0..grid.sites())
            .map(|s| {
                let k2 = ks[s % n].powi(2) + ks[(s / n) % n].powi(2) + ks[s / (n * n)].powi(2);
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                if k2 == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(re, im) * (-k2 * correlation_length * correlation_length / 4.0).exp()
                }
            })
            .collect()
    });
    // Localize with a Gaussian envelope so the result decays like an L^{3/2} field.
    let envelope = 4.0 * correlation_length;
    for h in hats.iter_mut() {
        fft.inverse(h);
        h.par_iter_mut().enumerate().for_each(|(s, v)| {
            let x = grid.position(s);
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            *v = Complex64::new(v.re * (-r2 / (2.0 * envelope * envelope)).exp(), 0.0);
        });
        fft.forward(h);
    }
    apply_projection(grid, &mut hats);
    for h in hats.iter_mut() {
        h[0] = Complex64::new(0.0, 0.0);
        fft.inverse(h);
    }
    let field = VectorField::from_raw(*grid, hats).real_part();
    let norm = lp_norm(&field, 1.5)?.value;
    Ok(field.scaled(amplitude / norm))
}

/// `max|∇·v| / max|v|` with the spectral divergence.
pub fn divergence_residual(v: &VectorField) -> f64 {
    let scale = v.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    divergence(v).max_abs() / scale
}

/// Fields with a sitewise magnitude, for L^p norms.
pub trait Magnitudes {
    fn grid(&self) -> &GridSpec;
    fn magnitudes(&self) -> Vec<f64>;
}

impl Magnitudes for ScalarField {
    fn grid(&self) -> &GridSpec {
        ScalarField::grid(self)
    }
    fn magnitudes(&self) -> Vec<f64> {
        self.values().iter().map(|v| v.norm()).collect()
    }
}

impl Magnitudes for VectorField {
    fn grid(&self) -> &GridSpec {
        VectorField::grid(self)
    }
    fn magnitudes(&self) -> Vec<f64> {
        self.magnitude().values().iter().map(|v| v.re).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub p: f64,
    pub value: f64,
    pub quadrature: String,
}

/// `(Σ_sites |f|^p h³)^{1/p}`.
pub fn lp_norm<F: Magnitudes>(field: &F, p: f64) -> Result<NormReport> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("L^p norm needs p ≥ 1, got {p}")));
    }
    let grid = field.grid();
    let sum: f64 = field.magnitudes().iter().map(|m| m.powf(p)).sum();
    Ok(NormReport {
        p,
        value: (sum * grid.cell_volume()).powf(1.0 / p),
        quadrature: format!(
            "periodic trapezoid, {}^3 sites, h = {}",
            grid.points_per_axis(),
            grid.spacing()
        ),
    })
}

/// `∫|φ|²/|x|² / ∫|∇φ|²`, the quantity bounded by 4 in the Hardy inequality.
///
/// The origin site is excluded from the singular sum. The leading singular
/// part `|φ(0)|² e^{-r²/w²}/r²` is subtracted before summing and added back
/// analytically (`2π^{3/2} w |φ(0)|²`), which lowers the origin-exclusion
/// error from O(h) to O(h²).
pub fn hardy_ratio(phi: &ScalarField) -> Result<f64> {
    let grid = *phi.grid();
    let grad = spectral_gradient(phi);
    let denom: f64 = (0..3).map(|c| grad.component(c).iter().map(|v| v.norm_sqr()).sum::<f64>()).sum::<f64>()
        * grid.cell_volume();
    if !(denom > 0.0) {
        return Err(Error::InvalidArgument("Hardy ratio undefined: ∇φ vanishes".into()));
    }
    let n = grid.points_per_axis();
    let origin = grid.site_index(n / 2, n / 2, n / 2);
    let phi0 = phi.values()[origin].norm_sqr();
    let w = (grid.half_width() / 6.0).min(1.0);
    let sum: f64 = phi
        .values()
        .par_iter()
        .enumerate()
        .map(|(s, v)| {
            if s == origin {
                return 0.0;
            }
            let x = grid.position(s);
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            (v.norm_sqr() - phi0 * (-r2 / (w * w)).exp()) / r2
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let numer = sum * grid.cell_volume() + 2.0 * PI.powf(1.5) * w * phi0;
    Ok(numer / denom)
}

/// `‖((1/i)∇ + A)ψ‖² − ‖∇|ψ|‖²`, non-negative by the diamagnetic inequality.
pub fn diamagnetic_gap(psi: &SpinorField, a: &VectorField) -> Result<f64> {
    psi.grid().check_same(a.grid(), "diamagnetic gap")?;
    let grid = *psi.grid();
    let sites = grid.sites();
    let mut kinetic = 0.0;
    for c in 0..2 {
        let comp = ScalarField::from_values(grid, psi.component(c).to_vec())?;
        let grad = spectral_gradient(&comp);
        for j in 0..3 {
            let aj = a.component(j);
            kinetic += (0..sites)
                .map(|s| {
                    let v = -Complex64::i() * grad.component(j)[s] + aj[s].re * comp.values()[s];
                    v.norm_sqr()
                })
                .sum::<f64>();
        }
    }
    kinetic *= grid.cell_volume();

    let density = psi.density();
    let peak = density.iter().cloned().fold(0.0, f64::max).sqrt();
    let delta = 1e-8 * peak;
    let magnitude = ScalarField::from_values(
        grid,
        density
            .iter()
            .map(|d| Complex64::new((d + delta * delta).sqrt() - delta, 0.0))
            .collect(),
    )?;
    let grad = spectral_gradient(&magnitude);
    let mag_kinetic: f64 = (0..3)
        .map(|j| grad.component(j).iter().map(|v| v.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        * grid.cell_volume();
    Ok(kinetic - mag_kinetic)
}

/// Random band-limited complex scalar: Fourier modes with |n_j| ≤ `max_mode`.
pub fn random_band_limited_scalar(grid: &GridSpec, max_mode: i64, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.points_per_axis();
    let mut hat = vec![Complex64::new(0.0, 0.0); grid.sites()];
    for (s, v) in hat.iter_mut().enumerate() {
        let m = [grid.mode_number(s % n), grid.mode_number((s / n) % n), grid.mode_number(s / (n * n))];
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        if m.iter().all(|x| x.abs() <= max_mode) {
            *v = Complex64::new(re, im);
        }
    }
    Fft3::for_size(n).inverse(&mut hat);
    ScalarField::from_values(*grid, hat).expect("finite samples")
}

/// Random band-limited spinor built from two independent scalars.
pub fn random_band_limited_spinor(grid: &GridSpec, max_mode: i64, seed: u64) -> SpinorField {
    let a = random_band_limited_scalar(grid, max_mode, seed);
    let b = random_band_limited_scalar(grid, max_mode, seed.wrapping_add(0x9e37_79b9));
    let mut data = a.into_values();
    data.extend(b.into_values());
    SpinorField::from_vec(*grid, data).expect("matching sizes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use rand::Rng;

    #[test]
    fn loss_yau_point_values() {
        assert_eq!(eval_loss_yau([0.0, 0.0, 0.0]), [0.0, 0.0, 12.0]);
        assert_eq!(eval_loss_yau([1.0, 0.0, 0.0]), [0.0, 3.0, 0.0]);
    }

    #[test]
    fn loss_yau_magnitude_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let b = eval_loss_yau(x);
            let r2 = x.iter().map(|v| v * v).sum::<f64>();
            let m = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt() * (1.0 + r2).powi(2);
            assert!((m - 12.0).abs() <= 1e-12 * 12.0, "{m}");
        }
    }

    fn dirac_residual(psi: &dyn Fn([f64; 3]) -> [Complex64; 2], a: [f64; 3], sign: f64, x: [f64; 3]) -> f64 {
        let h = 1e-5;
        let mut res = [Complex64::new(0.0, 0.0); 2];
        let p0 = psi(x);
        for j in 0..3 {
            let mut p = x;
            let mut m = x;
            p[j] += h;
            m[j] -= h;
            let (pp, pm) = (psi(p), psi(m));
            let comp = [0, 1].map(|s| -Complex64::i() * (pp[s] - pm[s]) / (2.0 * h) + sign * a[j] * p0[s]);
            let r = crate::grid::SpinorAlgebra::apply(&crate::grid::SpinorAlgebra::sigma(j), comp);
            res[0] += r[0];
            res[1] += r[1];
        }
        res[0].norm() + res[1].norm()
    }

    /// Central differences of the closed forms: curl A = B for both gauges,
    /// div A_C = 0, and the zero-mode equations in each sign convention.
    #[test]
    fn closed_forms_are_consistent() {
        let h = 1e-4;
        let d = |f: &dyn Fn([f64; 3]) -> [f64; 3], x: [f64; 3], axis: usize, comp: usize| {
            let mut p = x;
            let mut m = x;
            p[axis] += h;
            m[axis] -= h;
            (f(p)[comp] - f(m)[comp]) / (2.0 * h)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let b = eval_loss_yau(x);
            let r2 = x.iter().map(|v| v * v).sum::<f64>();
            for a in [
                &loss_yau_potential as &dyn Fn([f64; 3]) -> [f64; 3],
                &loss_yau_coulomb_potential,
            ] {
                let curl = [
                    d(a, x, 1, 2) - d(a, x, 2, 1),
                    d(a, x, 2, 0) - d(a, x, 0, 2),
                    d(a, x, 0, 1) - d(a, x, 1, 0),
                ];
                for c in 0..3 {
                    assert!((curl[c] - b[c]).abs() < 1e-6, "curl mismatch {curl:?} {b:?}");
                }
            }
            // A_LY is not in Coulomb gauge: div A_LY = 6x₃/(1+r²)².
            let div_ly: f64 = (0..3).map(|c| d(&loss_yau_potential, x, c, c)).sum();
            assert!((div_ly - 6.0 * x[2] / (1.0 + r2).powi(2)).abs() < 1e-6);
            let div_c: f64 = (0..3).map(|c| d(&loss_yau_coulomb_potential, x, c, c)).sum();
            assert!(div_c.abs() < 1e-6, "{div_c}");
            let bf = &eval_loss_yau as &dyn Fn([f64; 3]) -> [f64; 3];
            let div_b: f64 = (0..3).map(|c| d(bf, x, c, c)).sum();
            assert!(div_b.abs() < 1e-6);

            let a_ly = loss_yau_potential(x);
            assert!(dirac_residual(&loss_yau_spinor, a_ly, -1.0, x) < 1e-6);
            assert!(dirac_residual(&loss_yau_spinor, a_ly, 1.0, x) > 1e-2);
            assert!(dirac_residual(&loss_yau_zero_mode, a_ly, 1.0, x) < 1e-6);
            assert!(dirac_residual(&loss_yau_coulomb_zero_mode, loss_yau_coulomb_potential(x), 1.0, x) < 1e-6);
        }
        assert_eq!(loss_yau_coulomb_potential([0.0, 0.0, 0.0]), [0.0, 0.0, 4.0]);
    }

    #[test]
    fn sample_scaled_sources() {
        let g = make_grid(4.0, 16).unwrap();
        let raw = sample_pointwise(&FieldSource::LossYau, &g).unwrap();
        let origin = g.site_index(8, 8, 8);
        assert_eq!(raw.real_at(origin), [0.0, 0.0, 12.0]);
        let scaled = sample_pointwise(&FieldSource::LossYau.scaled(5.0 / 3.0), &g).unwrap();
        assert!((scaled.real_at(origin)[2] - 20.0).abs() < 1e-12);
        let sum = sample_pointwise(&FieldSource::Sum(vec![FieldSource::LossYau, FieldSource::LossYau]), &g).unwrap();
        assert_eq!(sum.real_at(origin)[2], 24.0);
    }

    #[test]
    fn projected_loss_yau_is_close_to_pointwise_and_solenoidal() {
        for (n, tol) in [(32, 0.3), (64, 0.02)] {
            let g = make_grid(8.0, n).unwrap();
            let b = sample(&FieldSource::LossYau, &g).unwrap();
            let v = b.real_at(g.site_index(n / 2, n / 2, n / 2));
            eprintln!("N={n}: {v:?}");
            assert!((v[2] - 12.0).abs() < tol * 12.0 && v[0].abs() < 1e-3 && v[1].abs() < 1e-3, "{v:?}");
        }
        let g = make_grid(8.0, 32).unwrap();
        let b = sample(&FieldSource::LossYau, &g).unwrap();
        assert!(divergence_residual(&b) < 1e-10);
        assert!(b.mean().iter().all(|m| m.norm() < 1e-12));
    }

    #[test]
    fn random_field_is_solenoidal_and_calibrated() {
        let g = make_grid(6.0, 24).unwrap();
        let src = FieldSource::RandomDivFree {
            seed: 42,
            amplitude: 2.5,
            correlation_length: 1.0,
        };
        let b = sample(&src, &g).unwrap();
        assert!(divergence(&b).max_abs() <= 1e-10 * b.max_abs());
        let norm = lp_norm(&b, 1.5).unwrap().value;
        assert!((norm - 2.5).abs() < 1e-3 * 2.5, "{norm}");
        let again = sample(&src, &g).unwrap();
        assert_eq!(b, again);
    }

    #[test]
    fn lp_norm_basics() {
        let g = make_grid(2.0, 8).unwrap();
        assert_eq!(lp_norm(&VectorField::zeros(g), 1.5).unwrap().value, 0.0);
        let f = sample_pointwise(&FieldSource::LossYau, &g).unwrap();
        let a = lp_norm(&f, 2.0).unwrap().value;
        let b = lp_norm(&f.scaled(3.0), 2.0).unwrap().value;
        assert!((b - 3.0 * a).abs() < 1e-12 * b);
        assert!(lp_norm(&f, 0.5).is_err());
    }

    #[test]
    fn hardy_gaussian_ratio() {
        let g = make_grid(6.0, 48).unwrap();
        let phi = ScalarField::from_real_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp());
        let r = hardy_ratio(&phi).unwrap();
        // 2π^{3/2} / ((3/2)π^{3/2})
        assert!((r - 4.0 / 3.0).abs() < 0.02 * 4.0 / 3.0, "{r}");
        let shifted = ScalarField::from_real_fn(g, |x| {
            (-((x[0] - 1.5).powi(2) + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()
        });
        assert!(hardy_ratio(&shifted).unwrap() < r);
        assert!(hardy_ratio(&ScalarField::zeros(g)).is_err());
    }

    #[test]
    fn diamagnetic_equality_and_phase_cases() {
        let g = make_grid(6.0, 32).unwrap();
        let profile = |x: [f64; 3]| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp();
        let psi = SpinorField::from_fn(g, |x| [Complex64::new(profile(x), 0.0), Complex64::new(0.5 * profile(x), 0.0)]);
        let zero = VectorField::zeros(g);
        let gap = diamagnetic_gap(&psi, &zero).unwrap();
        assert!(gap.abs() <= 1e-8 * psi.norm_sqr(), "{gap}");

        // ψ = e^{iθ}·ρ with θ = a·x₁ smooth periodic-compatible slow phase.
        let k = g.frequency(2);
        let psi = SpinorField::from_fn(g, |x| [Complex64::from_polar(profile(x), k * x[0]), Complex64::new(0.0, 0.0)]);
        let gap = diamagnetic_gap(&psi, &zero).unwrap();
        let expect = k * k * psi.norm_sqr();
        assert!((gap - expect).abs() <= 1e-6 * expect, "{gap} vs {expect}");
    }
}
