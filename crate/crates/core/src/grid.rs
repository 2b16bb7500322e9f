//! Periodic box discretization, spectral calculus and 2-spinor algebra.
//!
//! All fields live on the torus `[-L, L)³` sampled at `N` points per axis,
//! x-fastest. Derivatives are exact for trigonometric polynomials that the
//! grid can represent; the Nyquist mode has zero derivative so that the
//! differentiation matrix stays anti-Hermitian.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft3;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Periodic truncation box `[-L, L)³` with `N` samples per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    half_width: f64,
    points_per_axis: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if points_per_axis < 8 {
            return Err(Error::InvalidGrid(format!(
                "need at least 8 points per axis, got {points_per_axis}"
            )));
        }
        if points_per_axis % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even, got {points_per_axis}"
            )));
        }
        Ok(Self {
            half_width,
            points_per_axis,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(3)
    }

    /// Number of grid sites, N³.
    pub fn sites(&self) -> usize {
        self.points_per_axis.pow(3)
    }

    pub fn coordinate(&self, index: usize) -> f64 {
        -self.half_width + index as f64 * self.spacing()
    }

    pub fn site_index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.points_per_axis;
        i + n * (j + n * k)
    }

    pub fn site_coords(&self, site: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        [site % n, (site / n) % n, site / (n * n)]
    }

    pub fn position(&self, site: usize) -> [f64; 3] {
        let [i, j, k] = self.site_coords(site);
        [self.coordinate(i), self.coordinate(j), self.coordinate(k)]
    }

    /// Signed mode number for FFT array index `index`, in `[-N/2, N/2)`.
    pub fn mode_number(&self, index: usize) -> i64 {
        let n = self.points_per_axis as i64;
        let m = index as i64;
        if m < n / 2 {
            m
        } else {
            m - n
        }
    }

    /// `π n / L` for signed mode number `n`.
    pub fn frequency(&self, mode: i64) -> f64 {
        PI * mode as f64 / self.half_width
    }

    /// Derivative symbol along one axis; zero at the Nyquist index.
    pub fn derivative_wavenumber(&self, index: usize) -> f64 {
        let m = self.mode_number(index);
        if m == -(self.points_per_axis as i64) / 2 {
            0.0
        } else {
            self.frequency(m)
        }
    }

    /// Derivative symbols for every array index along an axis.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.points_per_axis)
            .map(|i| self.derivative_wavenumber(i))
            .collect()
    }

    /// `|k|²` on the full frequency grid, using the full (Nyquist-free) derivative symbol.
    pub fn laplacian_symbol(&self) -> Vec<f64> {
        let ks = self.wavenumbers();
        let n = self.points_per_axis;
        (0..self.sites())
            .map(|s| {
                let (i, j, k) = (s % n, (s / n) % n, s / (n * n));
                ks[i] * ks[i] + ks[j] * ks[j] + ks[k] * ks[k]
            })
            .collect()
    }

    pub(crate) fn check_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {}^3 on L={} vs {}^3 on L={}",
                self.points_per_axis, self.half_width, other.points_per_axis, other.half_width
            )))
        }
    }
}

/// Validated constructor, mirroring the command-line `--box`/`--grid` pair.
pub fn make_grid(half_width: f64, points_per_axis: usize) -> Result<GridSpec> {
    GridSpec::new(half_width, points_per_axis)
}

/// Complex scalar sampled on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![ZERO; grid.sites()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.sites() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.sites(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument("non-finite sample in scalar field".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> Complex64 + Sync) -> Self {
        let values = (0..grid.sites())
            .into_par_iter()
            .map(|s| f(grid.position(s)))
            .collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Discrete L² inner product `Σ conj(self)·other·h³`.
    pub fn inner(&self, other: &ScalarField) -> Complex64 {
        dot(&self.values, &other.values) * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        (norm_sqr(&self.values) * self.grid.cell_volume()).sqrt()
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }
}

/// Three-component complex vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    components: [Vec<Complex64>; 3],
}

impl VectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let z = vec![ZERO; grid.sites()];
        Self {
            grid,
            components: [z.clone(), z.clone(), z],
        }
    }

    pub fn from_components(components: [ScalarField; 3]) -> Result<Self> {
        let grid = *components[0].grid();
        components[1].grid().check_same(&grid, "vector component 2")?;
        components[2].grid().check_same(&grid, "vector component 3")?;
        let [a, b, c] = components;
        Ok(Self {
            grid,
            components: [a.values, b.values, c.values],
        })
    }

    pub(crate) fn from_raw(grid: GridSpec, components: [Vec<Complex64>; 3]) -> Self {
        debug_assert!(components.iter().all(|c| c.len() == grid.sites()));
        Self { grid, components }
    }

    pub fn from_real_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; 3] + Sync) -> Self {
        let samples: Vec<[f64; 3]> = (0..grid.sites())
            .into_par_iter()
            .map(|s| f(grid.position(s)))
            .collect();
        let comp = |c: usize| samples.iter().map(|v| Complex64::new(v[c], 0.0)).collect();
        Self {
            grid,
            components: [comp(0), comp(1), comp(2)],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.components[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.components[c]
    }

    pub fn component_field(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.components[c].clone(),
        }
    }

    pub fn at(&self, site: usize) -> [Complex64; 3] {
        [
            self.components[0][site],
            self.components[1][site],
            self.components[2][site],
        ]
    }

    /// Real parts of the three components at a site.
    pub fn real_at(&self, site: usize) -> [f64; 3] {
        let v = self.at(site);
        [v[0].re, v[1].re, v[2].re]
    }

    /// Sitewise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let values = (0..self.grid.sites())
            .into_par_iter()
            .map(|s| {
                let v = self.at(s);
                Complex64::new((v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt(), 0.0)
            })
            .collect();
        ScalarField {
            grid: self.grid,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.magnitude().values.iter().map(|v| v.re).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.components {
            c.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        self.grid.check_same(&other.grid, "vector addition")?;
        let mut out = self.clone();
        for c in 0..3 {
            for (a, b) in out.components[c].iter_mut().zip(&other.components[c]) {
                *a += b;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.add(&other.scaled(-1.0))
    }

    pub fn inner(&self, other: &VectorField) -> Complex64 {
        (0..3)
            .map(|c| dot(&self.components[c], &other.components[c]))
            .sum::<Complex64>()
            * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        let s: f64 = self.components.iter().map(|c| norm_sqr(c)).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// Zero-frequency (mean) component of each axis.
    pub fn mean(&self) -> [Complex64; 3] {
        let n = self.grid.sites() as f64;
        [0, 1, 2].map(|c| self.components[c].iter().sum::<Complex64>() / n)
    }

    /// Discard imaginary parts.
    pub fn real_part(&self) -> VectorField {
        let mut out = self.clone();
        for c in &mut out.components {
            c.iter_mut().for_each(|v| v.im = 0.0);
        }
        out
    }
}

/// Two-component spinor field, stored component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorField {
    grid: GridSpec,
    data: Vec<Complex64>,
}

impl SpinorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            data: vec![ZERO; 2 * grid.sites()],
        }
    }

    /// Wraps a flat buffer `[up sites..., down sites...]`.
    pub fn from_vec(grid: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != 2 * grid.sites() {
            return Err(Error::GridMismatch(format!(
                "expected {} spinor samples, got {}",
                2 * grid.sites(),
                data.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [Complex64; 2] + Sync) -> Self {
        let samples: Vec<[Complex64; 2]> = (0..grid.sites())
            .into_par_iter()
            .map(|s| f(grid.position(s)))
            .collect();
        let mut data = Vec::with_capacity(2 * grid.sites());
        data.extend(samples.iter().map(|v| v[0]));
        data.extend(samples.iter().map(|v| v[1]));
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.sites();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.sites();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn at(&self, site: usize) -> [Complex64; 2] {
        let n = self.grid.sites();
        [self.data[site], self.data[n + site]]
    }

    pub fn inner(&self, other: &SpinorField) -> Complex64 {
        dot(&self.data, &other.data) * self.grid.cell_volume()
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.data) * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn normalized(&self) -> SpinorField {
        let mut out = self.clone();
        let n = self.norm();
        if n > 0.0 {
            out.scale(Complex64::new(1.0 / n, 0.0));
        }
        out
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: Complex64, other: &SpinorField) -> Result<SpinorField> {
        self.grid.check_same(&other.grid, "spinor axpy")?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(out)
    }

    /// Sitewise density `|ψ|²` summed over spin.
    pub fn density(&self) -> Vec<f64> {
        let n = self.grid.sites();
        (0..n)
            .map(|s| self.data[s].norm_sqr() + self.data[n + s].norm_sqr())
            .collect()
    }

    /// Multiply every site by a scalar profile.
    pub fn multiply_sitewise(&self, f: &[Complex64]) -> SpinorField {
        let n = self.grid.sites();
        let mut out = self.clone();
        for c in 0..2 {
            for (v, w) in out.data[c * n..(c + 1) * n].iter_mut().zip(f) {
                *v *= w;
            }
        }
        out
    }

    /// Relative L² distance, `‖self − other‖ / ‖other‖`.
    pub fn relative_distance(&self, other: &SpinorField) -> f64 {
        let diff: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (diff / norm_sqr(&other.data)).sqrt()
    }
}

/// The Pauli matrices σ₁, σ₂, σ₃.
#[derive(Clone, Copy, Debug, Default)]
pub struct SpinorAlgebra;

pub type Matrix2 = [[Complex64; 2]; 2];

impl SpinorAlgebra {
    pub const SIGMA: [Matrix2; 3] = [
        [[ZERO, ONE], [ONE, ZERO]],
        [[ZERO, Complex64::new(0.0, -1.0)], [I, ZERO]],
        [[ONE, ZERO], [ZERO, Complex64::new(-1.0, 0.0)]],
    ];

    pub fn sigma(j: usize) -> Matrix2 {
        Self::SIGMA[j]
    }

    pub fn identity() -> Matrix2 {
        [[ONE, ZERO], [ZERO, ONE]]
    }

    pub fn mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        out
    }

    /// `σ_j σ_k + σ_k σ_j`.
    pub fn anticommutator(j: usize, k: usize) -> Matrix2 {
        let ab = Self::mul(&Self::SIGMA[j], &Self::SIGMA[k]);
        let ba = Self::mul(&Self::SIGMA[k], &Self::SIGMA[j]);
        [[ab[0][0] + ba[0][0], ab[0][1] + ba[0][1]], [ab[1][0] + ba[1][0], ab[1][1] + ba[1][1]]]
    }

    /// `Σ_j v_j σ_j` for a complex 3-vector.
    pub fn sigma_dot(v: [Complex64; 3]) -> Matrix2 {
        [[v[2], v[0] - I * v[1]], [v[0] + I * v[1], -v[2]]]
    }

    pub fn apply(m: &Matrix2, psi: [Complex64; 2]) -> [Complex64; 2] {
        [
            m[0][0] * psi[0] + m[0][1] * psi[1],
            m[1][0] * psi[0] + m[1][1] * psi[1],
        ]
    }
}

/// Sitewise `(Σ_j v_j σ_j) ψ`.
pub fn sigma_dot(v: &VectorField, psi: &SpinorField) -> Result<SpinorField> {
    v.grid.check_same(&psi.grid, "sigma_dot")?;
    let n = v.grid.sites();
    let mut out = SpinorField::zeros(v.grid);
    let (up, down) = out.data.split_at_mut(n);
    let (pu, pd) = psi.data.split_at(n);
    let [v1, v2, v3] = &v.components;
    up.par_iter_mut()
        .zip(down.par_iter_mut())
        .enumerate()
        .for_each(|(s, (u, d))| {
            let m = SpinorAlgebra::sigma_dot([v1[s], v2[s], v3[s]]);
            let r = SpinorAlgebra::apply(&m, [pu[s], pd[s]]);
            *u = r[0];
            *d = r[1];
        });
    Ok(out)
}

/// Spectral gradient: component j is ∂_j f.
pub fn spectral_gradient(f: &ScalarField) -> VectorField {
    let grid = f.grid;
    let fft = Fft3::for_size(grid.points_per_axis());
    let mut hat = f.values.clone();
    fft.forward(&mut hat);
    let ks = grid.wavenumbers();
    let n = grid.points_per_axis();
    let components = [0, 1, 2].map(|axis| {
        let mut d: Vec<Complex64> = hat
            .par_iter()
            .enumerate()
            .map(|(s, v)| {
                let idx = [s % n, (s / n) % n, s / (n * n)][axis];
                I * ks[idx] * v
            })
            .collect();
        fft.inverse(&mut d);
        d
    });
    VectorField::from_raw(grid, components)
}

/// Spectral divergence `Σ_j ∂_j v_j`.
pub fn divergence(v: &VectorField) -> ScalarField {
    let grid = v.grid;
    let fft = Fft3::for_size(grid.points_per_axis());
    let ks = grid.wavenumbers();
    let n = grid.points_per_axis();
    let mut acc = vec![ZERO; grid.sites()];
    for axis in 0..3 {
        let mut hat = v.components[axis].clone();
        fft.forward(&mut hat);
        for (s, (a, h)) in acc.iter_mut().zip(&hat).enumerate() {
            let idx = [s % n, (s / n) % n, s / (n * n)][axis];
            *a += I * ks[idx] * h;
        }
    }
    fft.inverse(&mut acc);
    ScalarField { grid, values: acc }
}

/// Spectral curl `∇ × v`.
pub fn curl(v: &VectorField) -> VectorField {
    let grid = v.grid;
    let fft = Fft3::for_size(grid.points_per_axis());
    let ks = grid.wavenumbers();
    let n = grid.points_per_axis();
    let hats: Vec<Vec<Complex64>> = (0..3)
        .map(|c| {
            let mut h = v.components[c].clone();
            fft.forward(&mut h);
            h
        })
        .collect();
    let components = [0, 1, 2].map(|c| {
        let (a, b) = ((c + 1) % 3, (c + 2) % 3);
        // (∇×v)_c = ∂_a v_b − ∂_b v_a
        let mut out: Vec<Complex64> = (0..grid.sites())
            .into_par_iter()
            .map(|s| {
                let idx = [s % n, (s / n) % n, s / (n * n)];
                I * (ks[idx[a]] * hats[b][s] - ks[idx[b]] * hats[a][s])
            })
            .collect();
        fft.inverse(&mut out);
        out
    });
    VectorField::from_raw(grid, components)
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn make_grid_examples() {
        let g = make_grid(8.0, 64).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.frequency(3), PI * 3.0 / 8.0);
        let g = make_grid(1.0, 8).unwrap();
        assert_eq!(g.spacing(), 0.25);
        let kmax = (-4..4).map(|m| g.frequency(m).abs()).fold(0.0, f64::max);
        assert_eq!(kmax, 4.0 * PI);
        assert!(make_grid(8.0, 63).is_err());
        assert!(make_grid(8.0, 6).is_err());
        assert!(make_grid(0.0, 8).is_err());
        assert!(make_grid(-1.0, 8).is_err());
    }

    #[test]
    fn frequencies_pair_up_except_nyquist() {
        let g = make_grid(3.0, 10).unwrap();
        assert_eq!(g.derivative_wavenumber(0), 0.0);
        assert_eq!(g.derivative_wavenumber(5), 0.0);
        for i in 1..5 {
            assert_eq!(g.derivative_wavenumber(i), -g.derivative_wavenumber(10 - i));
        }
    }

    #[test]
    fn anticommutation_is_exact() {
        for j in 0..3 {
            for k in 0..3 {
                let ac = SpinorAlgebra::anticommutator(j, k);
                let id = if j == k { 2.0 } else { 0.0 };
                for r in 0..2 {
                    for c in 0..2 {
                        let expect = if r == c { id } else { 0.0 };
                        assert_eq!(ac[r][c], Complex64::new(expect, 0.0));
                    }
                }
            }
            let s = SpinorAlgebra::sigma(j);
            assert_eq!(s[0][0] + s[1][1], ZERO);
            assert_eq!(s[0][0] * s[1][1] - s[0][1] * s[1][0], Complex64::new(-1.0, 0.0));
            assert_eq!(s[0][1], s[1][0].conj());
        }
    }

    #[test]
    fn gradient_of_plane_wave_and_constant() {
        let g = make_grid(2.0, 8).unwrap();
        let k = [g.frequency(1), g.frequency(-2), g.frequency(3)];
        let f = ScalarField::from_fn(g, |x| {
            Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])
        });
        let grad = spectral_gradient(&f);
        for c in 0..3 {
            for (d, v) in grad.component(c).iter().zip(f.values()) {
                assert!((d - I * k[c] * v).norm() < 1e-12);
            }
        }
        let c = ScalarField::from_fn(g, |_| Complex64::new(2.5, -1.0));
        assert!(spectral_gradient(&c).max_abs() < 1e-13);
    }

    #[test]
    fn gradient_of_sine_matches_analytic() {
        let l = 3.0;
        let g = make_grid(l, 16).unwrap();
        let f = ScalarField::from_real_fn(g, |x| (PI * x[0] / l).sin());
        let grad = spectral_gradient(&f);
        let mut err: f64 = 0.0;
        for s in 0..g.sites() {
            let x = g.position(s);
            let exact = PI / l * (PI * x[0] / l).cos();
            err = err.max((grad.component(0)[s] - exact).norm());
            err = err.max(grad.component(1)[s].norm()).max(grad.component(2)[s].norm());
        }
        assert!(err <= 1e-12 * PI / l, "max error {err}");
    }

    #[test]
    fn sigma_dot_examples() {
        let g = make_grid(1.0, 8).unwrap();
        let psi = SpinorField::from_fn(g, |_| [Complex64::new(0.3, 0.1), Complex64::new(-0.7, 2.0)]);
        let e3 = VectorField::from_real_fn(g, |_| [0.0, 0.0, 1.0]);
        let out = sigma_dot(&e3, &psi).unwrap();
        assert_eq!(out.at(5), [Complex64::new(0.3, 0.1), Complex64::new(0.7, -2.0)]);
        let e1 = VectorField::from_real_fn(g, |_| [1.0, 0.0, 0.0]);
        let up = SpinorField::from_fn(g, |_| [ONE, ZERO]);
        assert_eq!(sigma_dot(&e1, &up).unwrap().at(0), [ZERO, ONE]);
    }

    #[test]
    fn sigma_dot_squared_is_magnitude_squared() {
        let g = make_grid(1.0, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vs: Vec<[f64; 3]> = (0..g.sites())
            .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let v = VectorField::from_raw(g, [0, 1, 2].map(|c| vs.iter().map(|x| Complex64::new(x[c], 0.0)).collect()));
        let data: Vec<Complex64> = (0..2 * g.sites())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let psi = SpinorField::from_vec(g, data).unwrap();
        let twice = sigma_dot(&v, &sigma_dot(&v, &psi).unwrap()).unwrap();
        for s in 0..g.sites() {
            // independent 2×2 arithmetic: (σ·v)² = |v|² I
            let m = SpinorAlgebra::sigma_dot(v.at(s));
            let m2 = SpinorAlgebra::mul(&m, &m);
            let r = SpinorAlgebra::apply(&m2, psi.at(s));
            let v2 = vs[s][0].powi(2) + vs[s][1].powi(2) + vs[s][2].powi(2);
            for c in 0..2 {
                let expect = psi.at(s)[c] * v2;
                assert!((twice.at(s)[c] - expect).norm() <= 1e-12 * expect.norm().max(1e-300));
                assert!((r[c] - expect).norm() <= 1e-12 * expect.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn curl_of_gradient_vanishes_and_divergence_of_curl_vanishes() {
        let g = make_grid(2.0, 12).unwrap();
        let f = ScalarField::from_real_fn(g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2])).exp());
        assert!(curl(&spectral_gradient(&f)).max_abs() < 1e-12);
        let v = VectorField::from_real_fn(g, |x| [(-x[1] * x[1]).exp(), x[0].sin() * 0.0 + (-x[2] * x[2]).exp(), (-x[0] * x[0]).exp()]);
        assert!(divergence(&curl(&v)).max_abs() < 1e-12);
    }
}
