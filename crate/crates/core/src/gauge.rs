//! Coulomb-gauge vector potentials from divergence-free magnetic fields.
//!
//! On the torus the Biot–Savart convolution becomes the Fourier symbol
//! `Â(k) = i k × B̂(k) / |k|²`, with the zero mode set to zero.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::fields::{divergence_residual, lp_norm, GRID_DATA_DIV_TOL};
use crate::grid::{curl, divergence, spectral_gradient, ScalarField, VectorField};

/// Relative size of the mean of B (against max|B|) treated as net flux.
pub const MEAN_FLUX_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct GaugeData {
    pub a: VectorField,
    /// `max |div A|`.
    pub div_residual: f64,
    /// `‖curl A − B‖ / ‖B‖`, zero when B vanishes.
    pub curl_residual: f64,
    pub l3_norm: f64,
}

impl GaugeData {
    /// `max|div A| / max|A|`, zero for A = 0.
    pub fn relative_div_residual(&self) -> f64 {
        let m = self.a.max_abs();
        if m > 0.0 {
            self.div_residual / m
        } else {
            0.0
        }
    }

    pub fn summary(&self) -> GaugeSummary {
        GaugeSummary {
            div_residual: self.div_residual,
            relative_div_residual: self.relative_div_residual(),
            curl_residual: self.curl_residual,
            l3_norm: self.l3_norm,
            max_abs: self.a.max_abs(),
        }
    }
}

/// Serializable residuals of a gauge reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeSummary {
    pub div_residual: f64,
    pub relative_div_residual: f64,
    pub curl_residual: f64,
    pub l3_norm: f64,
    pub max_abs: f64,
}

pub fn biot_savart(b: &VectorField) -> Result<GaugeData> {
    let grid = *b.grid();
    let scale = b.max_abs();
    if scale == 0.0 {
        return Ok(GaugeData {
            a: VectorField::zeros(grid),
            div_residual: 0.0,
            curl_residual: 0.0,
            l3_norm: 0.0,
        });
    }
    let mean = b.mean().iter().map(|m| m.norm_sqr()).sum::<f64>().sqrt();
    if mean > MEAN_FLUX_TOL * scale {
        return Err(Error::GaugeObstruction { mean });
    }
    let residual = divergence_residual(b);
    if residual > GRID_DATA_DIV_TOL {
        return Err(Error::NotDivergenceFree {
            residual,
            tolerance: GRID_DATA_DIV_TOL,
        });
    }

    let n = grid.points_per_axis();
    let fft = Fft3::for_size(n);
    let ks = grid.wavenumbers();
    let hats: Vec<Vec<Complex64>> = (0..3)
        .map(|c| {
            let mut h = b.component(c).to_vec();
            fft.forward(&mut h);
            h
        })
        .collect();
    let i = Complex64::new(0.0, 1.0);
    let comps = [0, 1, 2].map(|c| {
        let (p, q) = ((c + 1) % 3, (c + 2) % 3);
        let mut out: Vec<Complex64> = (0..grid.sites())
            .into_par_iter()
            .map(|s| {
                let k = [ks[s % n], ks[(s / n) % n], ks[s / (n * n)]];
                let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                if k2 == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                // (k × B̂)_c = k_p B̂_q − k_q B̂_p
                i * (k[p] * hats[q][s] - k[q] * hats[p][s]) / k2
            })
            .collect();
        fft.inverse(&mut out);
        out.iter_mut().for_each(|v| v.im = 0.0);
        ScalarField::from_values(grid, out).expect("finite potential")
    });
    let a = VectorField::from_components(comps)?;

    let div_residual = divergence(&a).max_abs();
    let curl_residual = curl(&a).sub(b)?.norm() / b.norm();
    let l3_norm = lp_norm(&a, 3.0)?.value;
    Ok(GaugeData {
        a,
        div_residual,
        curl_residual,
        l3_norm,
    })
}

/// `A + ∇f` with the spectral gradient.
pub fn gauge_shift(a: &VectorField, f: &ScalarField) -> Result<VectorField> {
    a.grid().check_same(f.grid(), "gauge_shift")?;
    a.add(&spectral_gradient(f))
}

/// Direct quadrature of `(1/4π) ∫_{|y−x|<R} B(y) × (x−y)/|x−y|³ dy` over the
/// grid samples (periodic images ignored). This orientation is the one with
/// `curl A = B`; the reversed cross product gives `−A`. `B(x)` is subtracted from the
/// integrand, which is exact for a ball centred at `x` and removes the
/// `1/|x−y|²` singularity; `B(x)` itself is evaluated by `field_at`.
pub fn biot_savart_quadrature(
    b: &VectorField,
    field_at: impl Fn([f64; 3]) -> [f64; 3],
    x: [f64; 3],
    radius: f64,
) -> [f64; 3] {
    let grid = *b.grid();
    let bx = field_at(x);
    let w = grid.cell_volume() / (4.0 * PI);
    (0..grid.sites())
        .into_par_iter()
        .map(|s| {
            let y = grid.position(s);
            let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if r2 >= radius * radius || r2 < 1e-24 {
                return [0.0; 3];
            }
            let by = b.real_at(s);
            let v = [by[0] - bx[0], by[1] - bx[1], by[2] - bx[2]];
            let f = w / (r2 * r2.sqrt());
            [
                f * (v[1] * d[2] - v[2] * d[1]),
                f * (v[2] * d[0] - v[0] * d[2]),
                f * (v[0] * d[1] - v[1] * d[0]),
            ]
        })
        .reduce(|| [0.0; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
}

/// Relative L² mismatch of two vector fields over the inner half box `|x_i| ≤ L/2`.
pub fn inner_half_box_error(a: &VectorField, reference: impl Fn([f64; 3]) -> [f64; 3]) -> f64 {
    let grid = *a.grid();
    let half = grid.half_width() / 2.0;
    let (num, den) = (0..grid.sites())
        .filter(|&s| grid.position(s).iter().all(|c| c.abs() <= half))
        .map(|s| {
            let got = a.real_at(s);
            let want = reference(grid.position(s));
            let e: f64 = (0..3).map(|c| (got[c] - want[c]).powi(2)).sum();
            let w: f64 = want.iter().map(|v| v * v).sum();
            (e, w)
        })
        .fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    (num / den).sqrt()
}

/// Smallest C with `‖A‖_{L³} ≤ C ‖B‖_{L^{3/2}}` over the given (A, B) pairs.
pub fn fitted_norm_constant(pairs: &[(f64, f64)]) -> f64 {
    pairs
        .iter()
        .filter(|(_, b)| *b > 0.0)
        .map(|(a, b)| a / b)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{
        eval_loss_yau, loss_yau_coulomb_potential, random_band_limited_scalar, sample, FieldSource,
    };
    use crate::grid::make_grid;

    #[test]
    fn single_mode_is_recovered() {
        let g = make_grid(3.0, 16).unwrap();
        let k = PI / 3.0;
        // A₀ = (sin(k z), cos(2k x), 0) is divergence free.
        let a0 = VectorField::from_real_fn(g, |x| [(k * x[2]).sin(), (2.0 * k * x[0]).cos(), 0.0]);
        let b = curl(&a0);
        let gd = biot_savart(&b).unwrap();
        let err = gd.a.sub(&a0).unwrap().norm() / a0.norm();
        assert!(err < 1e-12, "{err}");
        assert!(gd.curl_residual < 1e-12);
        assert!(gd.relative_div_residual() < 1e-12);
    }

    #[test]
    fn zero_field_gives_zero_potential() {
        let g = make_grid(2.0, 8).unwrap();
        let gd = biot_savart(&VectorField::zeros(g)).unwrap();
        assert_eq!(gd.a.max_abs(), 0.0);
        assert_eq!(gd.curl_residual, 0.0);
        assert_eq!(gd.l3_norm, 0.0);
    }

    #[test]
    fn net_flux_and_divergence_are_rejected() {
        let g = make_grid(2.0, 8).unwrap();
        let constant = VectorField::from_real_fn(g, |_| [0.0, 0.0, 1.0]);
        assert!(matches!(biot_savart(&constant), Err(Error::GaugeObstruction { .. })));
        let k = PI / 2.0;
        let grad = VectorField::from_real_fn(g, |x| [(k * x[0]).sin(), 0.0, 0.0]);
        assert!(matches!(biot_savart(&grad), Err(Error::NotDivergenceFree { .. })));
    }

    #[test]
    fn linear_in_the_field() {
        let g = make_grid(4.0, 16).unwrap();
        let b1 = sample(&FieldSource::LossYau, &g).unwrap();
        let b2 = sample(
            &FieldSource::RandomDivFree { seed: 3, amplitude: 2.0, correlation_length: 1.0 },
            &g,
        )
        .unwrap();
        let (alpha, beta) = (0.7, -1.9);
        let combo = b1.scaled(alpha).add(&b2.scaled(beta)).unwrap();
        let a = biot_savart(&combo).unwrap().a;
        let expect = biot_savart(&b1)
            .unwrap()
            .a
            .scaled(alpha)
            .add(&biot_savart(&b2).unwrap().a.scaled(beta))
            .unwrap();
        assert!(a.sub(&expect).unwrap().norm() <= 1e-10 * expect.norm());
    }

    #[test]
    fn gauge_shift_keeps_the_curl() {
        let g = make_grid(4.0, 16).unwrap();
        let b = sample(&FieldSource::LossYau, &g).unwrap();
        let a = biot_savart(&b).unwrap().a;
        assert_eq!(gauge_shift(&a, &ScalarField::zeros(g)).unwrap(), a);
        for seed in 0..3 {
            let f = random_band_limited_scalar(&g, 4, seed);
            let shifted = gauge_shift(&a, &f).unwrap();
            let before = curl(&a);
            let rel = curl(&shifted).sub(&before).unwrap().norm() / before.norm();
            assert!(rel < 1e-10, "{rel}");
        }
        let other = make_grid(4.0, 8).unwrap();
        assert!(gauge_shift(&a, &ScalarField::zeros(other)).is_err());
    }

    #[test]
    fn loss_yau_matches_coulomb_closed_form() {
        let g = make_grid(16.0, 96).unwrap();
        let b = sample(&FieldSource::LossYau, &g).unwrap();
        let gd = biot_savart(&b).unwrap();
        assert!(gd.relative_div_residual() <= 1e-8);
        assert!(gd.curl_residual <= 1e-6, "{}", gd.curl_residual);
        let err = inner_half_box_error(&gd.a, loss_yau_coulomb_potential);
        assert!(err < 0.05, "{err}");
        let origin = g.site_index(48, 48, 48);
        let a0 = gd.a.real_at(origin);
        assert!((a0[2] - 4.0).abs() < 0.05, "{a0:?}");
    }

    #[test]
    fn symbol_agrees_with_real_space_quadrature() {
        // The quadrature error is O(h²) with a large constant from the kernel
        // singularity, hence the fine grid.
        let g = make_grid(8.0, 128).unwrap();
        let b = sample(&FieldSource::LossYau, &g).unwrap();
        let a = biot_savart(&b).unwrap().a;
        for site in [g.site_index(64, 64, 64), g.site_index(66, 62, 65), g.site_index(60, 66, 67)] {
            let x = g.position(site);
            let q = biot_savart_quadrature(&b, eval_loss_yau, x, 7.5);
            let s = a.real_at(site);
            let diff = (0..3).map(|c| (q[c] - s[c]).powi(2)).sum::<f64>().sqrt();
            let size = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(diff < 0.03 * size, "{q:?} vs {s:?}");
        }
    }

    #[test]
    fn fitted_constant_is_the_worst_ratio() {
        assert_eq!(fitted_norm_constant(&[(1.0, 2.0), (3.0, 2.0), (1.0, 0.0)]), 1.5);
        assert_eq!(fitted_norm_constant(&[]), 0.0);
    }
}
