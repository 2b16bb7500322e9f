//! Property suites run by `validate`: Pauli algebra, Hardy and diamagnetic
//! inequalities, iterative eigenvalues against the dense oracle, and gauge
//! invariance of `λ_min`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fields::{diamagnetic_gap, hardy_ratio, random_band_limited_spinor, sample, FieldSource};
use crate::grid::{make_grid, GridSpec, ScalarField, SpinorAlgebra};
use crate::linalg::C64;
use crate::pauli::PauliContext;
use crate::spectral::{dense_oracle, smallest_eigs_with, LobpcgOptions};
use crate::sweep::gauge_invariance;

pub const HARDY_LIMIT: f64 = 4.05;
pub const DIAMAGNETIC_SLACK: f64 = 1e-6;
pub const ORACLE_RTOL: f64 = 1e-8;
pub const GAUGE_RTOL: f64 = 1e-6;
/// Eigenvalues below this are compared absolutely in the oracle suite.
const ORACLE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    /// The extreme value of the tested quantity over all cases.
    pub worst: f64,
    pub threshold: f64,
    pub detail: String,
}

impl SuiteResult {
    fn failed(name: &str, err: impl std::fmt::Display) -> Self {
        SuiteResult {
            name: name.into(),
            passed: false,
            cases: 0,
            worst: f64::NAN,
            threshold: f64::NAN,
            detail: format!("error: {err}"),
        }
    }
}

/// `{σ_j, σ_k} = 2δ_jk` and `(σ·a)(σ·b) + (σ·b)(σ·a) = 2 a·b` for random
/// integer vectors, both compared exactly.
pub fn anticommutation(cases: usize, seed: u64) -> SuiteResult {
    let mut worst = 0.0f64;
    for j in 0..3 {
        for k in 0..3 {
            let m = SpinorAlgebra::anticommutator(j, k);
            let want = if j == k { 2.0 } else { 0.0 };
            for (r, row) in m.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    let e = if r == c { want } else { 0.0 };
                    worst = worst.max((v - C64::new(e, 0.0)).norm());
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || [0; 3].map(|_| C64::new(rng.random_range(-20..=20) as f64, 0.0));
    for _ in 0..cases {
        let (a, b) = (draw(), draw());
        let (sa, sb) = (SpinorAlgebra::sigma_dot(a), SpinorAlgebra::sigma_dot(b));
        let (ab, ba) = (SpinorAlgebra::mul(&sa, &sb), SpinorAlgebra::mul(&sb, &sa));
        let dot: C64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        for r in 0..2 {
            for c in 0..2 {
                let e = if r == c { 2.0 * dot } else { C64::new(0.0, 0.0) };
                worst = worst.max((ab[r][c] + ba[r][c] - e).norm());
            }
        }
    }
    SuiteResult {
        name: "anticommutation".into(),
        passed: worst == 0.0,
        cases: cases + 9,
        worst,
        threshold: 0.0,
        detail: "max entry error of the anticommutators".into(),
    }
}

/// Hardy ratio of random sums of one to three Gaussians (complex weights,
/// centers within 1.5 of the origin, widths in [0.7, 1.5]) on `[−6, 6)³`, 32³.
pub fn hardy(cases: usize, seed: u64) -> SuiteResult {
    let run = || -> Result<SuiteResult> {
        let grid = make_grid(6.0, 32)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..cases {
            let count = rng.random_range(1..=3);
            let bumps: Vec<(C64, [f64; 3], f64)> = (0..count)
                .map(|_| {
                    let w = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                    let c = [0; 3].map(|_| rng.random_range(-1.5..1.5));
                    (w, c, rng.random_range(0.7..1.5))
                })
                .collect();
            let phi = ScalarField::from_fn(grid, |x| {
                bumps
                    .iter()
                    .map(|(w, c, s)| {
                        let r2: f64 = (0..3).map(|i| (x[i] - c[i]).powi(2)).sum();
                        w * (-r2 / (2.0 * s * s)).exp()
                    })
                    .sum()
            });
            worst = worst.max(hardy_ratio(&phi)?);
        }
        Ok(SuiteResult {
            name: "hardy".into(),
            passed: worst <= HARDY_LIMIT,
            cases,
            worst,
            threshold: HARDY_LIMIT,
            detail: "largest ∫|φ|²/|x|² / ∫|∇φ|²".into(),
        })
    };
    run().unwrap_or_else(|e| SuiteResult::failed("hardy", e))
}

/// Diamagnetic gap for random band-limited spinors and random solenoidal
/// potentials on `[−4, 4)³`, 16³.
pub fn diamagnetic(cases: usize, seed: u64) -> SuiteResult {
    let run = || -> Result<SuiteResult> {
        let grid = make_grid(4.0, 16)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::INFINITY;
        for _ in 0..cases {
            let psi = random_band_limited_spinor(&grid, 3, rng.next_u64());
            let a = sample(
                &FieldSource::RandomDivFree {
                    seed: rng.next_u64(),
                    amplitude: rng.random_range(0.5..5.0),
                    correlation_length: rng.random_range(0.8..2.0),
                },
                &grid,
            )?;
            worst = worst.min(diamagnetic_gap(&psi, &a)? / psi.norm_sqr());
        }
        Ok(SuiteResult {
            name: "diamagnetic".into(),
            passed: worst >= -DIAMAGNETIC_SLACK,
            cases,
            worst,
            threshold: -DIAMAGNETIC_SLACK,
            detail: "smallest gap / ‖ψ‖²".into(),
        })
    };
    run().unwrap_or_else(|e| SuiteResult::failed("diamagnetic", e))
}

/// A random context for the oracle suite: random solenoidal B, coupling in
/// [0.5, 1.5].
pub fn random_context(grid: &GridSpec, rng: &mut ChaCha8Rng) -> Result<PauliContext> {
    let b = sample(
        &FieldSource::RandomDivFree {
            seed: rng.next_u64(),
            amplitude: rng.random_range(0.5..4.0),
            correlation_length: rng.random_range(0.8..1.5),
        },
        grid,
    )?;
    Ok(PauliContext::from_field(&b, rng.random_range(0.5..1.5))?.0)
}

/// LOBPCG against the dense oracle on `contexts` random contexts, with
/// `k = 1, …, 6` in turn. Relative error with eigenvalues below `1e-6`
/// compared absolutely.
pub fn oracle(grid: &GridSpec, contexts: usize, seed: u64) -> SuiteResult {
    let run = || -> Result<SuiteResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = LobpcgOptions {
            tol: 1e-9,
            max_iterations: 2000,
            seed,
            ..LobpcgOptions::default()
        };
        let mut worst = 0.0f64;
        for i in 0..contexts {
            let ctx = random_context(grid, &mut rng)?;
            let k = 1 + i % 6;
            let dense = dense_oracle(&ctx)?;
            let iter = smallest_eigs_with(&ctx, k, &opts, None)?;
            for (a, b) in iter.eigenvalues.iter().zip(&dense.eigenvalues) {
                worst = worst.max((a - b).abs() / b.abs().max(ORACLE_FLOOR));
            }
        }
        Ok(SuiteResult {
            name: "oracle".into(),
            passed: worst <= ORACLE_RTOL,
            cases: contexts,
            worst,
            threshold: ORACLE_RTOL,
            detail: format!("{}^3 grids, k = 1..6", grid.points_per_axis()),
        })
    };
    run().unwrap_or_else(|e| SuiteResult::failed("oracle", e))
}

/// Relative change of `λ_min` of the Loss–Yau context at `t` under random
/// gauge shifts.
pub fn gauge(grid: &GridSpec, t: f64, shifts: usize, seed: u64) -> SuiteResult {
    let run = || -> Result<SuiteResult> {
        let b = sample(&FieldSource::LossYau, grid)?;
        let ctx = PauliContext::from_field(&b, t)?.0;
        let opts = LobpcgOptions {
            tol: 1e-8,
            max_iterations: 2000,
            seed,
            ..LobpcgOptions::default()
        };
        let report = gauge_invariance(&ctx, shifts, seed, &opts)?;
        Ok(SuiteResult {
            name: "gauge".into(),
            passed: report.max_relative_change <= GAUGE_RTOL,
            cases: shifts,
            worst: report.max_relative_change,
            threshold: GAUGE_RTOL,
            detail: format!(
                "λ_min = {:.6e} at t = {t} on {}^3, L = {}",
                report.lambda_min,
                grid.points_per_axis(),
                grid.half_width()
            ),
        })
    };
    run().unwrap_or_else(|e| SuiteResult::failed("gauge", e))
}
