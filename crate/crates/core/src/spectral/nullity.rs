//! Numerical nullity: near-zero eigenvalues whose eigenvectors are localized
//! away from the faces of the box.
//!
//! Near-degenerate eigenvalues are treated as one block. Inside a block the
//! basis is rotated to diagonalize the boundary-shell mass, so a localized
//! mode mixed with a delocalized torus mode of almost the same energy is
//! separated before the filter is applied.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::lobpcg::{combine, gram};
use super::{smallest_eigs_with, LobpcgOptions, SpectralResult};
use crate::error::Result;
use crate::grid::{GridSpec, SpinorField};
use crate::linalg::C64;
use crate::pauli::PauliContext;

/// Thickness of the boundary shell as a fraction of the half width.
pub const SHELL_FRACTION: f64 = 0.1;
/// Largest shell mass fraction of a localized eigenvector.
pub const LOCALIZATION_MAX_SHELL_MASS: f64 = 0.05;

/// `10 (π/(2L))²`.
pub fn default_gap_tol(grid: &GridSpec) -> f64 {
    10.0 * (std::f64::consts::PI / (2.0 * grid.half_width())).powi(2)
}

fn in_shell(grid: &GridSpec, site: usize) -> bool {
    let inner = (1.0 - SHELL_FRACTION) * grid.half_width();
    grid.position(site).iter().any(|c| c.abs() >= inner)
}

/// Fraction of `|ψ|²` in the outer shell `max_i |x_i| ≥ 0.9 L`.
pub fn boundary_shell_mass(psi: &SpinorField) -> f64 {
    let grid = psi.grid();
    let dens = psi.density();
    let total: f64 = dens.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let shell: f64 = dens
        .iter()
        .enumerate()
        .filter(|(s, _)| in_shell(grid, *s))
        .map(|(_, d)| d)
        .sum();
    shell / total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub start: usize,
    pub size: usize,
    pub diameter: f64,
}

/// Groups ascending values whose consecutive gaps are at most `tol`.
pub fn clusters(values: &[f64], tol: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match out.last_mut() {
            Some(c) if v - values[i - 1] <= tol => {
                c.size += 1;
                c.diameter = v - values[c.start];
            }
            _ => out.push(Cluster {
                start: i,
                size: 1,
                diameter: 0.0,
            }),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullityOptions {
    pub gap_tol: f64,
    /// Eigenpairs computed.
    pub k: usize,
    /// Consecutive eigenvalues closer than this are resolved as a block.
    pub cluster_tol: f64,
    pub lobpcg: LobpcgOptions,
}

impl NullityOptions {
    pub fn for_grid(grid: &GridSpec) -> Self {
        let gap_tol = default_gap_tol(grid);
        NullityOptions {
            gap_tol,
            k: 6,
            cluster_tol: 0.05 * gap_tol,
            lobpcg: LobpcgOptions::default(),
        }
    }
}

/// One block-resolved near-kernel direction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolvedMode {
    /// Rayleigh quotient `⟨P v, v⟩`.
    pub value: f64,
    pub shell_mass: f64,
    pub localized: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NullityEstimate {
    pub nullity: usize,
    pub indeterminate: bool,
    pub gap_tol: f64,
    /// Smallest Rayleigh quotient among localized modes in the computed window.
    pub lambda_loc: Option<f64>,
    /// Shell mass of the `lambda_loc` mode (or the least delocalized mode if none).
    pub localization: f64,
    pub modes: Vec<ResolvedMode>,
    pub clusters: Vec<Cluster>,
    pub spectrum: SpectralResult,
    /// Unit localized vectors, ascending in value.
    #[serde(skip)]
    pub localized_vectors: Vec<SpinorField>,
}

pub fn nullity_estimate(ctx: &PauliContext, gap_tol: f64) -> Result<NullityEstimate> {
    let opts = NullityOptions {
        gap_tol,
        cluster_tol: 0.05 * gap_tol,
        ..NullityOptions::for_grid(ctx.grid())
    };
    nullity_estimate_with(ctx, &opts, None)
}

pub fn nullity_estimate_with(
    ctx: &PauliContext,
    opts: &NullityOptions,
    start: Option<&[Vec<C64>]>,
) -> Result<NullityEstimate> {
    let spectrum = smallest_eigs_with(ctx, opts.k.max(3), &opts.lobpcg, start)?;
    Ok(classify(spectrum, opts))
}

/// Applies the cluster resolution and the localization filter to a spectrum.
pub fn classify(spectrum: SpectralResult, opts: &NullityOptions) -> NullityEstimate {
    let grid = *spectrum.eigenvectors[0].grid();
    let shell_mask: Vec<f64> = (0..grid.sites()).map(|s| if in_shell(&grid, s) { 1.0 } else { 0.0 }).collect();
    let groups = clusters(&spectrum.eigenvalues, opts.cluster_tol);
    let mut resolved: Vec<(ResolvedMode, Vec<C64>)> = Vec::new();
    for cl in &groups {
        let range = cl.start..cl.start + cl.size;
        let vecs: Vec<Vec<C64>> = spectrum.eigenvectors[range.clone()]
            .iter()
            .map(|v| v.as_slice().to_vec())
            .collect();
        let lams = &spectrum.eigenvalues[range];
        let refs: Vec<&[C64]> = vecs.iter().map(|v| v.as_slice()).collect();
        let masked: Vec<Vec<C64>> = vecs
            .iter()
            .map(|v| {
                let n = grid.sites();
                v.iter().enumerate().map(|(i, x)| x * shell_mask[i % n]).collect()
            })
            .collect();
        let mrefs: Vec<&[C64]> = masked.iter().map(|v| v.as_slice()).collect();
        let norms = gram(&refs, &refs);
        let shell = gram(&refs, &mrefs);
        // Shell mass relative to the (unit) block basis.
        let total = norms[(0, 0)].re;
        let shell = (&shell + shell.adjoint()) * C64::new(0.5 / total, 0.0);
        let eig = SymmetricEigen::new(shell);
        let mut order: Vec<usize> = (0..cl.size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        for &i in &order {
            let c = eig.eigenvectors.column(i);
            let value: f64 = c.iter().zip(lams).map(|(ci, l)| ci.norm_sqr() * l).sum();
            let shell_mass = eig.eigenvalues[i].clamp(0.0, 1.0);
            let cm = DMatrix::from_column_slice(cl.size, 1, c.as_slice());
            let v = combine(&vecs, &cm).pop().expect("one column");
            resolved.push((
                ResolvedMode {
                    value,
                    shell_mass,
                    localized: shell_mass <= LOCALIZATION_MAX_SHELL_MASS,
                },
                v,
            ));
        }
    }
    resolved.sort_by(|a, b| a.0.value.total_cmp(&b.0.value));

    let gap = opts.gap_tol;
    let nullity = resolved.iter().filter(|(m, _)| m.localized && m.value < gap).count();
    let ambiguous = resolved
        .iter()
        .any(|(m, _)| m.localized && m.value >= gap / 3.0 && m.value <= 3.0 * gap);
    // Every computed eigenvalue below the threshold: the window may hide more.
    let window_full = spectrum.eigenvalues.last().is_some_and(|&l| l < gap)
        && resolved.iter().filter(|(m, _)| m.localized).count() == resolved.len();
    let unconverged = !spectrum.all_converged();
    let loc = resolved.iter().find(|(m, _)| m.localized);
    let lambda_loc = loc.map(|(m, _)| m.value);
    let localization = match loc {
        Some((m, _)) => m.shell_mass,
        None => resolved.iter().map(|(m, _)| m.shell_mass).fold(f64::INFINITY, f64::min),
    };
    let localized_vectors = resolved
        .iter()
        .filter(|(m, _)| m.localized)
        .map(|(_, v)| SpinorField::from_vec(grid, v.clone()).expect("grid-sized vector").normalized())
        .collect();
    NullityEstimate {
        nullity,
        indeterminate: ambiguous || window_full || unconverged,
        gap_tol: gap,
        lambda_loc,
        localization,
        modes: resolved.into_iter().map(|(m, _)| m).collect(),
        clusters: groups,
        spectrum,
        localized_vectors,
    }
}
