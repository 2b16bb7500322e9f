//! Locally optimal block preconditioned conjugate gradients for the smallest
//! eigenpairs of `A x = λ B x` (B = I when no mass operator is given).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{block, to_spinors, LinearOperator, PauliOperator, SpectralResult};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::pauli::PauliContext;

const ZERO: C64 = C64::new(0.0, 0.0);
/// Relative Gram eigenvalue below which a basis direction counts as dependent.
const DROP_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LobpcgOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Extra block columns iterated but not reported.
    pub guard: usize,
    pub seed: u64,
}

impl Default for LobpcgOptions {
    fn default() -> Self {
        LobpcgOptions {
            tol: 1e-6,
            max_iterations: 400,
            guard: 2,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LobpcgOutput {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: Vec<bool>,
}

/// `smallest_eigs` on the Pauli operator of a context with default options.
pub fn smallest_eigs(ctx: &PauliContext, k: usize, tol: f64) -> Result<SpectralResult> {
    smallest_eigs_with(ctx, k, &LobpcgOptions { tol, ..Default::default() }, None)
}

/// `smallest_eigs` with explicit options and an optional warm-start block.
pub fn smallest_eigs_with(
    ctx: &PauliContext,
    k: usize,
    opts: &LobpcgOptions,
    start: Option<&[Vec<C64>]>,
) -> Result<SpectralResult> {
    if !(1..=10).contains(&k) {
        return Err(Error::InvalidArgument(format!("smallest_eigs needs 1 ≤ k ≤ 10, got {k}")));
    }
    let op = PauliOperator::new(ctx);
    let out = lobpcg(&op, None, k, opts, start)?;
    Ok(SpectralResult {
        eigenvalues: out.values,
        eigenvectors: to_spinors(ctx, out.vectors)?,
        residuals: out.residuals,
        iterations: out.iterations,
        converged: out.converged,
    })
}

pub fn lobpcg(
    op: &dyn LinearOperator,
    mass: Option<&dyn LinearOperator>,
    k: usize,
    opts: &LobpcgOptions,
    start: Option<&[Vec<C64>]>,
) -> Result<LobpcgOutput> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!("cannot compute {k} eigenpairs in dimension {dim}")));
    }
    let m = (k + opts.guard).min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random = |len: usize| -> Vec<C64> {
        (0..len)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im)
            })
            .collect()
    };

    // Start block: B-orthonormal, then rotated to Ritz vectors.
    let mut x: Vec<Vec<C64>> = start.unwrap_or(&[]).iter().take(m).cloned().collect();
    let mut attempts = 0;
    let mut x = loop {
        while x.len() < m {
            x.push(random(dim));
        }
        x.iter_mut().for_each(|v| op.constrain(v));
        let bx = images(mass, &x)?;
        let c = orthonormalize(&x, bx.as_deref())?;
        if c.ncols() == m {
            break Block::new(op, mass, combine(&x, &c))?;
        }
        x = combine(&x, &c);
        attempts += 1;
        if attempts > 5 {
            return Err(Error::Eigensolver("could not build a full-rank start block".into()));
        }
    };
    let mut values = {
        let (theta, c) = ritz(&hermitian(x.gram_a(&x)), &hermitian(x.gram_b(&x)))?;
        x = x.rotate(&c.columns(0, m).into_owned());
        theta[..m].to_vec()
    };
    let mut p: Option<Block> = None;
    let mut residuals;
    let mut iterations = 0;
    let mut fresh = true;
    let tol = |i: usize, vals: &[f64]| opts.tol * vals[i].abs().max(1.0);

    loop {
        let mut r = x.residuals(&values);
        residuals = r.iter().map(|(_, n)| *n).collect::<Vec<f64>>();
        let done = |res: &[f64]| (0..k).all(|i| res[i] <= tol(i, &values));
        if done(&residuals) && !fresh {
            // Confirm against freshly applied operators before stopping.
            x = Block::new(op, mass, std::mem::take(&mut x.v))?;
            r = x.residuals(&values);
            residuals = r.iter().map(|(_, n)| *n).collect();
        }
        fresh = false;
        if done(&residuals) || iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        // Preconditioned residuals of the unconverged columns, B-orthogonal
        // to X and B-orthonormal among themselves.
        let mut w: Vec<Vec<C64>> = (0..m)
            .filter(|&i| residuals[i] > tol(i, &values))
            .map(|i| {
                let mut z = vec![ZERO; dim];
                op.precondition(&r[i].0, &mut z);
                z
            })
            .collect();
        drop(r);
        for _ in 0..2 {
            let coeffs = gram(&refs(x.b()), &refs(&w));
            subtract_combination(&x.v, &coeffs, &mut w);
        }
        let bw = images(mass, &w)?;
        let c = orthonormalize(&w, bw.as_deref())?;
        if c.ncols() == 0 {
            break; // stagnation: nothing left to expand with
        }
        let w = Block::with_images(op, combine(&w, &c), bw.map(|b| combine(&b, &c)))?;

        // Rayleigh–Ritz on span[X, W, P]. X is B-orthonormal with X^H A X = diag(θ).
        let blocks: Vec<&Block> = [Some(&x), Some(&w), p.as_ref()].into_iter().flatten().collect();
        let sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
        let n: usize = sizes.iter().sum();
        let s: Vec<&[C64]> = blocks.iter().flat_map(|b| refs(&b.v)).collect();
        let tail_a: Vec<&[C64]> = blocks[1..].iter().flat_map(|b| refs(&b.av)).collect();
        let tail_b: Vec<&[C64]> = blocks[1..].iter().flat_map(|b| refs(b.b())).collect();
        let (ga_tail, gb_tail) = (gram(&s, &tail_a), gram(&s, &tail_b));
        let mut ga = DMatrix::zeros(n, n);
        let mut gb = DMatrix::zeros(n, n);
        for i in 0..m {
            ga[(i, i)] = C64::new(values[i], 0.0);
            gb[(i, i)] = C64::new(1.0, 0.0);
        }
        ga.columns_mut(m, n - m).copy_from(&ga_tail);
        gb.columns_mut(m, n - m).copy_from(&gb_tail);
        for i in m..n {
            for j in 0..m {
                ga[(i, j)] = ga[(j, i)].conj();
                gb[(i, j)] = gb[(j, i)].conj();
            }
        }
        let (theta, c) = ritz(&hermitian(ga), &hermitian(gb))?;
        let take = m.min(theta.len());
        let cx = c.columns(0, take).into_owned();
        // P ← the [W, P] part of the new Ritz vectors; X ← X C_X + P.
        let cwp = cx.rows(m, n - m).into_owned();
        let tail: Vec<&Block> = blocks[1..].to_vec();
        let new_p = Block::combined(&tail, &cwp);
        let cxx = cx.rows(0, m).into_owned();
        let mut new_x = x.rotate(&cxx);
        new_x.add(&new_p);
        drop(blocks);
        drop(s);
        drop(tail_a);
        drop(tail_b);
        x = new_x;
        p = Some(new_p);
        values = theta[..take].to_vec();
    }

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let kk = k.min(values.len());
    let converged: Vec<bool> = order[..kk].iter().map(|&i| residuals[i] <= tol(i, &values)).collect();
    Ok(LobpcgOutput {
        values: order[..kk].iter().map(|&i| values[i]).collect(),
        vectors: order[..kk].iter().map(|&i| x.v[i].clone()).collect(),
        residuals: order[..kk].iter().map(|&i| residuals[i]).collect(),
        iterations,
        converged,
    })
}

fn refs(v: &[Vec<C64>]) -> Vec<&[C64]> {
    v.iter().map(|x| x.as_slice()).collect()
}

/// Vectors with their images under A and (when present) B.
struct Block {
    v: Vec<Vec<C64>>,
    av: Vec<Vec<C64>>,
    bv: Option<Vec<Vec<C64>>>,
}

impl Block {
    fn new(op: &dyn LinearOperator, mass: Option<&dyn LinearOperator>, v: Vec<Vec<C64>>) -> Result<Self> {
        let bv = images(mass, &v)?;
        Block::with_images(op, v, bv)
    }

    fn with_images(op: &dyn LinearOperator, v: Vec<Vec<C64>>, bv: Option<Vec<Vec<C64>>>) -> Result<Self> {
        let av = apply_all(op, &v)?;
        Ok(Block { v, av, bv })
    }

    fn len(&self) -> usize {
        self.v.len()
    }

    /// `B v`, which is `v` itself without a mass operator.
    fn b(&self) -> &[Vec<C64>] {
        self.bv.as_deref().unwrap_or(&self.v)
    }

    fn gram_a(&self, other: &Block) -> DMatrix<C64> {
        gram(&refs(&self.v), &refs(&other.av))
    }

    fn gram_b(&self, other: &Block) -> DMatrix<C64> {
        gram(&refs(&self.v), &refs(other.b()))
    }

    fn rotate(&self, c: &DMatrix<C64>) -> Block {
        Block {
            v: combine(&self.v, c),
            av: combine(&self.av, c),
            bv: self.bv.as_ref().map(|b| combine(b, c)),
        }
    }

    /// `Σ_b blocks[b] C_b` with the rows of `c` split by block.
    fn combined(blocks: &[&Block], c: &DMatrix<C64>) -> Block {
        let v: Vec<&[C64]> = blocks.iter().flat_map(|b| refs(&b.v)).collect();
        let av: Vec<&[C64]> = blocks.iter().flat_map(|b| refs(&b.av)).collect();
        let bv = blocks[0].bv.is_some().then(|| {
            let bv: Vec<&[C64]> = blocks.iter().flat_map(|b| refs(b.b())).collect();
            block::combine(&bv, c)
        });
        Block {
            v: block::combine(&v, c),
            av: block::combine(&av, c),
            bv,
        }
    }

    fn add(&mut self, other: &Block) {
        let one = C64::new(1.0, 0.0);
        for (a, b) in self.v.iter_mut().zip(&other.v) {
            linalg::axpy(one, b, a);
        }
        for (a, b) in self.av.iter_mut().zip(&other.av) {
            linalg::axpy(one, b, a);
        }
        if let (Some(sb), Some(ob)) = (self.bv.as_mut(), other.bv.as_ref()) {
            for (a, b) in sb.iter_mut().zip(ob) {
                linalg::axpy(one, b, a);
            }
        }
    }

    /// `(R_i, ‖R_i‖ / ‖B x_i‖)` with `R_i = A x_i − λ_i B x_i`.
    fn residuals(&self, values: &[f64]) -> Vec<(Vec<C64>, f64)> {
        self.av
            .iter()
            .zip(self.b())
            .zip(values)
            .map(|((axi, bxi), &lam)| {
                let mut r = axi.clone();
                linalg::axpy(C64::new(-lam, 0.0), bxi, &mut r);
                let scale = linalg::norm(bxi).max(f64::MIN_POSITIVE);
                let n = linalg::norm(&r) / scale;
                (r, n)
            })
            .collect()
    }
}

fn images(mass: Option<&dyn LinearOperator>, v: &[Vec<C64>]) -> Result<Option<Vec<Vec<C64>>>> {
    mass.map(|b| apply_all(b, v)).transpose()
}

fn apply_all(op: &dyn LinearOperator, vs: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    vs.iter()
        .map(|v| {
            let mut out = vec![ZERO; v.len()];
            op.apply(v, &mut out)?;
            Ok(out)
        })
        .collect()
}

/// Coefficients `C` such that `V C` is B-orthonormal, dropping dependent
/// directions. `bv` holds `B V` (None for B = I).
fn orthonormalize(v: &[Vec<C64>], bv: Option<&[Vec<C64>]>) -> Result<DMatrix<C64>> {
    if v.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    let g = hermitian(gram(&refs(v), &refs(bv.unwrap_or(v))));
    let n = g.nrows();
    let d: Vec<f64> = (0..n).map(|i| g[(i, i)].re.max(0.0)).collect();
    let dmax = d.iter().cloned().fold(0.0, f64::max);
    if dmax == 0.0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let dinv: Vec<f64> = d
        .iter()
        .map(|&x| if x > DROP_TOL * dmax { 1.0 / x.sqrt() } else { 0.0 })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| g[(i, j)] * dinv[i] * dinv[j]);
    let eig = SymmetricEigen::new(scaled);
    let tmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > DROP_TOL * tmax).collect();
    let mut c = DMatrix::zeros(n, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let s = 1.0 / eig.eigenvalues[i].sqrt();
        for r in 0..n {
            c[(r, col)] = eig.eigenvectors[(r, i)] * dinv[r] * s;
        }
    }
    Ok(c)
}

/// Generalized Rayleigh–Ritz: ascending θ and coefficients with `C^H G_B C = I`.
fn ritz(ga: &DMatrix<C64>, gb: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let n = gb.nrows();
    let eig = SymmetricEigen::new(gb.clone());
    let tmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if !(tmax > 0.0) {
        return Err(Error::Eigensolver("degenerate Rayleigh–Ritz basis".into()));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > DROP_TOL * tmax).collect();
    let mut z = DMatrix::zeros(n, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let s = 1.0 / eig.eigenvalues[i].sqrt();
        for r in 0..n {
            z[(r, col)] = eig.eigenvectors[(r, i)] * s;
        }
    }
    let h = hermitian(z.adjoint() * ga * &z);
    let he = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..he.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| he.eigenvalues[a].total_cmp(&he.eigenvalues[b]));
    if order.iter().any(|&i| !he.eigenvalues[i].is_finite()) {
        return Err(Error::Eigensolver("non-finite Ritz value".into()));
    }
    let theta: Vec<f64> = order.iter().map(|&i| he.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(he.eigenvectors.nrows(), order.len(), |r, c| he.eigenvectors[(r, order[c])]);
    Ok((theta, z * y))
}

fn hermitian(m: DMatrix<C64>) -> DMatrix<C64> {
    let mh = m.adjoint();
    (m + mh) * C64::new(0.5, 0.0)
}

pub(crate) fn gram(a: &[&[C64]], b: &[&[C64]]) -> DMatrix<C64> {
    block::gram(a, b)
}

/// `out_j = Σ_i v_i C[i, j]`.
pub(crate) fn combine(v: &[Vec<C64>], c: &DMatrix<C64>) -> Vec<Vec<C64>> {
    let refs: Vec<&[C64]> = v.iter().map(|x| x.as_slice()).collect();
    block::combine(&refs, c)
}

/// `v_j -= Σ_i q_i C[i, j]`.
fn subtract_combination(q: &[Vec<C64>], c: &DMatrix<C64>, v: &mut [Vec<C64>]) {
    for (vj, dj) in v.iter_mut().zip(combine(q, c)) {
        linalg::axpy(C64::new(-1.0, 0.0), &dj, vj);
    }
}
