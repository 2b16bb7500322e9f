//! Coupling sweeps `t ↦ P_{tA}`, zero-mode detection and refinement,
//! perturbation and grid-convergence experiments.
//!
//! Two channels flag a zero coupling. The direct channel looks for a local
//! minimum of the lowest localized Pauli eigenvalue below `gap_tol`. The
//! Birman–Schwinger channel looks for a local maximum of the top eigenvalue
//! `μ` of the mean-free operator with `1 − μ ≤ bs_tol`. Brackets from either
//! channel are refined by golden-section search and both channels are
//! re-evaluated at the refined coupling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{lp_norm, sample, FieldSource};
use crate::gauge::GaugeData;
use crate::grid::{GridSpec, SpinorField};
use crate::linalg::C64;
use crate::fields::random_band_limited_scalar;
use crate::gauge::gauge_shift;
use crate::grid::ScalarField;
use crate::pauli::{PauliContext, SolverOptions};
use crate::spectral::{
    bs_top_pencil, nullity_estimate_with, smallest_eigs_with, LobpcgOptions, NullityEstimate, NullityOptions,
};

/// Inverse golden ratio.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub nullity: NullityOptions,
    /// Number of top Birman–Schwinger eigenvalues per record.
    pub bs_k: usize,
    pub bs: LobpcgOptions,
    /// Largest `1 − μ` accepted by the Birman–Schwinger channel.
    pub bs_tol: f64,
    /// Start each solve from the eigenvectors of the previous coupling.
    pub warm_start: bool,
    /// Inner solves with `P_t`.
    pub solver: SolverOptions,
}

impl SweepOptions {
    pub fn for_grid(grid: &GridSpec) -> Self {
        let mut nullity = NullityOptions::for_grid(grid);
        nullity.lobpcg.tol = 1e-4;
        SweepOptions {
            nullity,
            bs_k: 3,
            bs: LobpcgOptions {
                tol: 1e-4,
                ..LobpcgOptions::default()
            },
            bs_tol: 0.02,
            warm_start: true,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordStats {
    pub pauli_iterations: usize,
    pub pauli_converged: bool,
    pub bs_iterations: usize,
    pub bs_converged: bool,
}

/// Spectral observables at one coupling. Missing values mark a failed stage,
/// described in `failures`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub t: f64,
    /// Smallest computed Pauli eigenvalue (torus modes included).
    pub lambda_min: Option<f64>,
    /// Smallest eigenvalue with a localized eigenvector, if any is in the window.
    pub lambda_loc: Option<f64>,
    /// Gap between the two smallest computed eigenvalues.
    pub next_gap: Option<f64>,
    /// Top Birman–Schwinger eigenvalues, descending.
    pub bs_top: Vec<f64>,
    pub nullity: Option<usize>,
    pub localization: Option<f64>,
    pub indeterminate: bool,
    pub stats: RecordStats,
    pub failures: Vec<String>,
}

impl SweepRecord {
    fn empty(t: f64) -> Self {
        SweepRecord {
            t,
            lambda_min: None,
            lambda_loc: None,
            next_gap: None,
            bs_top: Vec::new(),
            nullity: None,
            localization: None,
            indeterminate: false,
            stats: RecordStats::default(),
            failures: Vec::new(),
        }
    }

    pub fn bs_max(&self) -> Option<f64> {
        self.bs_top.first().copied()
    }

    fn fill_pauli(&mut self, est: &NullityEstimate) {
        let ev = &est.spectrum.eigenvalues;
        self.lambda_min = ev.first().map(|v| v.max(0.0));
        self.next_gap = (ev.len() > 1).then(|| ev[1] - ev[0]);
        self.lambda_loc = est.lambda_loc.map(|v| v.max(0.0));
        self.nullity = Some(est.nullity);
        self.localization = Some(est.localization);
        self.indeterminate = est.indeterminate;
        self.stats.pauli_iterations = est.spectrum.iterations;
        self.stats.pauli_converged = est.spectrum.all_converged();
    }
}

/// Evaluates the spectral pipeline along a coupling path for one field.
pub struct SweepRunner {
    ctx: PauliContext,
    pub opts: SweepOptions,
    warm_pauli: Option<Vec<Vec<C64>>>,
    warm_bs: Option<Vec<Vec<C64>>>,
}

impl SweepRunner {
    pub fn new(source: &FieldSource, grid: &GridSpec, opts: SweepOptions) -> Result<(Self, GaugeData)> {
        let b = sample(source, grid)?;
        let (mut ctx, gauge) = PauliContext::from_field(&b, 1.0)?;
        ctx.solver = opts.solver;
        Ok((SweepRunner::from_context(ctx, opts), gauge))
    }

    pub fn from_context(ctx: PauliContext, opts: SweepOptions) -> Self {
        SweepRunner {
            ctx,
            opts,
            warm_pauli: None,
            warm_bs: None,
        }
    }

    pub fn context(&self) -> &PauliContext {
        &self.ctx
    }

    /// Forgets warm-start vectors.
    pub fn reset(&mut self) {
        self.warm_pauli = None;
        self.warm_bs = None;
    }

    fn pauli(&mut self, ctx: &PauliContext) -> Result<NullityEstimate> {
        let start = if self.opts.warm_start { self.warm_pauli.as_deref() } else { None };
        let est = nullity_estimate_with(ctx, &self.opts.nullity, start)?;
        if self.opts.warm_start {
            self.warm_pauli = Some(est.spectrum.eigenvectors.iter().map(|v| v.as_slice().to_vec()).collect());
        }
        Ok(est)
    }

    fn bs(&mut self, ctx: &PauliContext, record: &mut SweepRecord) -> Result<()> {
        let start = if self.opts.warm_start { self.warm_bs.as_deref() } else { None };
        let res = bs_top_pencil(ctx, self.opts.bs_k, &self.opts.bs, start)?;
        record.bs_top = res.mu.clone();
        record.stats.bs_iterations = res.iterations;
        record.stats.bs_converged = res.converged.iter().all(|&c| c);
        if self.opts.warm_start {
            self.warm_bs = Some(res.vectors);
        }
        Ok(())
    }

    /// Full pipeline at `t`; also returns the localized eigenvectors.
    pub fn evaluate_full(&mut self, t: f64) -> (SweepRecord, Vec<SpinorField>) {
        let mut record = SweepRecord::empty(t);
        let ctx = match self.ctx.with_coupling(t) {
            Ok(c) => c,
            Err(e) => {
                record.failures.push(e.to_string());
                return (record, Vec::new());
            }
        };
        let mut vectors = Vec::new();
        match self.pauli(&ctx) {
            Ok(est) => {
                record.fill_pauli(&est);
                vectors = est.localized_vectors;
            }
            Err(e) => {
                self.warm_pauli = None;
                record.failures.push(format!("pauli spectrum: {e}"));
            }
        }
        if let Err(e) = self.bs(&ctx, &mut record) {
            self.warm_bs = None;
            record.failures.push(format!("birman-schwinger: {e}"));
        }
        (record, vectors)
    }

    pub fn evaluate(&mut self, t: f64) -> SweepRecord {
        self.evaluate_full(t).0
    }

    /// `1 − μ_top(t)` from the Birman–Schwinger channel alone.
    pub fn bs_defect(&mut self, t: f64) -> Result<f64> {
        let ctx = self.ctx.with_coupling(t)?;
        let mut record = SweepRecord::empty(t);
        self.bs(&ctx, &mut record)?;
        Ok(1.0 - record.bs_top[0])
    }

    /// `λ_loc(t)` from the direct channel alone (infinite when no localized
    /// mode is in the window).
    pub fn dip_value(&mut self, t: f64) -> Result<f64> {
        let ctx = self.ctx.with_coupling(t)?;
        Ok(self.pauli(&ctx)?.lambda_loc.unwrap_or(f64::INFINITY))
    }

    pub fn sweep(&mut self, range: (f64, f64), step: f64) -> Result<Vec<SweepRecord>> {
        let ts = coupling_points(range, step)?;
        Ok(ts.into_iter().map(|t| self.evaluate(t)).collect())
    }
}

/// `a, a + step, …` up to `b` (inclusive within rounding).
pub fn coupling_points(range: (f64, f64), step: f64) -> Result<Vec<f64>> {
    let (a, b) = range;
    if !(a > 0.0) || !(b > a) || !b.is_finite() {
        return Err(Error::InvalidArgument(format!("coupling range needs 0 < a < b, got [{a}, {b}]")));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("coupling step must be > 0, got {step}")));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| a + i as f64 * step).collect())
}

pub fn run_sweep(source: &FieldSource, grid: &GridSpec, range: (f64, f64), step: f64) -> Result<Vec<SweepRecord>> {
    coupling_points(range, step)?;
    let (mut runner, _) = SweepRunner::new(source, grid, SweepOptions::for_grid(grid))?;
    runner.sweep(range, step)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channels {
    pub dip: bool,
    pub bs: bool,
}

/// A bracketed coupling interval flagged by at least one channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub bracket: (f64, f64),
    /// Sweep coupling with the most pronounced signal.
    pub center: f64,
    pub channels: Channels,
}

/// Interior local extrema of the two channels, merged when their brackets
/// overlap or their centers are closer than `resolution`.
pub fn find_candidates(records: &[SweepRecord], gap_tol: f64, bs_tol: f64, resolution: f64) -> Vec<Candidate> {
    let n = records.len();
    let dip = |i: usize| records[i].lambda_loc.unwrap_or(f64::INFINITY);
    let defect = |i: usize| records[i].bs_max().map_or(f64::INFINITY, |m| 1.0 - m);
    let mut found: Vec<(usize, Channels, f64)> = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let is_dip = dip(i) < gap_tol && dip(i) <= dip(i - 1) && dip(i) <= dip(i + 1);
        let is_bs = defect(i) <= bs_tol && defect(i) <= defect(i - 1) && defect(i) <= defect(i + 1);
        if is_dip || is_bs {
            let score = if is_bs { defect(i) } else { dip(i) };
            found.push((
                i,
                Channels {
                    dip: is_dip,
                    bs: is_bs,
                },
                score,
            ));
        }
    }
    let mut out: Vec<(Candidate, f64)> = Vec::new();
    for (i, channels, score) in found {
        let cand = Candidate {
            bracket: (records[i - 1].t, records[i + 1].t),
            center: records[i].t,
            channels,
        };
        match out.last_mut() {
            Some((prev, prev_score))
                if cand.bracket.0 < prev.bracket.1 || (cand.center - prev.center).abs() < resolution =>
            {
                prev.bracket = (prev.bracket.0.min(cand.bracket.0), prev.bracket.1.max(cand.bracket.1));
                // Prefer the Birman–Schwinger signal, then the stronger one.
                let better = (cand.channels.bs && !prev.channels.bs)
                    || (cand.channels.bs == prev.channels.bs && score < *prev_score);
                if better {
                    prev.center = cand.center;
                    *prev_score = score;
                }
                prev.channels.dip |= cand.channels.dip;
                prev.channels.bs |= cand.channels.bs;
            }
            _ => out.push((cand, score)),
        }
    }
    out.into_iter().map(|(c, _)| c).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub t: f64,
    /// `1 − μ_top` or `λ_loc`, whichever channel drives the refinement.
    pub objective: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Detection {
    pub t_star: f64,
    pub multiplicity: usize,
    pub bracket: (f64, f64),
    pub history: Vec<RefinementStep>,
    /// Channels that flagged the bracket in the sweep.
    pub channels: Channels,
    /// Both channels fire at `t_star` and agreed in the sweep.
    pub consistent: bool,
    /// Pipeline output at `t_star`.
    pub record: SweepRecord,
    /// File holding the localized eigenvectors at `t_star`, when saved.
    pub snapshot: Option<String>,
    #[serde(skip)]
    pub eigenvectors: Vec<SpinorField>,
}

/// Golden-section minimization of `f` on `[lo, hi]` until the bracket is at
/// most `resolution` wide. Returns the best interior point, the final bracket
/// and every evaluation.
pub fn golden_section(
    mut f: impl FnMut(f64) -> Result<f64>,
    (mut lo, mut hi): (f64, f64),
    resolution: f64,
) -> Result<(f64, (f64, f64), Vec<RefinementStep>)> {
    if !(hi > lo) || !(resolution > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "golden-section needs lo < hi and resolution > 0, got [{lo}, {hi}], {resolution}"
        )));
    }
    let mut history = Vec::new();
    let mut eval = |t: f64, history: &mut Vec<RefinementStep>| -> Result<f64> {
        let v = f(t)?;
        history.push(RefinementStep { t, objective: v });
        Ok(v)
    };
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = eval(c, &mut history)?;
    let mut fd = eval(d, &mut history)?;
    while hi - lo > resolution {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = eval(c, &mut history)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = eval(d, &mut history)?;
        }
    }
    let best = if fc <= fd { c } else { d };
    Ok((best, (lo, hi), history))
}

/// Refines every candidate of a completed sweep and evaluates both channels
/// at the refined coupling. Detections closer than `resolution` are merged.
pub fn detect_zeros(runner: &mut SweepRunner, records: &[SweepRecord], resolution: f64) -> Result<Vec<Detection>> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument(format!("resolution must be > 0, got {resolution}")));
    }
    let gap_tol = runner.opts.nullity.gap_tol;
    let bs_tol = runner.opts.bs_tol;
    let mut out: Vec<Detection> = Vec::new();
    for cand in find_candidates(records, gap_tol, bs_tol, resolution) {
        let (t_star, bracket, history) = if cand.channels.bs {
            golden_section(|t| runner.bs_defect(t), cand.bracket, resolution)?
        } else {
            golden_section(|t| runner.dip_value(t), cand.bracket, resolution)?
        };
        let (record, eigenvectors) = runner.evaluate_full(t_star);
        let dip_ok = record.lambda_loc.is_some_and(|v| v < gap_tol);
        let bs_ok = record.bs_max().is_some_and(|m| (1.0 - m).abs() <= bs_tol);
        let det = Detection {
            t_star,
            multiplicity: record.nullity.unwrap_or(0),
            bracket,
            history,
            channels: cand.channels,
            consistent: cand.channels.dip && cand.channels.bs && dip_ok && bs_ok,
            record,
            snapshot: None,
            eigenvectors,
        };
        match out.last_mut() {
            Some(prev) if (det.t_star - prev.t_star).abs() < resolution => {
                let objective = |d: &Detection| d.record.bs_max().map_or(f64::INFINITY, |m| 1.0 - m);
                if objective(&det) < objective(prev) {
                    *prev = det;
                }
            }
            _ => out.push(det),
        }
    }
    Ok(out)
}

/// Largest `|Δ²μ|` over largest `|Δμ|` along the top Birman–Schwinger curve.
pub fn smoothness_ratio(records: &[SweepRecord]) -> Option<f64> {
    let mu: Vec<f64> = records.iter().map(|r| r.bs_max()).collect::<Option<_>>()?;
    if mu.len() < 3 {
        return None;
    }
    let first = mu.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let second = mu.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).fold(0.0, f64::max);
    Some(if first == 0.0 { 0.0 } else { second / first })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeInvarianceReport {
    pub t: f64,
    pub lambda_min: f64,
    /// `λ_min` after each random gauge change.
    pub shifted: Vec<f64>,
    pub max_relative_change: f64,
}

/// Recomputes `λ_min` with `A + ∇f` for `shifts` random smooth real `f`
/// (Fourier modes `|m_j| ≤ 2`, `max|f| = 1`).
pub fn gauge_invariance(
    ctx: &PauliContext,
    shifts: usize,
    seed: u64,
    opts: &LobpcgOptions,
) -> Result<GaugeInvarianceReport> {
    let grid = *ctx.grid();
    let lambda_min = smallest_eigs_with(ctx, 3, opts, None)?.eigenvalues[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shifted = Vec::with_capacity(shifts);
    for _ in 0..shifts {
        let raw = random_band_limited_scalar(&grid, 2, rng.next_u64());
        let peak = raw.values().iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        let f = ScalarField::from_values(grid, raw.values().iter().map(|v| C64::new(v.re / peak, 0.0)).collect())?;
        let moved = ctx.with_potential(gauge_shift(ctx.a(), &f)?)?;
        shifted.push(smallest_eigs_with(&moved, 3, opts, None)?.eigenvalues[0]);
    }
    let max_relative_change = shifted
        .iter()
        .map(|v| (v - lambda_min).abs() / lambda_min.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(GaugeInvarianceReport {
        t: ctx.t(),
        lambda_min,
        shifted,
        max_relative_change,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub trial: usize,
    pub seed: u64,
    pub epsilon: f64,
    /// L^{3/2} norm of the perturbation as sampled.
    pub measured_norm: f64,
    pub lambda_min_before: Option<f64>,
    pub lambda_min_after: Option<f64>,
    pub lambda_loc_before: Option<f64>,
    pub lambda_loc_after: Option<f64>,
    pub bs_top_before: Vec<f64>,
    pub bs_top_after: Vec<f64>,
    pub nullity_before: Option<usize>,
    pub nullity_after: Option<usize>,
    pub failures: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationOptions {
    pub correlation_length: f64,
    /// Coupling at which nullities are compared.
    pub t: f64,
}

impl Default for PerturbationOptions {
    fn default() -> Self {
        PerturbationOptions {
            correlation_length: 1.0,
            t: 1.0,
        }
    }
}

pub fn perturb_experiment(
    base: &FieldSource,
    epsilon: f64,
    trials: usize,
    seed: u64,
    grid: &GridSpec,
) -> Result<Vec<PerturbationReport>> {
    perturb_experiment_with(base, epsilon, trials, seed, grid, &SweepOptions::for_grid(grid), &PerturbationOptions::default())
}

/// Adds `trials` random solenoidal perturbations of L^{3/2} size `epsilon` to
/// `base` and compares the spectra at coupling `popts.t`. Every solve starts
/// cold, so reports depend only on the arguments.
pub fn perturb_experiment_with(
    base: &FieldSource,
    epsilon: f64,
    trials: usize,
    seed: u64,
    grid: &GridSpec,
    opts: &SweepOptions,
    popts: &PerturbationOptions,
) -> Result<Vec<PerturbationReport>> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be finite and ≥ 0, got {epsilon}")));
    }
    let opts = SweepOptions {
        warm_start: false,
        ..*opts
    };
    let (mut runner, _) = SweepRunner::new(base, grid, opts)?;
    let before = runner.evaluate(popts.t);
    if let Some(f) = before.failures.first() {
        return Err(Error::Eigensolver(format!("base spectrum failed: {f}")));
    }
    if before.nullity.unwrap_or(0) == 0 {
        return Err(Error::InvalidArgument(format!(
            "the base field has no confirmed zero mode at t = {}; nothing to perturb",
            popts.t
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(trials);
    for trial in 0..trials {
        let trial_seed = rng.next_u64();
        let mut report = PerturbationReport {
            trial,
            seed: trial_seed,
            epsilon,
            measured_norm: 0.0,
            lambda_min_before: before.lambda_min,
            lambda_min_after: None,
            lambda_loc_before: before.lambda_loc,
            lambda_loc_after: None,
            bs_top_before: before.bs_top.clone(),
            bs_top_after: Vec::new(),
            nullity_before: before.nullity,
            nullity_after: None,
            failures: Vec::new(),
        };
        let perturbation = FieldSource::RandomDivFree {
            seed: trial_seed,
            amplitude: epsilon,
            correlation_length: popts.correlation_length,
        };
        let outcome = (|| -> Result<SweepRecord> {
            let delta = sample(&perturbation, grid)?;
            report.measured_norm = lp_norm(&delta, 1.5)?.value;
            let source = FieldSource::Sum(vec![base.clone(), FieldSource::GridData(delta)]);
            let (mut r, _) = SweepRunner::new(&source, grid, opts)?;
            Ok(r.evaluate(popts.t))
        })();
        match outcome {
            Ok(after) => {
                report.lambda_min_after = after.lambda_min;
                report.lambda_loc_after = after.lambda_loc;
                report.bs_top_after = after.bs_top;
                report.nullity_after = after.nullity;
                report.failures = after.failures;
            }
            Err(e) => report.failures.push(e.to_string()),
        }
        reports.push(report);
    }
    Ok(reports)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionWindow {
    pub range: (f64, f64),
    pub step: f64,
    pub resolution: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub half_width: f64,
    pub points_per_axis: usize,
    pub record: SweepRecord,
    /// Detected coupling nearest to `t`, when a detection window was given.
    pub t_star: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub t: f64,
    pub rows: Vec<ConvergenceRow>,
    /// `|λ_min(g_{i+1}) − λ_min(g_i)|`.
    pub lambda_min_differences: Vec<f64>,
    pub lambda_loc_differences: Vec<f64>,
    pub bs_top_differences: Vec<f64>,
    pub t_star_drift: Option<f64>,
}

impl ConvergenceTable {
    /// Successive `λ_min` differences never grow.
    pub fn lambda_min_monotone(&self) -> bool {
        self.lambda_min_differences.windows(2).all(|w| w[1] <= w[0])
    }
}

pub fn convergence_study(source: &FieldSource, t: f64, grids: &[GridSpec]) -> Result<ConvergenceTable> {
    convergence_study_with(source, t, grids, None)
}

pub fn convergence_study_with(
    source: &FieldSource,
    t: f64,
    grids: &[GridSpec],
    window: Option<&DetectionWindow>,
) -> Result<ConvergenceTable> {
    if grids.len() < 2 {
        return Err(Error::InvalidArgument("a convergence study needs at least two grids".into()));
    }
    let mut rows = Vec::with_capacity(grids.len());
    for grid in grids {
        let (mut runner, _) = SweepRunner::new(source, grid, SweepOptions::for_grid(grid))?;
        let t_star = match window {
            Some(w) => {
                let records = runner.sweep(w.range, w.step)?;
                let found = detect_zeros(&mut runner, &records, w.resolution)?;
                found
                    .iter()
                    .map(|d| d.t_star)
                    .min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()))
            }
            None => None,
        };
        runner.reset();
        let record = runner.evaluate(t);
        rows.push(ConvergenceRow {
            half_width: grid.half_width(),
            points_per_axis: grid.points_per_axis(),
            record,
            t_star,
        });
    }
    let diffs = |f: &dyn Fn(&SweepRecord) -> Option<f64>| -> Vec<f64> {
        rows.windows(2)
            .map(|w| match (f(&w[0].record), f(&w[1].record)) {
                (Some(a), Some(b)) => (b - a).abs(),
                _ => f64::NAN,
            })
            .collect()
    };
    let lambda_min_differences = diffs(&|r| r.lambda_min);
    let lambda_loc_differences = diffs(&|r| r.lambda_loc);
    let bs_top_differences = diffs(&|r| r.bs_max());
    let stars: Option<Vec<f64>> = window.and_then(|_| rows.iter().map(|r| r.t_star).collect());
    let t_star_drift = stars.map(|s| {
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    });
    Ok(ConvergenceTable {
        t,
        rows,
        lambda_min_differences,
        lambda_loc_differences,
        bs_top_differences,
        t_star_drift,
    })
}
