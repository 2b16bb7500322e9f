//! The five subcommands. Each returns a `ResultRecord`; files are written by
//! the caller.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use super::config::{FieldKind, RunConfig};
use super::suites::{self, SuiteResult};
use crate::error::{Error, Result};
use crate::fields::{divergence_residual, io::validate_grid_data, loss_yau_coulomb_potential, lp_norm, sample};
use crate::gauge::{biot_savart, inner_half_box_error, GaugeSummary};
use crate::pauli::PauliContext;
use crate::spectral::{bs_top_pencil, nullity_estimate_with, sobolev_constant_sq, ResolvedMode};
use crate::sweep::{
    detect_zeros, perturb_experiment_with, smoothness_ratio, Detection, PerturbationReport, SweepRecord, SweepRunner,
};

/// Largest accepted `‖curl A − B‖/‖B‖` and `max|div A|/max|A|` in `gauge`.
pub const GAUGE_CURL_TOL: f64 = 1e-6;
pub const GAUGE_DIV_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct GaugePayload {
    pub field: String,
    pub b_l32_norm: f64,
    pub b_divergence_residual: f64,
    pub gauge: GaugeSummary,
    /// Relative L² distance to the closed-form Coulomb potential on the inner
    /// half box (Loss–Yau fields only).
    pub coulomb_reference_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumPayload {
    pub field: String,
    pub t: f64,
    pub gauge: GaugeSummary,
    pub record: SweepRecord,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub modes: Vec<ResolvedMode>,
    pub gap_tol: f64,
    /// `γ² t ‖B‖_{3/2}`.
    pub bs_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPayload {
    pub field: String,
    pub gauge: GaugeSummary,
    pub records: Vec<SweepRecord>,
    pub detections: Vec<Detection>,
    pub smoothness_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbPayload {
    pub field: String,
    pub base_l32_norm: f64,
    pub epsilon: f64,
    pub reports: Vec<PerturbationReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidatePayload {
    pub suites: Vec<SuiteResult>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    Gauge(GaugePayload),
    Spectrum(SpectrumPayload),
    Sweep(SweepPayload),
    Perturb(PerturbPayload),
    Validate(ValidatePayload),
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub ok: bool,
    pub message: Option<String>,
    pub payload: Option<Payload>,
    /// Files written next to the record, by name.
    pub files: Vec<String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl ResultRecord {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        ResultRecord {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            ok: true,
            message: None,
            payload: None,
            files: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    fn fail(&mut self, message: impl Into<String>) {
        self.ok = false;
        self.message = Some(message.into());
    }
}

struct Clock(BTreeMap<String, f64>, Instant);

impl Clock {
    fn new() -> Self {
        Clock(BTreeMap::new(), Instant::now())
    }

    fn lap(&mut self, stage: &str) {
        self.0.insert(stage.into(), self.1.elapsed().as_secs_f64());
        self.1 = Instant::now();
    }
}

pub fn cmd_gauge(cfg: &RunConfig) -> Result<ResultRecord> {
    let mut rec = ResultRecord::new("gauge", cfg);
    let mut clock = Clock::new();
    let grid = cfg.grid_spec().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let source = cfg.field_source()?;
    let b = sample(&source, &grid)?;
    clock.lap("sample");
    let gauge = biot_savart(&b)?;
    clock.lap("biot_savart");
    let coulomb_reference_error = (cfg.field.kind == FieldKind::LossYau && cfg.field.scale != 0.0).then(|| {
        let s = cfg.field.scale;
        inner_half_box_error(&gauge.a, |x| loss_yau_coulomb_potential(x).map(|v| s * v))
    });
    let summary = gauge.summary();
    if summary.curl_residual > GAUGE_CURL_TOL || summary.relative_div_residual > GAUGE_DIV_TOL {
        rec.fail(format!(
            "gauge residuals exceed tolerance: curl {:.3e} (≤ {GAUGE_CURL_TOL:e}), div {:.3e} (≤ {GAUGE_DIV_TOL:e})",
            summary.curl_residual, summary.relative_div_residual
        ));
    }
    rec.payload = Some(Payload::Gauge(GaugePayload {
        field: source.describe(),
        b_l32_norm: lp_norm(&b, 1.5)?.value,
        b_divergence_residual: divergence_residual(&b),
        gauge: summary,
        coulomb_reference_error,
    }));
    clock.lap("norms");
    rec.timings = clock.0;
    Ok(rec)
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<ResultRecord> {
    let mut rec = ResultRecord::new("spectrum", cfg);
    let mut clock = Clock::new();
    let grid = cfg.grid_spec().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let source = cfg.field_source()?;
    let opts = cfg.sweep_options();
    let t = cfg.coupling.t;
    let b = sample(&source, &grid)?;
    let (mut ctx, gauge) = PauliContext::from_field(&b, t)?;
    ctx.solver = opts.solver;
    clock.lap("gauge");
    let est = nullity_estimate_with(&ctx, &opts.nullity, None)?;
    clock.lap("pauli");
    let bs = bs_top_pencil(&ctx, opts.bs_k, &opts.bs, None)?;
    clock.lap("birman_schwinger");
    let ev = &est.spectrum.eigenvalues;
    let record = SweepRecord {
        t,
        lambda_min: ev.first().map(|v| v.max(0.0)),
        lambda_loc: est.lambda_loc.map(|v| v.max(0.0)),
        next_gap: (ev.len() > 1).then(|| ev[1] - ev[0]),
        bs_top: bs.mu.clone(),
        nullity: Some(est.nullity),
        localization: Some(est.localization),
        indeterminate: est.indeterminate,
        stats: crate::sweep::RecordStats {
            pauli_iterations: est.spectrum.iterations,
            pauli_converged: est.spectrum.all_converged(),
            bs_iterations: bs.iterations,
            bs_converged: bs.converged.iter().all(|&c| c),
        },
        failures: Vec::new(),
    };
    if !record.stats.pauli_converged || !record.stats.bs_converged {
        rec.fail("eigensolver did not converge to the requested tolerance");
    }
    rec.payload = Some(Payload::Spectrum(SpectrumPayload {
        field: source.describe(),
        t,
        gauge: gauge.summary(),
        eigenvalues: est.spectrum.eigenvalues.clone(),
        residuals: est.spectrum.residuals.clone(),
        modes: est.modes.clone(),
        gap_tol: est.gap_tol,
        bs_bound: sobolev_constant_sq() * t * lp_norm(&b, 1.5)?.value,
        record,
    }));
    rec.timings = clock.0;
    Ok(rec)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<ResultRecord> {
    let mut rec = ResultRecord::new("sweep", cfg);
    let mut clock = Clock::new();
    let grid = cfg.grid_spec().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let source = cfg.field_source()?;
    let (mut runner, gauge) = SweepRunner::new(&source, &grid, cfg.sweep_options())?;
    clock.lap("gauge");
    let c = &cfg.coupling;
    let records = runner.sweep((c.t_min, c.t_max), c.step)?;
    clock.lap("sweep");
    let detections = detect_zeros(&mut runner, &records, c.resolution)?;
    clock.lap("refinement");
    let failed = records.iter().filter(|r| !r.failures.is_empty()).count();
    if failed > 0 {
        rec.fail(format!("{failed} sweep points failed"));
    }
    rec.payload = Some(Payload::Sweep(SweepPayload {
        field: source.describe(),
        gauge: gauge.summary(),
        smoothness_ratio: smoothness_ratio(&records),
        records,
        detections,
    }));
    rec.timings = clock.0;
    Ok(rec)
}

pub fn cmd_perturb(cfg: &RunConfig) -> Result<ResultRecord> {
    let mut rec = ResultRecord::new("perturb", cfg);
    let mut clock = Clock::new();
    let grid = cfg.grid_spec().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let source = cfg.field_source()?;
    let base_l32_norm = lp_norm(&sample(&source, &grid)?, 1.5)?.value;
    let epsilon = cfg.perturb.relative_epsilon * base_l32_norm;
    let mut opts = cfg.sweep_options();
    opts.warm_start = false;
    let reports = perturb_experiment_with(
        &source,
        epsilon,
        cfg.perturb.trials,
        cfg.seed,
        &grid,
        &opts,
        &cfg.perturbation_options(),
    )?;
    clock.lap("trials");
    let failed = reports.iter().filter(|r| !r.failures.is_empty()).count();
    if failed > 0 {
        rec.fail(format!("{failed} trials failed"));
    }
    rec.payload = Some(Payload::Perturb(PerturbPayload {
        field: source.describe(),
        base_l32_norm,
        epsilon,
        reports,
    }));
    rec.timings = clock.0;
    Ok(rec)
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<ResultRecord> {
    let mut rec = ResultRecord::new("validate", cfg);
    let mut clock = Clock::new();
    let v = &cfg.validate;
    let grid = cfg.validate_grid().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut results = Vec::new();
    if cfg.field.kind == FieldKind::File {
        let path = cfg.field.path.as_ref().expect("checked in materialize");
        let res = crate::fields::io::load_field(path).and_then(|f| validate_grid_data(&f));
        results.push(SuiteResult {
            name: "field-data".into(),
            passed: res.is_ok(),
            cases: 1,
            worst: 0.0,
            threshold: 0.0,
            detail: match res {
                Ok(()) => format!("{} loaded", path.display()),
                Err(e) => format!("{}: {e}", path.display()),
            },
        });
        clock.lap("field-data");
    }
    results.push(suites::anticommutation(v.cases, cfg.seed));
    clock.lap("anticommutation");
    results.push(suites::hardy(v.cases, cfg.seed));
    clock.lap("hardy");
    results.push(suites::diamagnetic(v.cases, cfg.seed));
    clock.lap("diamagnetic");
    results.push(suites::oracle(&grid, v.oracle_contexts, cfg.seed));
    clock.lap("oracle");
    results.push(suites::gauge(&grid, cfg.coupling.t, v.gauge_shifts, cfg.seed));
    clock.lap("gauge");
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if !failed.is_empty() {
        rec.fail(format!("failing suites: {}", failed.join(", ")));
    }
    rec.payload = Some(Payload::Validate(ValidatePayload { suites: results }));
    rec.timings = clock.0;
    Ok(rec)
}
