//! Batch command layer: config in, JSON (or CSV for sweeps) out.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical guard,
//! 4 `check` diagnostic out of tolerance.

pub mod config;
pub mod report;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::{Value, json};

use crate::derivs::{d_rho_analytic, d_rho_central_difference, d2_rho, d2_rho_central_difference};
use crate::error::{Error, Result};
use crate::fidelity::{
    FSReport, expansion_terms, first_order_scaling_check, fs_numeric, fs_report, uhlmann_fidelity,
};
use crate::hermlin::{ComplexMatrix, max_abs, max_abs_diff};
use crate::metrology::{QfiPaths, crb, crb_matrix, qfi_all_paths, qfim, qfim_sld_trace, sld_residual, slds};
use crate::states::StateFamily;

pub use config::ModelConfig;
use report::{complex_matrix, error_record, fmt_f64, real_matrix, to_json};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_GUARD: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// `|Tr𝓧|` above this fails `check`.
pub const TR_X_TOL: f64 = 1e-9;
/// Accepted slope range of the first-order scaling check.
pub const SLOPE_RANGE: (f64, f64) = (1.9, 2.1);
pub const SLD_RESIDUAL_TOL: f64 = 1e-8;
/// Exact ∂ρ against a central difference, relative to `max(1, max|∂ρ|)`.
pub const FD_FIRST_TOL: f64 = 1e-6;
/// Exact ∂²ρ against a second difference, relative to `max(1, max|∂²ρ|)`.
pub const FD_SECOND_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Qfi,
    Qfim,
    Sld,
    Fidelity,
    Fs,
    Check,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Qfi => "qfi",
            Command::Qfim => "qfim",
            Command::Sld => "sld",
            Command::Fidelity => "fidelity",
            Command::Fs => "fs",
            Command::Check => "check",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown output format `{other}` (expected json or csv)")),
        }
    }
}

/// `param=START:STOP:STEPS`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub param: usize,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| if k + 1 == self.steps { self.stop } else { self.start + k as f64 * h })
            .collect()
    }
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("sweep `{s}` is not of the form param=START:STOP:STEPS");
        let (param, range) = s.split_once('=').ok_or_else(bad)?;
        let param = param.trim().parse::<usize>().map_err(|_| bad())?;
        let parts: Vec<&str> = range.split(':').collect();
        let [start, stop, steps] = parts.as_slice() else {
            return Err(bad());
        };
        let start = start.trim().parse::<f64>().map_err(|_| bad())?;
        let stop = stop.trim().parse::<f64>().map_err(|_| bad())?;
        let steps = steps.trim().parse::<usize>().map_err(|_| bad())?;
        if steps == 0 || !start.is_finite() || !stop.is_finite() {
            return Err(bad());
        }
        Ok(SweepSpec {
            param,
            start,
            stop,
            steps,
        })
    }
}

impl fmt::Display for SweepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}:{}:{}", self.param, self.start, self.stop, self.steps)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Flags {
    pub param: Option<usize>,
    pub output: OutputFormat,
    pub fs_delta: Option<f64>,
    pub rank_tol: Option<f64>,
    pub sweep: Option<SweepSpec>,
}

/// Serialized report and process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub exit_code: i32,
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical_guard() { EXIT_GUARD } else { EXIT_VALIDATION }
}

pub fn run(command: Command, config_path: &Path, flags: &Flags) -> Outcome {
    match ModelConfig::load(config_path) {
        Ok(cfg) => run_config(command, cfg, flags),
        Err(e) => failure(command, &e),
    }
}

pub fn run_config(command: Command, mut cfg: ModelConfig, flags: &Flags) -> Outcome {
    if let Some(d) = flags.fs_delta {
        cfg.numerics.fs_delta = d;
    }
    if let Some(t) = flags.rank_tol {
        cfg.numerics.rank_tol = t;
    }
    match dispatch(command, &cfg, flags) {
        Ok(outcome) => outcome,
        Err(e) => failure(command, &e),
    }
}

fn failure(command: Command, err: &Error) -> Outcome {
    Outcome {
        text: to_json(&error_record(command.name(), err)),
        exit_code: exit_code(err),
    }
}

fn dispatch(command: Command, cfg: &ModelConfig, flags: &Flags) -> Result<Outcome> {
    cfg.numerics.validate()?;
    if flags.output == OutputFormat::Csv && command != Command::Sweep {
        return Err(Error::InvalidArgument("CSV output is only available for sweep".into()));
    }
    if command != Command::Sweep && flags.sweep.is_some() {
        return Err(Error::InvalidArgument("--sweep is only valid with the sweep command".into()));
    }
    let family = cfg.family()?;
    let ctx = Context {
        cfg,
        family: &family,
        param: flags.param.or(flags.sweep.map(|s| s.param)).unwrap_or(0),
    };
    family.generator(ctx.param)?;

    let mut exit = EXIT_OK;
    let body = match command {
        Command::Qfi => ctx.qfi()?,
        Command::Qfim => ctx.qfim()?,
        Command::Sld => ctx.sld()?,
        Command::Fidelity => ctx.fidelity()?,
        Command::Fs => ctx.fs()?,
        Command::Check => {
            let (body, passed) = ctx.check()?;
            if !passed {
                exit = EXIT_CHECK_FAILED;
            }
            body
        }
        Command::Sweep => {
            let spec = flags
                .sweep
                .ok_or_else(|| Error::InvalidArgument("sweep needs --sweep param=START:STOP:STEPS".into()))?;
            let rows = ctx.sweep(&spec)?;
            let text = match flags.output {
                OutputFormat::Json => to_json(&json!({
                    "command": "sweep",
                    "status": "ok",
                    "inputs": ctx.inputs(),
                    "sweep": { "param": spec.param, "start": spec.start, "stop": spec.stop, "steps": spec.steps },
                    "rows": rows.iter().map(SweepRow::to_json).collect::<Vec<_>>(),
                })),
                OutputFormat::Csv => sweep_csv(&rows)?,
            };
            return Ok(Outcome { text, exit_code: EXIT_OK });
        }
    };

    let mut report = json!({
        "command": command.name(),
        "status": if exit == EXIT_OK { "ok" } else { "check_failed" },
        "inputs": ctx.inputs(),
    });
    if let (Value::Object(out), Value::Object(extra)) = (&mut report, body) {
        out.extend(extra);
    }
    Ok(Outcome {
        text: to_json(&report),
        exit_code: exit,
    })
}

struct Context<'a> {
    cfg: &'a ModelConfig,
    family: &'a StateFamily,
    param: usize,
}

impl Context<'_> {
    fn theta(&self) -> &[f64] {
        &self.cfg.theta
    }

    fn inputs(&self) -> Value {
        json!({
            "config": serde_json::to_value(self.cfg).expect("config serializes"),
            "param": self.param,
            "dimension": self.family.dim(),
            "parameter_count": self.family.parameter_count(),
        })
    }

    fn paths(&self) -> Result<QfiPaths> {
        qfi_all_paths(self.family, self.theta(), self.param, &self.cfg.numerics)
    }

    fn qfi(&self) -> Result<Value> {
        let paths = self.paths()?;
        Ok(json!({
            "qfi": paths.support_sum,
            "qfi_by_path": paths,
            "max_path_gap": paths.max_gap(),
            "path_tolerance": paths.tolerance(),
            "crb": scalar_crb(paths.support_sum),
        }))
    }

    fn qfim(&self) -> Result<Value> {
        let q = qfim(self.family, self.theta(), &self.cfg.numerics)?;
        let ls = slds(self.family, self.theta(), &self.cfg.numerics)?;
        let mats: Vec<ComplexMatrix> = ls.iter().map(|l| l.mat.matrix().clone()).collect();
        let rho = self.family.evaluate(self.theta())?;
        let (trace_form, imag) = qfim_sld_trace(rho.matrix(), &mats);
        let crb = match crb_matrix(&q) {
            Ok(inv) => json!({ "status": "ok", "matrix": real_matrix(&inv) }),
            Err(e) => singular_record(&e),
        };
        Ok(json!({
            "qfim": real_matrix(&q.matrix),
            "classical_part": real_matrix(&q.classical_part),
            "quantum_part": real_matrix(&q.quantum_part),
            "qfim_sld_trace": real_matrix(&trace_form),
            "max_path_gap": (&q.matrix - &trace_form).amax(),
            "sld_trace_imag_residue": imag,
            "symmetry_defect": (&q.matrix - q.matrix.transpose()).amax(),
            "crb": crb,
        }))
    }

    fn sld(&self) -> Result<Value> {
        let rho = self.family.evaluate(self.theta())?;
        let ls = slds(self.family, self.theta(), &self.cfg.numerics)?;
        let mut out = Vec::with_capacity(ls.len());
        for (m, l) in ls.iter().enumerate() {
            let d_rho = d_rho_analytic(self.family, self.theta(), m)?;
            out.push(json!({
                "param": m,
                "support_rank": l.support_rank,
                "matrix": complex_matrix(l.mat.matrix()),
                "residual": sld_residual(rho.matrix(), &d_rho, l),
            }));
        }
        Ok(json!({ "slds": out }))
    }

    fn fidelity(&self) -> Result<Value> {
        let delta = self.cfg.numerics.fs_delta;
        let mut shifted = self.theta().to_vec();
        shifted[self.param] += delta;
        let f = uhlmann_fidelity(&self.family.evaluate(self.theta())?, &self.family.evaluate(&shifted)?)?;
        Ok(json!({
            "delta": delta,
            "theta_shifted": shifted,
            "fidelity": f,
            "infidelity": 1.0 - f,
            "bures_distance": (2.0 * (1.0 - f)).max(0.0).sqrt(),
        }))
    }

    fn fs(&self) -> Result<Value> {
        let rep = fs_report(self.family, self.theta(), self.param, &self.cfg.numerics)?;
        let est = fs_numeric(self.family, self.theta(), self.param, self.cfg.numerics.fs_delta)?;
        let terms = expansion_terms(self.family, self.theta(), self.param, &self.cfg.numerics)?;
        Ok(json!({
            "fs": fs_json(&rep),
            "fs_numeric_detail": { "coarse": est.coarse, "fine": est.fine, "delta": self.cfg.numerics.fs_delta },
            "expansion": {
                "tr_x": terms.tr_x,
                "tr_y": terms.tr_y,
                "y_diag": terms.y_diag,
                "dropped_second_order_trace": terms.dropped_second_order_trace,
            },
            "warnings": rep.warning.iter().collect::<Vec<_>>(),
        }))
    }

    /// Returns the report body and whether every diagnostic passed.
    fn check(&self) -> Result<(Value, bool)> {
        let (theta, m, numerics) = (self.theta(), self.param, &self.cfg.numerics);
        let paths = self.paths()?;
        let rep = fs_report(self.family, theta, m, numerics)?;
        let terms = expansion_terms(self.family, theta, m, numerics)?;
        let slope = match first_order_scaling_check(self.family, theta, m) {
            Ok(s) => Some(s),
            Err(Error::NotApplicable(_)) => None,
            Err(e) => return Err(e),
        };
        let rho = self.family.evaluate(theta)?;
        let d_rho = d_rho_analytic(self.family, theta, m)?;
        let ls = slds(self.family, theta, numerics)?;
        let residual = sld_residual(rho.matrix(), &d_rho, &ls[m]);

        let fd1 = d_rho_central_difference(self.family, theta, m, numerics.fd_step_first)?;
        let fd1_gap = max_abs_diff(d_rho.matrix(), &fd1);
        let d2 = d2_rho(self.family, theta, m, m)?;
        let fd2 = d2_rho_central_difference(self.family, theta, m, m, numerics.fd_step_second)?;
        let fd2_gap = max_abs_diff(d2.matrix(), &fd2);

        let mut diags = vec![
            Diagnostic::within("qfi_path_gap", paths.max_gap(), paths.tolerance()),
            Diagnostic::within("fs_gap", rep.max_pairwise_gap, rep.tolerance),
            Diagnostic::within("tr_x", terms.tr_x.abs(), TR_X_TOL),
            match slope {
                Some(s) => Diagnostic::range("first_order_slope", s, SLOPE_RANGE),
                None => Diagnostic::not_applicable("first_order_slope", "state does not move along this parameter"),
            },
            Diagnostic::within("sld_residual", residual, SLD_RESIDUAL_TOL),
            Diagnostic::within("d_rho_fd_gap", fd1_gap, FD_FIRST_TOL * max_abs(d_rho.matrix()).max(1.0)),
            Diagnostic::within("d2_rho_fd_gap", fd2_gap, FD_SECOND_TOL * max_abs(d2.matrix()).max(1.0)),
        ];
        for d in &mut diags {
            d.check();
        }
        let passed = diags.iter().all(|d| d.status != Status::Fail);
        let mut warnings: Vec<String> = rep.warning.iter().cloned().collect();
        warnings.extend(diags.iter().filter(|d| d.status == Status::Fail).map(|d| {
            format!("{} = {} is outside its tolerance", d.name, fmt_f64(d.value.unwrap_or(f64::NAN)))
        }));
        Ok((
            json!({
                "passed": passed,
                "qfi_by_path": paths,
                "fs": fs_json(&rep),
                "tr_x": terms.tr_x,
                "tr_y": terms.tr_y,
                "first_order_slope": slope,
                "diagnostics": diags.iter().map(Diagnostic::to_json).collect::<Vec<_>>(),
                "warnings": warnings,
            }),
            passed,
        ))
    }

    fn sweep(&self, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
        self.family.generator(spec.param)?;
        let points = spec.points();
        let eval = |t: &f64| -> Result<SweepRow> {
            let mut theta = self.theta().to_vec();
            theta[spec.param] = *t;
            let paths = qfi_all_paths(self.family, &theta, self.param, &self.cfg.numerics)?;
            let fs = fs_report(self.family, &theta, self.param, &self.cfg.numerics)?;
            Ok(SweepRow { theta, paths, fs })
        };
        let rows: Vec<Result<SweepRow>> = match thread_cap()? {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
                .install(|| points.par_iter().map(eval).collect()),
            None => points.par_iter().map(eval).collect(),
        };
        rows.into_iter().collect()
    }
}

/// `QFIKIT_THREADS`, when set, caps sweep concurrency.
fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("QFIKIT_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidArgument(format!("QFIKIT_THREADS = `{v}` is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

fn scalar_crb(f: f64) -> Value {
    match crb(f) {
        Ok(v) => json!({ "status": "ok", "value": v }),
        Err(e) => singular_record(&e),
    }
}

fn singular_record(err: &Error) -> Value {
    match err {
        Error::SingularInformation {
            eigenvalue,
            null_direction,
        } => json!({
            "status": "singular",
            "kind": err.kind(),
            "eigenvalue": eigenvalue,
            "null_direction": null_direction,
        }),
        other => json!({ "status": "error", "kind": other.kind(), "message": other.to_string() }),
    }
}

fn fs_json(rep: &FSReport) -> Value {
    json!({
        "fs_analytic": rep.fs_analytic,
        "fs_numeric": rep.fs_numeric,
        "qfi_quarter": rep.qfi_quarter,
        "max_pairwise_gap": rep.max_pairwise_gap,
        "tolerance": rep.tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone)]
struct Diagnostic {
    name: &'static str,
    value: Option<f64>,
    bound: Bound,
    status: Status,
    note: Option<&'static str>,
}

#[derive(Debug, Clone, Copy)]
enum Bound {
    AtMost(f64),
    Range(f64, f64),
    None,
}

impl Diagnostic {
    fn within(name: &'static str, value: f64, tol: f64) -> Self {
        Self { name, value: Some(value), bound: Bound::AtMost(tol), status: Status::Fail, note: None }
    }

    fn range(name: &'static str, value: f64, (lo, hi): (f64, f64)) -> Self {
        Self { name, value: Some(value), bound: Bound::Range(lo, hi), status: Status::Fail, note: None }
    }

    fn not_applicable(name: &'static str, note: &'static str) -> Self {
        Self { name, value: None, bound: Bound::None, status: Status::NotApplicable, note: Some(note) }
    }

    fn check(&mut self) {
        let Some(v) = self.value else { return };
        let ok = v.is_finite()
            && match self.bound {
                Bound::AtMost(tol) => v <= tol,
                Bound::Range(lo, hi) => (lo..=hi).contains(&v),
                Bound::None => true,
            };
        self.status = if ok { Status::Pass } else { Status::Fail };
    }

    fn to_json(&self) -> Value {
        let mut out = json!({
            "name": self.name,
            "value": self.value,
            "status": match self.status {
                Status::Pass => "pass",
                Status::Fail => "fail",
                Status::NotApplicable => "not_applicable",
            },
        });
        match self.bound {
            Bound::AtMost(tol) => out["tolerance"] = json!(tol),
            Bound::Range(lo, hi) => out["range"] = json!([lo, hi]),
            Bound::None => {}
        }
        if let Some(n) = self.note {
            out["note"] = json!(n);
        }
        out
    }
}

struct SweepRow {
    theta: Vec<f64>,
    paths: QfiPaths,
    fs: FSReport,
}

impl SweepRow {
    fn to_json(&self) -> Value {
        json!({
            "theta": self.theta,
            "qfi_by_path": self.paths,
            "fs": fs_json(&self.fs),
        })
    }

    fn fields(&self) -> Vec<f64> {
        let mut v = self.theta.clone();
        v.extend(self.paths.values());
        v.extend([self.fs.fs_analytic, self.fs.fs_numeric, self.fs.qfi_quarter]);
        v
    }
}

fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let io_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    let p = rows.first().map_or(0, |r| r.theta.len());
    let mut header: Vec<String> = (0..p).map(|i| format!("theta_{i}")).collect();
    header.extend(
        ["qfi_support_sum", "qfi_sld_trace", "qfi_matrix_element", "fs_analytic", "fs_numeric", "qfi_quarter"]
            .map(String::from),
    );
    w.write_record(&header).map_err(io_err)?;
    for row in rows {
        w.write_record(row.fields().iter().map(|&x| fmt_f64(x))).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
}
