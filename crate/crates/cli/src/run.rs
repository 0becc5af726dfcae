//! The `solve` and `audit` modes and their output files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use greenwave::mode_kernel::{EquationParams, ModeKernel};
use greenwave::physics::{winding_number, winding_value};
use greenwave::picard::{solve, SolveOutput, SolveWarning};
use greenwave::reduction::BoundarySpec;
use greenwave::verification::{
    audit_kernel_ode, audit_lemma_with, audit_prop1, audit_prop2, logspace, prop2_grid, random_kernel_tuples,
    AuditReport,
};
use greenwave::Error;

use crate::config::{parse_bc_kind, parse_profile_expr, AuditCfg, Config, ConfigError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_AUDIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MATCHING: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

/// Failure of a run with the process exit code it maps to.
#[derive(Debug)]
pub struct RunError {
    pub code: i32,
    pub msg: String,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        Self { code: EXIT_CONFIG, msg: format!("config error: {e}") }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::MatchingViolation(_) => EXIT_MATCHING,
            Error::IterationDiverged { .. } => EXIT_DIVERGED,
            _ => EXIT_CONFIG,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_AUDIT_FAILED, msg: format!("i/o error: {e}") }
    }
}

/// `output.dir` resolved against the directory of the config file.
pub fn output_dir(cfg: &Config, config_path: &Path) -> PathBuf {
    if cfg.output.dir.is_absolute() {
        cfg.output.dir.clone()
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(&cfg.output.dir)
    }
}

#[derive(Serialize)]
struct CertificateJson {
    lambda: f64,
    mu: f64,
    factor: f64,
    valid: bool,
    #[serde(rename = "M_prime")]
    m_prime: f64,
    kappa: f64,
    #[serde(rename = "Theta")]
    theta: f64,
}

fn snapshot_levels(n_times: usize, stride: usize) -> Vec<usize> {
    let mut levels: Vec<usize> = (0..n_times).step_by(stride).collect();
    if levels.last() != Some(&(n_times - 1)) {
        levels.push(n_times - 1);
    }
    levels
}

fn write_outputs(out: &SolveOutput, dir: &Path, stride: usize, ring: bool) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    let tr = &out.trajectory;
    let levels = snapshot_levels(tr.n_times(), stride);

    let mut w = BufWriter::new(File::create(dir.join("snapshots.csv"))?);
    writeln!(w, "t,x,u,u_x,u_t")?;
    for &i in &levels {
        for j in 0..tr.n_points() {
            let [u, ux, ut] = tr.at(i, j);
            writeln!(w, "{},{},{},{},{}", tr.times[i], tr.x[j], u, ux, ut)?;
        }
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join("iterations.csv"))?);
    writeln!(w, "k,weighted_norm,ratio")?;
    for r in &out.log {
        let ratio = r.ratio.map_or(String::new(), |q| q.to_string());
        writeln!(w, "{},{},{}", r.k, r.weighted_norm, ratio)?;
    }
    w.flush()?;

    let c = &out.certificate;
    let cert = CertificateJson {
        lambda: c.lambda,
        mu: c.mu,
        factor: c.factor,
        valid: c.valid,
        m_prime: c.m_prime,
        kappa: c.kappa,
        theta: c.theta,
    };
    let text = serde_json::to_string_pretty(&cert).map_err(|e| RunError { code: EXIT_AUDIT_FAILED, msg: e.to_string() })?;
    fs::write(dir.join("certificate.json"), text + "\n")?;

    if ring {
        let mut w = BufWriter::new(File::create(dir.join("winding.csv"))?);
        writeln!(w, "t,winding_value,winding_number")?;
        for &i in &levels {
            let (u, _, _) = tr.level(i);
            let value = winding_value(u)?;
            let m = winding_number(u).map_or(String::from("ambiguous"), |m| m.to_string());
            writeln!(w, "{},{},{}", tr.times[i], value, m)?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Summary of a successful solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveSummary {
    pub iterations: usize,
    pub converged: bool,
    pub factor: f64,
    pub warnings: Vec<SolveWarning>,
    pub dir: PathBuf,
}

pub fn run_solve(cfg: &Config, config_path: &Path) -> Result<SolveSummary, RunError> {
    let solver = cfg.solver_config()?;
    let problem = cfg.problem()??;
    let ring = matches!(problem.bc, BoundarySpec::Periodic { .. });
    let out = solve(&problem, &solver)?;
    for w in &out.warnings {
        warn!("{w:?}");
    }
    let dir = output_dir(cfg, config_path);
    write_outputs(&out, &dir, cfg.output.snapshot_stride, ring)?;
    info!(
        "solved: {} iterations, converged = {}, certificate factor {:.4} at lambda {}",
        out.log.len(),
        out.converged,
        out.certificate.factor,
        out.certificate.lambda
    );
    Ok(SolveSummary {
        iterations: out.log.len(),
        converged: out.converged,
        factor: out.certificate.factor,
        warnings: out.warnings,
        dir,
    })
}

/// Runs every audit of the sweep; a scaled kernel is used if `corrupt_kernel` is set.
pub fn audit_report(a: &AuditCfg, seed: u64) -> Result<AuditReport, RunError> {
    let mut report = AuditReport::default();
    let t_grid = logspace(a.t_min, a.t_max, a.t_count);
    let theta_t = logspace(a.t_min, a.t_max, a.theta_t_count);
    let corrupt = a.corrupt_kernel;
    let eval = move |k: &ModeKernel, t: f64| {
        let v = k.eval_all(t);
        if corrupt { v.map(|h| 1.01 * h) } else { v }
    };
    if a.n_max < 0 {
        return Err(ConfigError { field: "audit.n_max".into(), msg: "must be >= 0".into() }.into());
    }
    for &av in &a.a {
        for &eps in &a.eps {
            let params = EquationParams::canonical(av, eps)?;
            if !t_grid.is_empty() {
                report = report.merge(audit_lemma_with(&params, -a.n_max..=a.n_max, &t_grid, &eval)?);
            }
            if !theta_t.is_empty() && a.n_max > 0 {
                report = report.merge(audit_prop1(&params, &theta_t, a.n_max as usize)?);
            }
            if !a.prop2.t.is_empty() {
                let bc = parse_bc_kind(&a.prop2.bc, "audit.prop2.bc")?;
                let g_expr = parse_profile_expr(&a.prop2.g, "audit.prop2.g")?;
                let grid = prop2_grid(bc, a.prop2.n)?;
                let g: Vec<f64> = grid.points().iter().map(|&x| g_expr.eval(&[x, 0.0, 0.0, 0.0, 0.0])).collect();
                report = report.merge(audit_prop2(&params, &g, bc, &a.prop2.t, a.prop2.n)?.report);
            }
        }
    }
    if a.ode_tuples > 0 {
        report = report.merge(audit_kernel_ode(&random_kernel_tuples(seed, a.ode_tuples))?);
    }
    Ok(report)
}

/// Writes `audit.csv`, prints the summary and returns the exit code.
pub fn run_audit(cfg: &Config, config_path: &Path, seed: u64, quiet: bool) -> Result<i32, RunError> {
    let a = cfg.audit.clone().unwrap_or_default();
    let report = audit_report(&a, seed)?;
    if report.total_checks() == 0 {
        return Err(RunError { code: EXIT_CONFIG, msg: "audit sweep is empty".into() });
    }
    let dir = output_dir(cfg, config_path);
    fs::create_dir_all(&dir)?;
    let mut w = BufWriter::new(File::create(dir.join("audit.csv"))?);
    report.write_csv(&mut w)?;
    w.flush()?;
    if !quiet {
        for line in report.summary_lines() {
            println!("{line}");
        }
        println!("{} checks, {} failures", report.total_checks(), report.failures.len());
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_AUDIT_FAILED })
}
