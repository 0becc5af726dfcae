//! JSON configuration and its translation into solver inputs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use greenwave::mode_kernel::EquationParams;
use greenwave::physics::{josephson_problem, voigt_problem, JosephsonConfig, JosephsonVariant, JunctionGeometry, VoigtConfig};
use greenwave::picard::SolverConfig;
use greenwave::reduction::{Ball, BcKind, BoundarySpec, Profile, ProblemSpec, Source, TimeSignal};

use crate::expr::{Expr, Var};

/// A configuration problem located by its field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub msg: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.msg)
        } else {
            write!(f, "{}: {}", self.field, self.msg)
        }
    }
}

fn cerr<T>(field: &str, msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { field: field.to_string(), msg: msg.into() })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub equation: Option<EquationCfg>,
    pub bc: Option<BcCfg>,
    pub initial: Option<InitialCfg>,
    pub source: Option<SourceCfg>,
    pub solver: Option<SolverCfg>,
    #[serde(default)]
    pub output: OutputCfg,
    pub audit: Option<AuditCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationCfg {
    pub a: f64,
    pub eps: f64,
    #[serde(default = "one")]
    pub c: f64,
}

fn one() -> f64 {
    1.0
}

/// Expression in `t`, a sample table, or a constant.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SignalCfg {
    Const(f64),
    Expr(String),
    Table { t: Vec<f64>, values: Vec<f64> },
}

/// Expression in `x`, a sample table, or a constant.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ProfileCfg {
    Const(f64),
    Expr(String),
    Table { x: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BcCfg {
    Periodic {
        #[serde(default)]
        m: i64,
    },
    Dirichlet {
        h0: SignalCfg,
        hpi: SignalCfg,
    },
    Neumann {
        #[serde(default = "zero_signal")]
        k0: SignalCfg,
        #[serde(default = "zero_signal")]
        kpi: SignalCfg,
    },
}

fn zero_signal() -> SignalCfg {
    SignalCfg::Const(0.0)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCfg {
    pub u0: ProfileCfg,
    #[serde(default = "zero_profile")]
    pub u1: ProfileCfg,
}

fn zero_profile() -> ProfileCfg {
    ProfileCfg::Const(0.0)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallCfg {
    pub u_max: f64,
    pub ut_max: f64,
}

/// Either `expression` with `mu`, or a `preset` with its own parameters.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceCfg {
    pub preset: Option<String>,
    pub expression: Option<String>,
    pub mu: Option<f64>,
    pub ball: Option<BallCfg>,
    // josephson
    pub b: Option<f64>,
    pub gamma: Option<f64>,
    pub variant: Option<String>,
    // voigt
    pub force: Option<String>,
    #[serde(rename = "E")]
    pub e: Option<f64>,
    pub rho: Option<f64>,
    pub muv: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverCfg {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub stop_tol: Option<f64>,
    pub lambda: Option<f64>,
    pub k_max: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputCfg {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "one_usize")]
    pub snapshot_stride: usize,
}

impl Default for OutputCfg {
    fn default() -> Self {
        Self { dir: default_dir(), snapshot_stride: 1 }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("output")
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prop2Cfg {
    #[serde(default = "default_g")]
    pub g: String,
    #[serde(default = "default_prop2_bc")]
    pub bc: String,
    #[serde(default = "default_prop2_t")]
    pub t: Vec<f64>,
    #[serde(rename = "N", default = "default_prop2_n")]
    pub n: usize,
}

impl Default for Prop2Cfg {
    fn default() -> Self {
        Self { g: default_g(), bc: default_prop2_bc(), t: default_prop2_t(), n: default_prop2_n() }
    }
}

fn default_g() -> String {
    "cos(x) + 0.3*sin(2*x)".into()
}
fn default_prop2_bc() -> String {
    "periodic".into()
}
fn default_prop2_t() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_prop2_n() -> usize {
    16
}

/// Sweep of the kernel, theta and initial-limit audits. Defaults give the full sweep.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditCfg {
    #[serde(default = "default_a")]
    pub a: Vec<f64>,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_n_max")]
    pub n_max: i64,
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_t_count")]
    pub t_count: usize,
    #[serde(default = "default_theta_t_count")]
    pub theta_t_count: usize,
    #[serde(default)]
    pub prop2: Prop2Cfg,
    #[serde(default = "default_ode_tuples")]
    pub ode_tuples: usize,
    #[serde(default)]
    pub corrupt_kernel: bool,
}

impl Default for AuditCfg {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all audit fields have defaults")
    }
}

fn default_a() -> Vec<f64> {
    vec![0.0, 0.5, 2.0]
}
fn default_eps() -> Vec<f64> {
    vec![0.1, 1.0, 5.0]
}
fn default_n_max() -> i64 {
    200
}
fn default_t_min() -> f64 {
    1e-6
}
fn default_t_max() -> f64 {
    50.0
}
fn default_t_count() -> usize {
    200
}
fn default_theta_t_count() -> usize {
    20
}
fn default_ode_tuples() -> usize {
    50
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError {
            field: String::new(),
            msg: format!("line {} column {}: {e}", e.line(), e.column()),
        })
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { field: String::new(), msg: format!("cannot read {}: {e}", path.display()) })?;
        Self::from_json(&text)
    }

    pub fn solver_config(&self) -> Result<SolverConfig, ConfigError> {
        let Some(s) = &self.solver else { return cerr("solver", "missing section") };
        if !(s.t_final > 0.0 && s.t_final.is_finite()) {
            return cerr("solver.T", format!("must be > 0, got {}", s.t_final));
        }
        if !(s.dt > 0.0 && s.dt <= s.t_final) {
            return cerr("solver.dt", format!("must be in (0, T], got {}", s.dt));
        }
        if s.n == 0 {
            return cerr("solver.N", "must be >= 1");
        }
        let mut cfg = SolverConfig::new(s.t_final, s.dt, s.n);
        if let Some(tol) = s.stop_tol {
            if !(tol > 0.0) {
                return cerr("solver.stop_tol", format!("must be > 0, got {tol}"));
            }
            cfg.stop_tol = tol;
        }
        if let Some(k) = s.k_max {
            if k == 0 {
                return cerr("solver.k_max", "must be >= 1");
            }
            cfg.k_max = k;
        }
        cfg.lambda = s.lambda;
        if cfg.steps().is_err() {
            return cerr("solver.dt", "T / dt must be an integer number of steps");
        }
        if self.output.snapshot_stride == 0 {
            return cerr("output.snapshot_stride", "must be >= 1");
        }
        Ok(cfg)
    }

    /// Builds the user-coordinate problem. Library errors from assembly (for
    /// instance matching violations) are passed through unchanged.
    pub fn problem(&self) -> Result<Result<ProblemSpec, greenwave::Error>, ConfigError> {
        let Some(bc_cfg) = &self.bc else { return cerr("bc", "missing section") };
        let Some(init) = &self.initial else { return cerr("initial", "missing section") };
        let Some(src) = &self.source else { return cerr("source", "missing section") };
        let bc = boundary(bc_cfg)?;
        let u0 = profile(&init.u0, "initial.u0")?;
        let u1 = profile(&init.u1, "initial.u1")?;

        match src.preset.as_deref() {
            None => {
                let params = self.params()?;
                let source = expression_source(src)?;
                Ok(ProblemSpec::new(params, bc, u0, u1, source))
            }
            Some("josephson") => {
                let params = self.params()?;
                only_fields(src, &["b", "gamma", "variant"], "josephson")?;
                let geometry = match bc_cfg {
                    BcCfg::Periodic { m } => JunctionGeometry::Ring { m: *m },
                    BcCfg::Neumann { k0, kpi } => {
                        if !is_zero_signal(k0) || !is_zero_signal(kpi) {
                            return cerr("bc", "the josephson strip needs zero Neumann data");
                        }
                        JunctionGeometry::Strip
                    }
                    BcCfg::Dirichlet { .. } => return cerr("bc.kind", "josephson needs a periodic ring or a neumann strip"),
                };
                let variant = match src.variant.as_deref().unwrap_or("basic") {
                    "basic" => JosephsonVariant::Basic,
                    "extended" => JosephsonVariant::Extended,
                    other => return cerr("source.variant", format!("expected basic or extended, got '{other}'")),
                };
                let cfg = JosephsonConfig {
                    b: src.b.unwrap_or(1.0),
                    gamma: src.gamma.unwrap_or(0.0),
                    a: params.a,
                    eps: params.eps,
                    c: params.c,
                    variant,
                    geometry,
                };
                Ok(josephson_problem(&cfg, u0, u1))
            }
            Some("voigt") => {
                if self.equation.is_some() {
                    return cerr("equation", "must be omitted with the voigt preset (a, eps, c follow from E, rho, muv)");
                }
                only_fields(src, &["force", "e", "rho", "muv"], "voigt")?;
                let force = match &src.force {
                    Some(s) => parse_in(s, "source.force", &[Var::X, Var::T])?,
                    None => Expr::Num(0.0),
                };
                let get = |v: Option<f64>, name: &str| v.ok_or_else(|| ConfigError {
                    field: format!("source.{name}"),
                    msg: "required by the voigt preset".into(),
                });
                let cfg = VoigtConfig::new(
                    move |x, t| force.eval(&[x, t, 0.0, 0.0, 0.0]),
                    get(src.e, "E")?,
                    get(src.rho, "rho")?,
                    get(src.muv, "muv")?,
                );
                Ok(voigt_problem(&cfg, u0, u1, bc))
            }
            Some(other) => cerr("source.preset", format!("unknown preset '{other}' (expected josephson or voigt)")),
        }
    }

    fn params(&self) -> Result<EquationParams, ConfigError> {
        let Some(e) = &self.equation else { return cerr("equation", "missing section") };
        EquationParams::new(e.a, e.eps, e.c).map_err(|err| ConfigError { field: "equation".into(), msg: err.to_string() })
    }
}

fn only_fields(src: &SourceCfg, allowed: &[&str], preset: &str) -> Result<(), ConfigError> {
    let present = [
        ("expression", src.expression.is_some()),
        ("mu", src.mu.is_some()),
        ("ball", src.ball.is_some()),
        ("b", src.b.is_some()),
        ("gamma", src.gamma.is_some()),
        ("variant", src.variant.is_some()),
        ("force", src.force.is_some()),
        ("e", src.e.is_some()),
        ("rho", src.rho.is_some()),
        ("muv", src.muv.is_some()),
    ];
    for (name, set) in present {
        if set && !allowed.contains(&name) {
            let shown = if name == "e" { "E" } else { name };
            return cerr(&format!("source.{shown}"), format!("not used by the {preset} preset"));
        }
    }
    Ok(())
}

fn is_zero_signal(s: &SignalCfg) -> bool {
    matches!(s, SignalCfg::Const(v) if *v == 0.0)
}

fn parse_in(src: &str, field: &str, allowed: &[Var]) -> Result<Expr, ConfigError> {
    let e = Expr::parse(src).map_err(|err| ConfigError { field: field.into(), msg: err.to_string() })?;
    for v in e.vars() {
        if !allowed.contains(&v) {
            return cerr(field, format!("variable '{}' is not allowed here", var_name(v)));
        }
    }
    Ok(e)
}

fn var_name(v: Var) -> &'static str {
    match v {
        Var::X => "x",
        Var::T => "t",
        Var::U => "u",
        Var::Ux => "ux",
        Var::Ut => "ut",
    }
}

fn expression_source(src: &SourceCfg) -> Result<Source, ConfigError> {
    only_fields(src, &["expression", "mu", "ball"], "expression")?;
    let Some(text) = &src.expression else { return cerr("source", "needs either 'expression' or 'preset'") };
    let e = Arc::new(parse_in(text, "source.expression", &[Var::X, Var::T, Var::U, Var::Ux, Var::Ut])?);
    let Some(mu) = src.mu else { return cerr("source.mu", "a Lipschitz constant is required for expression sources") };
    if !(mu >= 0.0 && mu.is_finite()) {
        return cerr("source.mu", format!("must be finite and >= 0, got {mu}"));
    }
    let mut s = Source::new(move |x, t, u, ux, ut| e.eval(&[x, t, u, ux, ut]), mu);
    if let Some(b) = &src.ball {
        if !(b.u_max > 0.0 && b.ut_max > 0.0) {
            return cerr("source.ball", "u_max and ut_max must be > 0");
        }
        s = s.with_ball(Ball { u_max: b.u_max, ut_max: b.ut_max });
    }
    Ok(s)
}

fn table_error(field: &str, err: greenwave::Error) -> ConfigError {
    ConfigError { field: field.into(), msg: err.to_string() }
}

pub fn signal(cfg: &SignalCfg, field: &str) -> Result<TimeSignal, ConfigError> {
    match cfg {
        SignalCfg::Const(v) => Ok(TimeSignal::constant(*v)),
        SignalCfg::Expr(s) => {
            let e = parse_in(s, field, &[Var::T])?;
            let d1 = e.derivative(Var::T);
            let d2 = d1.derivative(Var::T);
            Ok(TimeSignal::new(move |t| {
                let env = [0.0, t, 0.0, 0.0, 0.0];
                [e.eval(&env), d1.eval(&env), d2.eval(&env)]
            }))
        }
        SignalCfg::Table { t, values } => TimeSignal::from_samples(t, values).map_err(|e| table_error(field, e)),
    }
}

pub fn profile(cfg: &ProfileCfg, field: &str) -> Result<Profile, ConfigError> {
    match cfg {
        ProfileCfg::Const(v) => {
            let v = *v;
            Ok(Profile::with_derivative(move |_| v, |_| 0.0))
        }
        ProfileCfg::Expr(s) => {
            let e = parse_in(s, field, &[Var::X])?;
            let d = e.derivative(Var::X);
            Ok(Profile::with_derivative(
                move |x| e.eval(&[x, 0.0, 0.0, 0.0, 0.0]),
                move |x| d.eval(&[x, 0.0, 0.0, 0.0, 0.0]),
            ))
        }
        ProfileCfg::Table { x, values } => Profile::from_samples(x, values).map_err(|e| table_error(field, e)),
    }
}

fn boundary(cfg: &BcCfg) -> Result<BoundarySpec, ConfigError> {
    Ok(match cfg {
        BcCfg::Periodic { m } => BoundarySpec::Periodic { m: *m },
        BcCfg::Dirichlet { h0, hpi } => BoundarySpec::Dirichlet { h0: signal(h0, "bc.h0")?, hpi: signal(hpi, "bc.hpi")? },
        BcCfg::Neumann { k0, kpi } => BoundarySpec::Neumann { k0: signal(k0, "bc.k0")?, kpi: signal(kpi, "bc.kpi")? },
    })
}

pub fn parse_bc_kind(name: &str, field: &str) -> Result<BcKind, ConfigError> {
    match name {
        "periodic" => Ok(BcKind::Periodic),
        "dirichlet" => Ok(BcKind::Dirichlet),
        "neumann" => Ok(BcKind::Neumann),
        other => cerr(field, format!("expected periodic, dirichlet or neumann, got '{other}'")),
    }
}

/// Expression for the audit's `g` profile, in `x` only.
pub fn parse_profile_expr(src: &str, field: &str) -> Result<Expr, ConfigError> {
    parse_in(src, field, &[Var::X])
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINE_GORDON: &str = r#"{
        "equation": {"a": 0.1, "eps": 0.5},
        "bc": {"kind": "periodic", "m": 0},
        "initial": {"u0": "0.1*cos(x)", "u1": 0},
        "source": {"expression": "sin(u) - 0.5", "mu": 1},
        "solver": {"T": 1, "dt": 0.0625, "N": 8}
    }"#;

    #[test]
    fn parses_expression_problem() {
        let c = Config::from_json(SINE_GORDON).unwrap();
        let p = c.problem().unwrap().unwrap();
        assert_eq!(p.source.mu, 1.0);
        assert!((p.u0.eval(0.0) - 0.1).abs() < 1e-15);
        assert!((p.u0.derivative(1.0) + 0.1 * 1.0_f64.sin()).abs() < 1e-15);
        assert!((p.source.eval(0.0, 0.0, 0.0, 0.0, 0.0) + 0.5).abs() < 1e-15);
        let s = c.solver_config().unwrap();
        assert_eq!(s.steps().unwrap(), 16);
        assert_eq!(c.output.snapshot_stride, 1);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let e = Config::from_json("{\n \"equation\": {\"a\": 0.1,, }\n}").unwrap_err();
        assert!(e.msg.starts_with("line 2"), "{e}");
        let e = Config::from_json(r#"{"equaton": {}}"#).unwrap_err();
        assert!(e.msg.contains("unknown field"), "{e}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let bad = SINE_GORDON.replace("0.1*cos(x)", "0.1*cos(y)");
        let e = Config::from_json(&bad).unwrap().problem().unwrap_err();
        assert_eq!(e.field, "initial.u0");
        let bad = SINE_GORDON.replace("0.1*cos(x)", "u + x");
        let e = Config::from_json(&bad).unwrap().problem().unwrap_err();
        assert!(e.msg.contains("'u' is not allowed"), "{e}");
        let bad = SINE_GORDON.replace(", \"mu\": 1", "");
        let e = Config::from_json(&bad).unwrap().problem().unwrap_err();
        assert_eq!(e.field, "source.mu");
        let bad = SINE_GORDON.replace("\"dt\": 0.0625", "\"dt\": 0.3");
        let e = Config::from_json(&bad).unwrap().solver_config().unwrap_err();
        assert_eq!(e.field, "solver.dt");
    }

    #[test]
    fn presets() {
        let j = r#"{
            "equation": {"a": 0.1, "eps": 0.5},
            "bc": {"kind": "periodic", "m": 1},
            "initial": {"u0": "x + 0.1*cos(x)"},
            "source": {"preset": "josephson", "b": 1, "gamma": 0.5, "variant": "extended"}
        }"#;
        let p = Config::from_json(j).unwrap().problem().unwrap().unwrap();
        assert!(p.source.ball.is_some());

        let v = r#"{
            "bc": {"kind": "dirichlet", "h0": 0, "hpi": 0},
            "initial": {"u0": "sin(x)"},
            "source": {"preset": "voigt", "force": "1", "E": 4, "rho": 1, "muv": 2}
        }"#;
        let p = Config::from_json(v).unwrap().problem().unwrap().unwrap();
        assert_eq!((p.params.c, p.params.eps), (2.0, 0.5));

        let bad = v.replace("\"muv\": 2", "\"muv\": 2, \"b\": 1");
        let e = Config::from_json(&bad).unwrap().problem().unwrap_err();
        assert_eq!(e.field, "source.b");
    }

    #[test]
    fn signals_differentiate_symbolically() {
        let s = signal(&SignalCfg::Expr("sin(2*t)".into()), "f").unwrap();
        let [v, d1, d2] = s.eval(0.3);
        assert!((v - 0.6_f64.sin()).abs() < 1e-15);
        assert!((d1 - 2.0 * 0.6_f64.cos()).abs() < 1e-15);
        assert!((d2 + 4.0 * 0.6_f64.sin()).abs() < 1e-15);
        assert!(signal(&SignalCfg::Expr("x".into()), "f").is_err());
    }

    #[test]
    fn audit_defaults_are_the_full_sweep() {
        let a = AuditCfg::default();
        assert_eq!(a.a, vec![0.0, 0.5, 2.0]);
        assert_eq!(a.eps, vec![0.1, 1.0, 5.0]);
        assert_eq!((a.n_max, a.t_count, a.theta_t_count, a.ode_tuples), (200, 200, 20, 50));
        assert!(!a.corrupt_kernel);
    }
}
