//! Reduction of an admissible problem to canonical form: homogeneous boundary
//! data, `a ≥ 0`, unit wave speed. Each transform records a [`Step`] so the
//! canonical solution can be lifted back to user coordinates exactly.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, MatchingFailure, Result};
use crate::mode_kernel::EquationParams;

/// Absolute tolerance on the boundary/initial matching conditions.
pub const TOL_MATCH: f64 = 1e-8;

/// Cubic interpolant with not-a-knot end conditions.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    /// Needs at least four strictly increasing knots.
    pub fn new(knots: &[f64], values: &[f64]) -> Result<Self> {
        let n = knots.len();
        if n != values.len() {
            return Err(Error::InvalidParameter(format!(
                "spline needs equal lengths, got {n} knots and {} values",
                values.len()
            )));
        }
        if n < 4 {
            return Err(Error::InvalidParameter(format!("spline needs at least 4 samples, got {n}")));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "spline knots must increase strictly and values must be finite".into(),
            ));
        }
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (values[i + 1] - values[i]) / h[i]).collect();

        // unknowns M_1..M_{n-2}; the not-a-knot conditions express M_0 and
        // M_{n-1} through their neighbours
        let m = n - 2;
        let mut sub = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut sup = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for r in 0..m {
            let i = r + 1;
            sub[r] = h[i - 1];
            diag[r] = 2.0 * (h[i - 1] + h[i]);
            sup[r] = h[i];
            rhs[r] = 6.0 * (slope[i] - slope[i - 1]);
        }
        let (h0, h1) = (h[0], h[1]);
        diag[0] += h0 * (h0 + h1) / h1;
        sup[0] -= h0 * h0 / h1;
        let (ha, hb) = (h[n - 3], h[n - 2]);
        diag[m - 1] += hb * (ha + hb) / ha;
        sub[m - 1] -= hb * hb / ha;
        let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs);
        let mut second = vec![0.0; n];
        second[1..n - 1].copy_from_slice(&inner);
        second[0] = ((h0 + h1) * second[1] - h0 * second[2]) / h1;
        second[n - 1] = ((ha + hb) * second[n - 2] - hb * second[n - 3]) / ha;
        Ok(Self { knots: knots.to_vec(), values: values.to_vec(), second })
    }

    /// Value and first two derivatives; outside the knots the end cubic is extended.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let n = self.knots.len();
        let i = self.knots.partition_point(|&k| k <= t).clamp(1, n - 1) - 1;
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let h = t1 - t0;
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (a, b) = (t1 - t, t - t0);
        let value = m0 * a * a * a / (6.0 * h)
            + m1 * b * b * b / (6.0 * h)
            + (y0 / h - m0 * h / 6.0) * a
            + (y1 / h - m1 * h / 6.0) * b;
        let d1 = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) + (y1 - y0) / h - (m1 - m0) * h / 6.0;
        let d2 = (m0 * a + m1 * b) / h;
        [value, d1, d2]
    }
}

/// Thomas algorithm. `sub[0]` and `sup[n-1]` are ignored.
pub(crate) fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Boundary datum `t ↦ (value, first, second derivative)`.
#[derive(Clone)]
pub struct TimeSignal {
    inner: Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>,
}

impl fmt::Debug for TimeSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TimeSignal({:?})", self.eval(0.0))
    }
}

impl TimeSignal {
    pub fn new(f: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        Self { inner: Arc::new(f) }
    }

    pub fn constant(v: f64) -> Self {
        Self::new(move |_| [v, 0.0, 0.0])
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Cubic spline through `(times, values)`; derivatives are those of the
    /// spline, accurate to `O(Δt²)` in the second derivative.
    pub fn from_samples(times: &[f64], values: &[f64]) -> Result<Self> {
        let spline = CubicSpline::new(times, values)?;
        Ok(Self::new(move |t| spline.eval(t)))
    }

    pub fn eval(&self, t: f64) -> [f64; 3] {
        (self.inner)(t)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Initial datum on the spatial domain, with an optional exact derivative.
#[derive(Clone)]
pub struct Profile {
    f: ScalarFn,
    df: Option<ScalarFn>,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Profile(exact derivative: {})", self.df.is_some())
    }
}

impl Profile {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), df: None }
    }

    pub fn with_derivative(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { f: Arc::new(f), df: Some(Arc::new(df)) }
    }

    pub fn zero() -> Self {
        Self::with_derivative(|_| 0.0, |_| 0.0)
    }

    pub fn from_samples(xs: &[f64], values: &[f64]) -> Result<Self> {
        let s = Arc::new(CubicSpline::new(xs, values)?);
        let s2 = Arc::clone(&s);
        Ok(Self::with_derivative(move |x| s.eval(x)[0], move |x| s2.eval(x)[1]))
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// Exact derivative if supplied, else a fourth-order central difference.
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.df {
            Some(df) => df(x),
            None => {
                let h = 1e-3 * x.abs().max(1.0);
                let f = &self.f;
                (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
            }
        }
    }

    fn map(&self, g: impl Fn(&dyn Fn(f64) -> f64, &dyn Fn(f64) -> f64, f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        let g = Arc::new(g);
        let (a, b) = (self.clone(), self.clone());
        let g2 = Arc::clone(&g);
        Self::with_derivative(
            move |x| g(&|y| a.eval(y), &|y| a.derivative(y), x).0,
            move |x| g2(&|y| b.eval(y), &|y| b.derivative(y), x).1,
        )
    }
}

pub type SourceFn = Arc<dyn Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync>;

/// Region of state space on which a locally Lipschitz source honours its `mu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    pub u_max: f64,
    pub ut_max: f64,
}

/// Right-hand side `f(x, t, u, u_x, u_t)` with its Lipschitz constant.
#[derive(Clone)]
pub struct Source {
    pub f: SourceFn,
    pub mu: f64,
    pub ball: Option<Ball>,
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Source").field("mu", &self.mu).field("ball", &self.ball).finish()
    }
}

impl Source {
    pub fn new(f: impl Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync + 'static, mu: f64) -> Self {
        Self { f: Arc::new(f), mu, ball: None }
    }

    pub fn zero() -> Self {
        Self::new(|_, _, _, _, _| 0.0, 0.0)
    }

    pub fn with_ball(mut self, ball: Ball) -> Self {
        self.ball = Some(ball);
        self
    }

    pub fn eval(&self, x: f64, t: f64, u: f64, ux: f64, ut: f64) -> f64 {
        (self.f)(x, t, u, ux, ut)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BcKind {
    Periodic,
    Dirichlet,
    Neumann,
}

#[derive(Clone, Debug)]
pub enum BoundarySpec {
    /// `u(x + 2π, t) = u(x, t) + 2πm`.
    Periodic { m: i64 },
    Dirichlet { h0: TimeSignal, hpi: TimeSignal },
    Neumann { k0: TimeSignal, kpi: TimeSignal },
}

impl BoundarySpec {
    pub fn kind(&self) -> BcKind {
        match self {
            Self::Periodic { .. } => BcKind::Periodic,
            Self::Dirichlet { .. } => BcKind::Dirichlet,
            Self::Neumann { .. } => BcKind::Neumann,
        }
    }

    pub fn homogeneous(kind: BcKind) -> Self {
        match kind {
            BcKind::Periodic => Self::Periodic { m: 0 },
            BcKind::Dirichlet => Self::Dirichlet { h0: TimeSignal::zero(), hpi: TimeSignal::zero() },
            BcKind::Neumann => Self::Neumann { k0: TimeSignal::zero(), kpi: TimeSignal::zero() },
        }
    }
}

/// Problem `u_tt + a u_t − c²∂x²(εu_t + u) = f` on `[0, length]` with data `u0`, `u1`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub params: EquationParams,
    pub bc: BoundarySpec,
    /// `π` for Dirichlet/Neumann and `2π` (one period) for rings in user
    /// coordinates; shrinks or stretches under the rescalings.
    pub length: f64,
    pub u0: Profile,
    pub u1: Profile,
    pub source: Source,
}

impl ProblemSpec {
    /// Assembles a user-coordinate problem and checks its matching conditions.
    pub fn new(params: EquationParams, bc: BoundarySpec, u0: Profile, u1: Profile, source: Source) -> Result<Self> {
        let length = match bc {
            BoundarySpec::Periodic { .. } => 2.0 * PI,
            _ => PI,
        };
        let p = Self { params, bc, length, u0, u1, source };
        p.validate()?;
        p.check_matching()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.source.mu >= 0.0 && self.source.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be finite and >= 0, got {}", self.source.mu)));
        }
        // second differences of u0 must stay bounded
        let n = 256;
        let dx = self.length / n as f64;
        let mut max_dd: f64 = 0.0;
        for j in 1..n {
            let x = j as f64 * dx;
            let vals = [self.u0.eval(x - dx), self.u0.eval(x), self.u0.eval(x + dx), self.u1.eval(x)];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("initial data not finite near x = {x}")));
            }
            max_dd = max_dd.max(((vals[0] - 2.0 * vals[1] + vals[2]) / (dx * dx)).abs());
        }
        if !max_dd.is_finite() || max_dd > 1e8 {
            return Err(Error::InvalidParameter(format!(
                "u0 is not twice differentiable on the grid (second difference {max_dd:e})"
            )));
        }
        Ok(())
    }

    /// The consistency conditions between boundary and initial data.
    pub fn matching_failures(&self) -> Vec<MatchingFailure> {
        let mut out = Vec::new();
        let mut check = |condition: &'static str, expected: f64, actual: f64| {
            if !((expected - actual).abs() <= TOL_MATCH) {
                out.push(MatchingFailure { condition, expected, actual });
            }
        };
        let l = self.length;
        match &self.bc {
            BoundarySpec::Dirichlet { h0, hpi } => {
                let (a, b) = (h0.eval(0.0), hpi.eval(0.0));
                check("h0(0) = u0(0)", a[0], self.u0.eval(0.0));
                check("h0'(0) = u1(0)", a[1], self.u1.eval(0.0));
                check("hpi(0) = u0(pi)", b[0], self.u0.eval(l));
                check("hpi'(0) = u1(pi)", b[1], self.u1.eval(l));
            }
            BoundarySpec::Neumann { k0, kpi } => {
                let (a, b) = (k0.eval(0.0), kpi.eval(0.0));
                check("k0(0) = u0'(0)", a[0], self.u0.derivative(0.0));
                check("k0'(0) = u1'(0)", a[1], self.u1.derivative(0.0));
                check("kpi(0) = u0'(pi)", b[0], self.u0.derivative(l));
                check("kpi'(0) = u1'(pi)", b[1], self.u1.derivative(l));
            }
            BoundarySpec::Periodic { m } => {
                let jump = *m as f64 * l;
                check("u0(L) - u0(0) = 2 pi m", jump, self.u0.eval(l) - self.u0.eval(0.0));
                check("u0'(L) = u0'(0)", self.u0.derivative(0.0), self.u0.derivative(l));
                check("u1(L) = u1(0)", self.u1.eval(0.0), self.u1.eval(l));
                for &(x, t, u, ux, ut) in &[
                    (0.3, 0.0, 0.2, 0.4, -0.6),
                    (1.7, 0.5, -1.3, 1.1, 0.25),
                    (4.1, 2.0, 3.0, -0.7, 0.9),
                ] {
                    let base = self.source.eval(x, t, u, ux, ut);
                    let shifted = self.source.eval(x + l, t, u + jump, ux, ut);
                    if !((base - shifted).abs() <= TOL_MATCH * base.abs().max(1.0)) {
                        out.push(MatchingFailure { condition: "f shift rule", expected: base, actual: shifted });
                    }
                }
            }
        }
        out
    }

    pub fn check_matching(&self) -> Result<()> {
        let failures = self.matching_failures();
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::MatchingViolation(failures))
        }
    }
}

/// One reversible change of unknown.
#[derive(Clone, Debug)]
pub enum Step {
    /// `û = u + ℓ(x, t)` absorbing boundary data (`ℓ = −mx` on rings).
    Homogenize(BoundarySpec),
    /// `x̃ = x / c`.
    Speed { c: f64 },
    /// `ũ = e^{at/2} u`, `x̃ = x / c̃`.
    Damping { a: f64, c_tilde: f64 },
}

/// `ℓ` and its derivatives `[ℓ, ℓ_x, ℓ_t, ℓ_tt, ℓ_xx, ℓ_xxt]`.
fn lift_terms(bc: &BoundarySpec, x: f64, t: f64) -> [f64; 6] {
    match bc {
        BoundarySpec::Periodic { m } => [-(*m as f64) * x, -(*m as f64), 0.0, 0.0, 0.0, 0.0],
        BoundarySpec::Dirichlet { h0, hpi } => {
            let (p, q) = (h0.eval(t), hpi.eval(t));
            let s = x / PI;
            let w0 = s - 1.0;
            [
                w0 * p[0] - s * q[0],
                (p[0] - q[0]) / PI,
                w0 * p[1] - s * q[1],
                w0 * p[2] - s * q[2],
                0.0,
                0.0,
            ]
        }
        BoundarySpec::Neumann { k0, kpi } => {
            let (p, q) = (k0.eval(t), kpi.eval(t));
            let w0 = x * x / (2.0 * PI) - x;
            let w1 = x * x / (2.0 * PI);
            [
                w0 * p[0] - w1 * q[0],
                (x / PI - 1.0) * p[0] - x / PI * q[0],
                w0 * p[1] - w1 * q[1],
                w0 * p[2] - w1 * q[2],
                (p[0] - q[0]) / PI,
                (p[1] - q[1]) / PI,
            ]
        }
    }
}

impl Step {
    /// Maps a canonical-side point `(x̃, t, [u, u_x, u_t])` back across this step.
    pub fn invert(&self, x: f64, t: f64, [u, ux, ut]: [f64; 3]) -> (f64, [f64; 3]) {
        match self {
            Step::Homogenize(bc) => {
                let l = lift_terms(bc, x, t);
                (x, [u - l[0], ux - l[1], ut - l[2]])
            }
            Step::Speed { c } => (c * x, [u, ux / c, ut]),
            Step::Damping { a, c_tilde } => {
                let e = (-0.5 * a * t).exp();
                (c_tilde * x, [e * u, e * ux / c_tilde, e * (ut - 0.5 * a * u)])
            }
        }
    }

    /// Canonical-side coordinate of a user-side point.
    pub fn forward_x(&self, x: f64) -> f64 {
        match self {
            Step::Homogenize(_) => x,
            Step::Speed { c } => x / c,
            Step::Damping { c_tilde, .. } => x / c_tilde,
        }
    }
}

/// Absorbs the boundary data into source and initial data.
pub fn homogenize(p: &ProblemSpec) -> Result<(ProblemSpec, Step)> {
    p.check_matching()?;
    let bc = p.bc.clone();
    let kind = bc.kind();
    let params = p.params;
    let c2 = params.c * params.c;
    let (eps, a) = (params.eps, params.a);

    let f = Arc::clone(&p.source.f);
    let bc_f = bc.clone();
    let source_fn = move |x: f64, t: f64, u: f64, ux: f64, ut: f64| {
        let l = lift_terms(&bc_f, x, t);
        let base = f(x, t, u - l[0], ux - l[1], ut - l[2]);
        let correction = match bc_f {
            // φ_m = mx contributes nothing under the operator
            BoundarySpec::Periodic { .. } => 0.0,
            _ => l[3] + a * l[2] - c2 * (eps * l[5] + l[4]),
        };
        base + correction
    };

    let (bc0, bc1) = (bc.clone(), bc.clone());
    let u0 = p.u0.map(move |f, df, x| {
        let l = lift_terms(&bc0, x, 0.0);
        (f(x) + l[0], df(x) + l[1])
    });
    let u1 = p.u1.map(move |f, df, x| {
        let l = lift_terms(&bc1, x, 0.0);
        // ∂x ℓ_t at t = 0
        let lxt = match &bc1 {
            BoundarySpec::Periodic { .. } => 0.0,
            BoundarySpec::Dirichlet { h0, hpi } => (h0.eval(0.0)[1] - hpi.eval(0.0)[1]) / PI,
            BoundarySpec::Neumann { k0, kpi } => {
                (x / PI - 1.0) * k0.eval(0.0)[1] - x / PI * kpi.eval(0.0)[1]
            }
        };
        (f(x) + l[2], df(x) + lxt)
    });

    let canonical = ProblemSpec {
        params,
        bc: BoundarySpec::homogeneous(kind),
        length: p.length,
        u0,
        u1,
        source: Source { f: Arc::new(source_fn), mu: p.source.mu, ball: p.source.ball },
    };
    Ok((canonical, Step::Homogenize(bc)))
}

fn require_homogeneous(p: &ProblemSpec, op: &str) -> Result<()> {
    let homogeneous = match &p.bc {
        BoundarySpec::Periodic { m } => *m == 0,
        BoundarySpec::Dirichlet { h0, hpi } => {
            (0..8).all(|i| h0.eval(i as f64)[0] == 0.0 && hpi.eval(i as f64)[0] == 0.0)
        }
        BoundarySpec::Neumann { k0, kpi } => {
            (0..8).all(|i| k0.eval(i as f64)[0] == 0.0 && kpi.eval(i as f64)[0] == 0.0)
        }
    };
    if homogeneous {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{op} expects homogeneous boundary data; homogenize first")))
    }
}

/// Rescales `x̃ = x/c` so the wave speed becomes 1.
pub fn normalize_speed(p: &ProblemSpec) -> Result<(ProblemSpec, Step)> {
    let c = p.params.c;
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c must be > 0, got {c}")));
    }
    require_homogeneous(p, "normalize_speed")?;
    let f = Arc::clone(&p.source.f);
    let source_fn = move |x: f64, t: f64, u: f64, ux: f64, ut: f64| f(c * x, t, u, ux / c, ut);
    let scale = move |g: &dyn Fn(f64) -> f64, dg: &dyn Fn(f64) -> f64, x: f64| (g(c * x), c * dg(c * x));
    let canonical = ProblemSpec {
        params: EquationParams::new(p.params.a, p.params.eps, 1.0)?,
        bc: p.bc.clone(),
        length: p.length / c,
        u0: p.u0.map(scale),
        u1: p.u1.map(scale),
        source: Source {
            f: Arc::new(source_fn),
            mu: p.source.mu.max(p.source.mu / c),
            ball: p.source.ball,
        },
    };
    Ok((canonical, Step::Speed { c }))
}

/// Removes negative damping through `ũ = e^{at/2}u`, which turns the
/// operator into `∂t² − c̃²∂x²(ε̃∂t + 1)` and then rescales to unit speed.
pub fn normalize_damping(p: &ProblemSpec) -> Result<(ProblemSpec, Step)> {
    let EquationParams { a, eps, c } = p.params;
    if a >= 0.0 {
        return Err(Error::InvalidParameter(format!("normalize_damping needs a < 0, got {a}")));
    }
    require_homogeneous(p, "normalize_damping")?;
    let stretch = 1.0 - 0.5 * a * eps;
    let c_tilde = c * stretch.sqrt();
    let eps_tilde = eps / stretch;

    let f = Arc::clone(&p.source.f);
    let source_fn = move |x: f64, t: f64, u: f64, ux: f64, ut: f64| {
        let e = (-0.5 * a * t).exp();
        0.25 * a * a * u + f(c_tilde * x, t, e * u, e * ux / c_tilde, e * (ut - 0.5 * a * u)) / e
    };
    let u0 = p
        .u0
        .map(move |g, dg, x| (g(c_tilde * x), c_tilde * dg(c_tilde * x)));
    // ũ_t(0) = u_t(0) + (a/2)u(0)
    let (u0_for_u1, u1_src) = (p.u0.clone(), p.u1.clone());
    let u1 = u1_src.map(move |g, dg, x| {
        let y = c_tilde * x;
        (
            g(y) + 0.5 * a * u0_for_u1.eval(y),
            c_tilde * (dg(y) + 0.5 * a * u0_for_u1.derivative(y)),
        )
    });
    let mu = p.source.mu;
    let mu_tilde = (mu * (1.0 + 0.5 * a.abs()) + 0.25 * a * a).max(mu / c_tilde);
    let canonical = ProblemSpec {
        params: EquationParams::new(0.0, eps_tilde, 1.0)?,
        bc: p.bc.clone(),
        length: p.length / c_tilde,
        u0,
        u1,
        source: Source { f: Arc::new(source_fn), mu: mu_tilde, ball: p.source.ball },
    };
    Ok((canonical, Step::Damping { a, c_tilde }))
}

/// A canonical problem with the steps that lead back to user coordinates.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub canonical: ProblemSpec,
    pub steps: Vec<Step>,
}

impl Reduction {
    /// Lifts a canonical-side point to user coordinates.
    pub fn to_user(&self, x: f64, t: f64, state: [f64; 3]) -> (f64, [f64; 3]) {
        self.steps.iter().rev().fold((x, state), |(x, s), step| step.invert(x, t, s))
    }

    /// Canonical-side coordinate of a user-side `x`.
    pub fn to_canonical_x(&self, x: f64) -> f64 {
        self.steps.iter().fold(x, |x, step| step.forward_x(x))
    }
}

/// Full pipeline: homogenize, then unit speed, then non-negative damping.
pub fn reduce(p: &ProblemSpec) -> Result<Reduction> {
    let (mut current, step) = homogenize(p)?;
    let mut steps = vec![step];
    if current.params.c != 1.0 {
        let (next, step) = normalize_speed(&current)?;
        current = next;
        steps.push(step);
    }
    if current.params.a < 0.0 {
        let (next, step) = normalize_damping(&current)?;
        current = next;
        steps.push(step);
    }
    Ok(Reduction { canonical: current, steps })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

/// Extends samples on `N_x + 1` equispaced points of `[0, L]` to `2N_x`
/// samples of one period `[0, 2L)` of the odd or even periodic extension.
///
/// Odd extension needs vanishing end values, even extension vanishing
/// one-sided slopes, both relative to the field's scale.
pub fn extend(values: &[f64], parity: Parity, tol: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 5 {
        return Err(Error::GridMismatch(format!("extension needs at least 5 samples, got {n}")));
    }
    let nx = n - 1;
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    match parity {
        Parity::Odd => {
            for (end, v) in [("x = 0", values[0]), ("x = L", values[nx])] {
                if v.abs() > tol * scale {
                    return Err(Error::ParityViolation(format!("odd extension needs zero at {end}, got {v:e}")));
                }
            }
        }
        Parity::Even => {
            // slopes in units of the grid step, third-order one-sided
            let slope = |v: [f64; 4]| (-11.0 * v[0] + 18.0 * v[1] - 9.0 * v[2] + 2.0 * v[3]) / 6.0;
            let left = slope([values[0], values[1], values[2], values[3]]);
            let right = slope([values[nx], values[nx - 1], values[nx - 2], values[nx - 3]]);
            let max_step = values.windows(2).fold(0.0_f64, |m, w| m.max((w[1] - w[0]).abs()));
            let limit = tol * scale / nx as f64 + 0.05 * max_step;
            for (end, s) in [("x = 0", left), ("x = L", right)] {
                if s.abs() > limit {
                    return Err(Error::ParityViolation(format!(
                        "even extension needs zero slope at {end}, got {:e} per grid step",
                        s
                    )));
                }
            }
        }
    }
    Ok(extend_unchecked(values, parity))
}

/// [`extend`] without the endpoint checks. Odd extension zeroes the two fixed points.
pub fn extend_unchecked(values: &[f64], parity: Parity) -> Vec<f64> {
    let nx = values.len() - 1;
    let mut out = Vec::with_capacity(2 * nx);
    out.extend_from_slice(&values[..nx]);
    out.push(values[nx]);
    let sign = match parity {
        Parity::Odd => -1.0,
        Parity::Even => 1.0,
    };
    for j in nx + 1..2 * nx {
        out.push(sign * values[2 * nx - j]);
    }
    if parity == Parity::Odd {
        out[0] = 0.0;
        out[nx] = 0.0;
    }
    out
}
