//! Per-mode kernels `H_n(t)` of the operator
//! `∂t² + a∂t − ∂x²(ε∂t + 1)`, the periodic theta kernel built from them, and
//! the closed-form bounds they satisfy.
//!
//! `H_n` is the solution of `Ḧ + aḢ + k²(εḢ + H) = 0` with `H(0) = 0`,
//! `Ḣ(0) = 1`, where `k` is the spatial wavenumber of mode `n` (`k = n` on the
//! standard `2π` ring). With `h = (a + εk²)/2` and `ω² = h² − k²` the kernel is
//! `e^{−ht} sinh(ωt)/ω`, which is real in every regime.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// ζ(2) = π²/6.
pub const ZETA_2: f64 = 1.644_934_066_848_226_4;
/// Γ(3/4).
pub const GAMMA_3_4: f64 = 1.225_416_702_465_177_6;

/// Relative width of the band around `ω² = 0` classified as critical.
pub const TOL_CRIT: f64 = 1e-9;
/// Below this value of `|ω²|t²` the series form of `sinh(ωt)/ω` is used.
const SERIES_BAND: f64 = 1e-4;

/// Coefficients of `u_tt + a u_t − c² ∂x²(ε u_t + u)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquationParams {
    /// Damping (1/time). Any sign on input.
    pub a: f64,
    /// Third-order dissipation (time), strictly positive.
    pub eps: f64,
    /// Wave speed, strictly positive.
    pub c: f64,
}

impl EquationParams {
    pub fn new(a: f64, eps: f64, c: f64) -> Result<Self> {
        let p = Self { a, eps, c };
        p.validate()?;
        Ok(p)
    }

    /// Unit wave speed.
    pub fn canonical(a: f64, eps: f64) -> Result<Self> {
        Self::new(a, eps, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() {
            return Err(Error::InvalidParameter(format!("a must be finite, got {}", self.a)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("c must be > 0, got {}", self.c)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// `ω² > 0`: two decaying exponentials.
    Overdamped,
    /// `ω² = 0` within tolerance: `t·e^{−ht}`.
    Critical,
    /// `ω² < 0`: damped sinusoid.
    Oscillatory,
}

/// Kernel of a single spatial mode. Immutable once built.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeKernel {
    pub n: i64,
    pub wavenumber: f64,
    pub h: f64,
    pub omega_sq: f64,
    pub regime: Regime,
    a: f64,
    eps: f64,
}

impl ModeKernel {
    /// Kernel of mode `n` with wavenumber `|n|`. The wave speed `c` is not
    /// applied here; callers working on rescaled domains use
    /// [`ModeKernel::with_wavenumber`].
    pub fn new(params: &EquationParams, n: i64) -> Result<Self> {
        Self::with_wavenumber(params, n, n.unsigned_abs() as f64)
    }

    pub fn with_wavenumber(params: &EquationParams, n: i64, wavenumber: f64) -> Result<Self> {
        params.validate()?;
        let k = wavenumber.abs();
        let h = 0.5 * (params.a + params.eps * k * k);
        let omega_sq = (h - k) * (h + k);
        let regime = if omega_sq.abs() <= TOL_CRIT * h.abs().max(1.0).powi(2) {
            Regime::Critical
        } else if omega_sq > 0.0 {
            Regime::Overdamped
        } else {
            Regime::Oscillatory
        };
        Ok(Self { n, wavenumber: k, h, omega_sq, regime, a: params.a, eps: params.eps })
    }

    /// Forces a given `ω²` while keeping `h`; used to probe regime boundaries.
    #[cfg(test)]
    pub(crate) fn with_forced_omega_sq(mut self, omega_sq: f64) -> Self {
        self.omega_sq = omega_sq;
        self.regime = if omega_sq > 0.0 { Regime::Overdamped } else { Regime::Oscillatory };
        self
    }

    /// `|Im ω|`, zero unless oscillatory.
    pub fn imag_omega(&self) -> f64 {
        match self.regime {
            Regime::Oscillatory => (-self.omega_sq).sqrt(),
            _ => 0.0,
        }
    }

    /// `d^order H / dt^order` at `t`.
    pub fn eval(&self, t: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(Error::InvalidOrder(order));
        }
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.eval_all(t)[order as usize])
    }

    /// `[H, Ḣ, Ḧ]` at `t ≥ 0`. Unchecked variant of [`ModeKernel::eval`] for hot loops.
    pub fn eval_all(&self, t: f64) -> [f64; 3] {
        debug_assert!(t >= 0.0);
        let h = self.h;
        // the series is exact in ω², so critical kernels keep their tiny ω²
        let w2 = self.omega_sq;
        let z = w2 * t * t;
        if z.abs() <= SERIES_BAND {
            // sinh(ωt)/ω and cosh(ωt) as even series in ω²t²
            let s = t * (1.0 + z / 6.0 * (1.0 + z / 20.0 * (1.0 + z / 42.0)));
            let ch = 1.0 + z / 2.0 * (1.0 + z / 12.0 * (1.0 + z / 30.0));
            let e = (-h * t).exp();
            return [e * s, e * (ch - h * s), e * ((w2 + h * h) * s - 2.0 * h * ch)];
        }
        if w2 > 0.0 {
            let w = w2.sqrt();
            let k2 = self.wavenumber * self.wavenumber;
            // ω − h without cancellation
            let p = -k2 / (h + w);
            let q = w + h;
            let e1 = (p * t).exp();
            let e2 = (-q * t).exp();
            let inv = 0.5 / w;
            [
                -e1 * (-2.0 * w * t).exp_m1() * inv,
                (p * e1 + q * e2) * inv,
                (p * p * e1 - q * q * e2) * inv,
            ]
        } else {
            let nu = (-w2).sqrt();
            let (sn, cs) = (nu * t).sin_cos();
            let e = (-h * t).exp();
            let s = sn / nu;
            [e * s, e * (cs - h * s), e * ((h * h - nu * nu) * s - 2.0 * h * cs)]
        }
    }

    /// Residual of the mode equation from closed-form derivatives.
    pub fn ode_residual(&self, t: f64) -> f64 {
        let [h0, h1, h2] = self.eval_all(t);
        let k2 = self.wavenumber * self.wavenumber;
        h2 + self.a * h1 + k2 * (self.eps * h1 + h0)
    }
}

/// `n̄`, `M` and `κ` of the kernel bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundEnvelope {
    pub n_bar: i64,
    pub m: f64,
    pub kappa: f64,
}

impl BoundEnvelope {
    pub fn new(params: &EquationParams) -> Self {
        let eps = params.eps;
        let n_bar = 1 + (2.0 / eps).floor() as i64;
        let m = 2.0 + 2.0 * (n_bar as f64).ln() + 2.0 * PI * PI / (3.0 * eps);
        let kappa = 3.0 + 4.0 / eps + 2.0 * PI * PI / (9.0 * eps * eps);
        Self { n_bar, m, kappa }
    }

    /// `N(t) = M + 1/a` for `a > 0`, `M + t` for `a = 0`.
    pub fn theta_envelope(&self, params: &EquationParams, t: f64) -> f64 {
        if params.a > 0.0 {
            self.m + 1.0 / params.a
        } else {
            self.m + t
        }
    }
}

/// Smallest mode count `N ≥ n̄` whose tail `Σ_{|n|>N} |H_n(t)| ≤ 4/(εN)` is below `tol`.
/// The tail bound holds uniformly in `t`.
pub fn truncation_floor(params: &EquationParams, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {tol}")));
    }
    let env = BoundEnvelope::new(params);
    let n = (4.0 / (params.eps * tol)).ceil();
    if n > 1e15 {
        return Err(Error::InvalidParameter(format!("tolerance {tol} needs {n:e} modes")));
    }
    Ok((n as usize).max(env.n_bar as usize))
}

/// `θ(x,t) = (1/2π)[H_0(t) + 2 Σ_{n=1}^{n_max} H_n(t) cos(nx)]` for unit wave speed.
///
/// `n_max` must reach [`truncation_floor`] for `tol`; `θ(·,0) = 0` exactly.
pub fn theta_kernel(params: &EquationParams, x: f64, t: f64, n_max: usize, tol: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let required = truncation_floor(params, tol)?;
    if n_max < required {
        return Err(Error::InsufficientModes { required, given: n_max });
    }
    Ok(theta_partial_sum(params, x, t, n_max))
}

/// Truncated theta series without the tolerance check.
pub fn theta_partial_sum(params: &EquationParams, x: f64, t: f64, n_max: usize) -> f64 {
    let mut sum = 0.0;
    for n in (1..=n_max as i64).rev() {
        let k = ModeKernel::new(params, n).expect("validated params");
        sum += k.eval_all(t)[0] * (n as f64 * x).cos();
    }
    let h0 = ModeKernel::new(params, 0).expect("validated params").eval_all(t)[0];
    (h0 + 2.0 * sum) / (2.0 * PI)
}

fn theta3_direct(eta: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 1.0_f64;
    loop {
        let term = (-PI * n * n * eta).exp();
        sum += term;
        if term < 1e-18 * (1.0 + sum) {
            break;
        }
        n += 1.0;
    }
    1.0 + 2.0 * sum
}

fn theta3_deriv_direct(eta: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 1.0_f64;
    loop {
        let term = n * n * (-PI * n * n * eta).exp();
        sum += term;
        if term < 1e-18 * sum.max(f64::MIN_POSITIVE) || term == 0.0 {
            break;
        }
        n += 1.0;
    }
    -2.0 * PI * sum
}

/// `θ₃(η) = Σ_{n∈ℤ} e^{−πn²η}`, i.e. the Jacobi theta function `θ(0, iη)`.
///
/// For `η < 1` the modular relation `θ₃(η) = η^{−1/2} θ₃(1/η)` is used.
pub fn jacobi_theta3(eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("theta3 needs eta > 0, got {eta}")));
    }
    if eta >= 1.0 {
        Ok(theta3_direct(eta))
    } else {
        Ok(theta3_direct(1.0 / eta) / eta.sqrt())
    }
}

/// `dθ₃/dη`, from the term-wise differentiated series.
pub fn jacobi_theta3_deriv(eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("theta3 needs eta > 0, got {eta}")));
    }
    if eta >= 1.0 {
        Ok(theta3_deriv_direct(eta))
    } else {
        let inv = 1.0 / eta;
        Ok(-0.5 * inv.powf(1.5) * theta3_direct(inv) - inv.powf(2.5) * theta3_deriv_direct(inv))
    }
}

/// `e^{s} θ₃(η)` without forming `e^{s}` separately when the series is direct.
fn scaled_theta3(eta: f64, s: f64) -> f64 {
    if eta >= 1.0 {
        let mut sum = 0.0;
        let mut n = 1.0_f64;
        loop {
            let term = (s - PI * n * n * eta).exp();
            sum += term;
            if term <= 1e-18 * sum || term == 0.0 {
                break;
            }
            n += 1.0;
        }
        s.exp() + 2.0 * sum
    } else {
        s.exp() * theta3_direct(1.0 / eta) / eta.sqrt()
    }
}

/// `−e^{s} dθ₃/dη`, non-negative.
fn scaled_neg_theta3_deriv(eta: f64, s: f64) -> f64 {
    if eta >= 1.0 {
        let mut sum = 0.0;
        let mut n = 1.0_f64;
        loop {
            let term = n * n * (s - PI * n * n * eta).exp();
            sum += term;
            if term <= 1e-18 * sum || term == 0.0 {
                break;
            }
            n += 1.0;
        }
        2.0 * PI * sum
    } else {
        -s.exp() * jacobi_theta3_deriv(eta).expect("eta > 0")
    }
}

/// Upper bounds on `4π²‖θ_x‖²`, `4π²‖θ_t‖²` and `4π²‖θ_tx‖²` (L² over one period
/// with measure `dx/2π`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L2NormBounds {
    pub theta_x: f64,
    pub theta_t: f64,
    pub theta_tx: f64,
}

/// Bound on `Σ_n |n H_n(t)|²`, valid for every `t ≥ 0`.
pub fn theta_x_bound(params: &EquationParams) -> f64 {
    let eps = params.eps;
    2.0 + 4.0 / eps + 4.0 * PI * PI / (3.0 * eps * eps)
}

/// All three bounds at `t > 0`. Values can be `+∞` once `e^{4t/ε}` overflows.
pub fn l2_norm_bounds(params: &EquationParams, t: f64) -> Result<L2NormBounds> {
    params.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "theta_t and theta_tx bounds need t > 0, got {t}"
        )));
    }
    let eps = params.eps;
    let env = BoundEnvelope::new(params);
    let eta = 2.0 * eps * t / PI;
    let s = 4.0 * t / eps;
    let theta_t = env.kappa + 8.0 * scaled_theta3(eta, s);
    let r = 2.0 / eps + 1.0;
    let r4 = r.powi(4);
    // −(8/ε) e^{4t/ε} ∂_t θ₃(2εt/π) = (16/π) e^{4t/ε} (−θ₃'(η))
    let theta_tx = r4 * (r4 + 1.0) + 12.0 / (eps * eps) + 16.0 / PI * scaled_neg_theta3_deriv(eta, s);
    Ok(L2NormBounds { theta_x: theta_x_bound(params), theta_t, theta_tx })
}

/// Right-hand sides of the single-mode kernel bounds at `(n, t)`.
///
/// Bounds that do not apply to the given `n` are `None`. The five `n̄`-restricted
/// bounds require `|n| ≥ n̄`; `mode_decay` requires `n ≠ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaBounds {
    /// `|d^l H_n/dt^l|` for `l = 0, 1, 2`.
    pub derivative: [Option<f64>; 3],
    /// `n²|εḢ_n + H_n|`.
    pub eps_h: Option<f64>,
    /// `n²|εḦ_n + Ḣ_n|`.
    pub eps_hdot: Option<f64>,
    /// `|H_n|`: `1/|n|` up to `n̄`, `2/(εn²)` beyond.
    pub mode_decay: Option<f64>,
    /// `|H_n| ≤ t`.
    pub h_linear_in_t: f64,
    /// `|Ḣ_n| ≤ 1`.
    pub hdot_unit: f64,
    /// `|1 − Ḣ_n| ≤ (2h_n + |Im ω_n|) t`.
    pub hdot_near_one: f64,
}

/// The matching left-hand sides, computed from a kernel evaluation `[H, Ḣ, Ḧ]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaValues {
    pub derivative: [f64; 3],
    pub eps_h: f64,
    pub eps_hdot: f64,
    pub abs_h: f64,
    pub abs_hdot: f64,
    pub one_minus_hdot: f64,
}

impl LemmaValues {
    pub fn from_eval(params: &EquationParams, n: i64, [h0, h1, h2]: [f64; 3]) -> Self {
        let n2 = (n as f64) * (n as f64);
        let eps = params.eps;
        Self {
            derivative: [h0.abs(), h1.abs(), h2.abs()],
            eps_h: n2 * (eps * h1 + h0).abs(),
            eps_hdot: n2 * (eps * h2 + h1).abs(),
            abs_h: h0.abs(),
            abs_hdot: h1.abs(),
            one_minus_hdot: (1.0 - h1).abs(),
        }
    }
}

/// Right-hand sides of the kernel inequalities at `(n, t)` for `a ≥ 0`, unit wave speed.
pub fn bound_oracles(params: &EquationParams, n: i64, t: f64) -> LemmaBounds {
    let (a, eps) = (params.a, params.eps);
    let kernel = ModeKernel::new(params, n).expect("validated params");
    let env = BoundEnvelope::new(params);
    let abs_n = n.unsigned_abs() as f64;
    let n2 = abs_n * abs_n;

    let mut derivative = [None; 3];
    let mut eps_h = None;
    let mut eps_hdot = None;
    if n.abs() >= env.n_bar {
        let inv = 0.5 / kernel.omega_sq.sqrt();
        let decay = (-t * (eps * n2 - 2.0 / eps)).exp();
        let growth = a + eps * n2;
        for (l, slot) in derivative.iter_mut().enumerate() {
            *slot = Some(inv * ((2.0 / eps).powi(l as i32) + growth.powi(l as i32) * decay));
        }
        let poly = n2 * (a * eps + eps * eps * n2 + 1.0);
        eps_h = Some(inv * ((a * eps + 4.0) / (eps * eps) + poly * decay));
        eps_hdot = Some(inv * ((8.0 + 2.0 * a * eps) / eps.powi(3) + poly * growth * decay));
    }

    let mode_decay = if n == 0 {
        None
    } else if n.abs() <= env.n_bar {
        // at |n| = n̄ both branches apply; keep the sharper one
        let first = 1.0 / abs_n;
        if n.abs() == env.n_bar {
            Some(first.min(2.0 / (eps * n2)))
        } else {
            Some(first)
        }
    } else {
        Some(2.0 / (eps * n2))
    };

    LemmaBounds {
        derivative,
        eps_h,
        eps_hdot,
        mode_decay,
        h_linear_in_t: t,
        hdot_unit: 1.0,
        hdot_near_one: (2.0 * kernel.h + kernel.imag_omega()) * t,
    }
}
