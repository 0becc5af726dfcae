//! Problem builders for the long Josephson junction and the viscoelastic
//! Voigt rod, plus the fluxon count of a ring solution.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mode_kernel::EquationParams;
use crate::reduction::{Ball, BoundarySpec, Profile, ProblemSpec, Source};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JosephsonVariant {
    /// `f = b sin u − γ`.
    Basic,
    /// `f = b sin u − γ + a(1 − cos u) u_t`.
    Extended,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JunctionGeometry {
    /// Closed ring carrying `m` fluxons.
    Ring { m: i64 },
    /// Open strip with zero-flux ends.
    Strip,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JosephsonConfig {
    pub b: f64,
    pub gamma: f64,
    pub a: f64,
    pub eps: f64,
    pub c: f64,
    pub variant: JosephsonVariant,
    pub geometry: JunctionGeometry,
}

impl JosephsonConfig {
    pub fn new(b: f64, gamma: f64, a: f64, eps: f64) -> Self {
        Self { b, gamma, a, eps, c: 1.0, variant: JosephsonVariant::Basic, geometry: JunctionGeometry::Ring { m: 0 } }
    }

    /// Ball on which the Extended variant's `mu` holds: `|u| ≤ 4π`, `|u_t| ≤ 10/ε`.
    pub fn extended_ball(&self) -> Ball {
        Ball { u_max: 4.0 * PI, ut_max: 10.0 / self.eps }
    }

    /// `|b|` for Basic; `|b| + 2|a|(1 + u_t,max)` on the monitored ball for Extended.
    pub fn mu(&self) -> f64 {
        match self.variant {
            JosephsonVariant::Basic => self.b.abs(),
            JosephsonVariant::Extended => self.b.abs() + 2.0 * self.a.abs() * (1.0 + self.extended_ball().ut_max),
        }
    }
}

/// Sine-Gordon problem for a Josephson junction.
///
/// On a ring, `u0` must carry the winding `m` (`u0(2π) − u0(0) = 2πm`); a
/// mismatch surfaces as [`Error::MatchingViolation`].
pub fn josephson_problem(cfg: &JosephsonConfig, u0: Profile, u1: Profile) -> Result<ProblemSpec> {
    for (name, v) in [("b", cfg.b), ("gamma", cfg.gamma)] {
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
        }
    }
    let params = EquationParams::new(cfg.a, cfg.eps, cfg.c)?;
    let (b, gamma, a) = (cfg.b, cfg.gamma, cfg.a);
    let source = match cfg.variant {
        JosephsonVariant::Basic => Source::new(move |_, _, u: f64, _, _| b * u.sin() - gamma, cfg.mu()),
        JosephsonVariant::Extended => Source::new(
            move |_, _, u: f64, _, ut: f64| b * u.sin() - gamma + a * (1.0 - u.cos()) * ut,
            cfg.mu(),
        )
        .with_ball(cfg.extended_ball()),
    };
    let bc = match cfg.geometry {
        JunctionGeometry::Ring { m } => BoundarySpec::Periodic { m },
        JunctionGeometry::Strip => BoundarySpec::homogeneous(crate::reduction::BcKind::Neumann),
    };
    ProblemSpec::new(params, bc, u0, u1, source)
}

pub type ForceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Rod of a Voigt material: stress `σ = Eν + ν_t/μ`.
#[derive(Clone)]
pub struct VoigtConfig {
    /// Applied force density `f(x, t)`.
    pub force: ForceFn,
    /// Elastic modulus.
    pub e: f64,
    /// Linear density at rest.
    pub rho: f64,
    /// Viscous constant.
    pub muv: f64,
}

impl std::fmt::Debug for VoigtConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VoigtConfig").field("e", &self.e).field("rho", &self.rho).field("muv", &self.muv).finish()
    }
}

impl VoigtConfig {
    pub fn new(force: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, e: f64, rho: f64, muv: f64) -> Self {
        Self { force: Arc::new(force), e, rho, muv }
    }

    /// `a = 0`, `c = √(E/ρ)`, `ε = 1/(ρμ)`.
    pub fn params(&self) -> Result<EquationParams> {
        for (name, v) in [("E", self.e), ("rho", self.rho), ("mu", self.muv)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        EquationParams::new(0.0, 1.0 / (self.rho * self.muv), (self.e / self.rho).sqrt())
    }
}

/// Displacement problem for the rod; the source is linear so `mu = 0`.
pub fn voigt_problem(cfg: &VoigtConfig, u0: Profile, u1: Profile, bc: BoundarySpec) -> Result<ProblemSpec> {
    let params = cfg.params()?;
    let force = cfg.force.clone();
    ProblemSpec::new(params, bc, u0, u1, Source::new(move |x, t, _, _, _| force(x, t), 0.0))
}

/// `(u_last − u_first)/2π` for samples over one period including the closing point.
pub fn winding_value(u: &[f64]) -> Result<f64> {
    match (u.first(), u.last()) {
        (Some(a), Some(b)) if u.len() >= 2 => Ok((b - a) / (2.0 * PI)),
        _ => Err(Error::InvalidParameter("winding needs at least two samples".into())),
    }
}

/// Nearest integer to [`winding_value`]; rejects values farther than 0.1 from it.
pub fn winding_number(u: &[f64]) -> Result<i64> {
    let w = winding_value(u)?;
    if !w.is_finite() {
        return Err(Error::AmbiguousWinding(w));
    }
    let m = w.round();
    if (w - m).abs() > 0.1 {
        return Err(Error::AmbiguousWinding(w));
    }
    Ok(m as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::picard::{solve, SolverConfig};
    use proptest::prelude::*;

    fn ring_samples(f: impl Fn(f64) -> f64, n: usize) -> Vec<f64> {
        (0..=n).map(|j| f(2.0 * PI * j as f64 / n as f64)).collect()
    }

    #[test]
    fn linear_beam_has_zero_mu() {
        let cfg = JosephsonConfig::new(0.0, 0.0, 0.1, 0.5);
        let p = josephson_problem(&cfg, Profile::zero(), Profile::zero()).unwrap();
        assert_eq!(p.source.mu, 0.0);
        assert_eq!(p.source.eval(0.3, 0.1, 2.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let cfg = JosephsonConfig::new(1.0, 0.0, 0.1, 0.5);
        let p = josephson_problem(&cfg, Profile::zero(), Profile::zero()).unwrap();
        let out = solve(&p, &SolverConfig::new(1.0, 1.0 / 64.0, 16)).unwrap();
        assert!(out.converged);
        let (su, sut) = out.trajectory.sup_u_ut();
        assert_eq!(su, 0.0);
        assert_eq!(sut, 0.0);
    }

    #[test]
    fn static_tilt_is_steady() {
        let cfg = JosephsonConfig::new(1.0, 0.5, 0.1, 0.5);
        let ustar = 0.5_f64.asin();
        let p = josephson_problem(&cfg, Profile::new(move |_| ustar), Profile::zero()).unwrap();
        let out = solve(&p, &SolverConfig::new(2.0, 2.0 / 128.0, 16)).unwrap();
        assert!(out.converged);
        let tr = &out.trajectory;
        for k in 0..tr.u.len() {
            assert!((tr.u[k] - ustar).abs() < 1e-9, "u = {}", tr.u[k]);
            assert!(tr.ut[k].abs() < 1e-9);
        }
    }

    #[test]
    fn ring_winding_mismatch_is_rejected() {
        let mut cfg = JosephsonConfig::new(1.0, 0.0, 0.1, 0.5);
        cfg.geometry = JunctionGeometry::Ring { m: 1 };
        let err = josephson_problem(&cfg, Profile::new(|x: f64| x.cos()), Profile::zero()).unwrap_err();
        assert!(matches!(err, Error::MatchingViolation(_)));
        assert!(josephson_problem(&cfg, Profile::new(|x: f64| x + 0.2 * x.sin()), Profile::zero()).is_ok());
    }

    #[test]
    fn extended_variant_monitors_ball() {
        let mut cfg = JosephsonConfig::new(1.0, 0.2, 0.3, 0.5);
        cfg.variant = JosephsonVariant::Extended;
        let p = josephson_problem(&cfg, Profile::zero(), Profile::zero()).unwrap();
        let ball = p.source.ball.unwrap();
        assert_eq!(ball.u_max, 4.0 * PI);
        assert_eq!(ball.ut_max, 20.0);
        assert!((p.source.mu - (1.0 + 0.6 * 21.0)).abs() < 1e-12);
        let f = p.source.eval(0.0, 0.0, PI, 0.0, 2.0);
        assert!((f - (PI.sin() - 0.2 + 0.3 * 2.0 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn strip_uses_neumann() {
        let mut cfg = JosephsonConfig::new(1.0, 0.0, 0.0, 1.0);
        cfg.geometry = JunctionGeometry::Strip;
        let p = josephson_problem(&cfg, Profile::new(|x: f64| 0.1 * x.cos()), Profile::zero()).unwrap();
        assert_eq!(p.bc.kind(), crate::reduction::BcKind::Neumann);
        assert_eq!(p.length, PI);
    }

    #[test]
    fn voigt_unit_constants() {
        let cfg = VoigtConfig::new(|_, _| 0.0, 1.0, 1.0, 1.0);
        let p = cfg.params().unwrap();
        assert_eq!((p.a, p.eps, p.c), (0.0, 1.0, 1.0));
        let cfg = VoigtConfig::new(|_, _| 0.0, 8.0, 2.0, 0.25);
        let p = cfg.params().unwrap();
        assert_eq!((p.eps, p.c), (2.0, 2.0));
        for bad in [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0)] {
            assert!(VoigtConfig::new(|_, _| 0.0, bad.0, bad.1, bad.2).params().is_err());
        }
    }

    #[test]
    fn voigt_problem_is_linear() {
        let cfg = VoigtConfig::new(|x, t| x + t, 1.0, 1.0, 1.0);
        let p = voigt_problem(&cfg, Profile::zero(), Profile::zero(), BoundarySpec::homogeneous(crate::reduction::BcKind::Dirichlet))
            .unwrap();
        assert_eq!(p.source.mu, 0.0);
        assert_eq!(p.source.eval(1.0, 2.0, 5.0, 6.0, 7.0), 3.0);
    }

    #[test]
    fn winding_examples() {
        let u = ring_samples(|x| 2.0 * x + 0.3 * x.sin(), 64);
        assert_eq!(winding_number(&u).unwrap(), 2);
        let u = ring_samples(|x| x.cos() + 0.5 * (3.0 * x).sin(), 64);
        assert_eq!(winding_number(&u).unwrap(), 0);
        let u = ring_samples(|x| 0.5 * x, 8);
        assert!(matches!(winding_number(&u), Err(Error::AmbiguousWinding(_))));
        assert!(winding_number(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn basic_mu_is_tight(b in -3.0..3.0_f64, g in -1.0..1.0_f64, u1 in -10.0..10.0_f64, u2 in -10.0..10.0_f64) {
            prop_assume!((u1 - u2).abs() > 1e-9);
            let cfg = JosephsonConfig::new(b, g, 0.0, 1.0);
            let p = josephson_problem(&cfg, Profile::zero(), Profile::zero()).unwrap();
            let q = (p.source.eval(0.0, 0.0, u1, 0.0, 0.0) - p.source.eval(0.0, 0.0, u2, 0.0, 0.0)).abs() / (u1 - u2).abs();
            prop_assert!(q <= b.abs() * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn winding_recovers_integer(m in -5i64..5, amp in 0.0..1.0_f64, n in 4usize..200) {
            let u = ring_samples(|x| m as f64 * x + amp * (2.0 * x).cos(), n);
            prop_assert_eq!(winding_number(&u).unwrap(), m);
        }
    }
}
