//! Picard iteration of the Duhamel integral equation on a space-time grid,
//! with the a-priori contraction certificate of the fixed-point map.

use std::f64::consts::PI;

use log::debug;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mode_kernel::{jacobi_theta3, BoundEnvelope, EquationParams, GAMMA_3_4};
use crate::reduction::{reduce, BcKind, BoundarySpec, ProblemSpec, Reduction};
use crate::spectral::{mode_kernel_for, Basis, SpaceGrid, SpectralEngine};

/// Sampled `(u, u_x, u_t)` on `times × x`, stored row-major by time level.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub ux: Vec<f64>,
    pub ut: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(x: Vec<f64>, times: Vec<f64>) -> Self {
        let n = x.len() * times.len();
        Self { x, times, u: vec![0.0; n], ux: vec![0.0; n], ut: vec![0.0; n] }
    }

    pub fn n_points(&self) -> usize {
        self.x.len()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    fn range(&self, i: usize) -> std::ops::Range<usize> {
        let np = self.n_points();
        i * np..(i + 1) * np
    }

    /// `(u, u_x, u_t)` at time level `i`.
    pub fn level(&self, i: usize) -> (&[f64], &[f64], &[f64]) {
        let r = self.range(i);
        (&self.u[r.clone()], &self.ux[r.clone()], &self.ut[r])
    }

    pub fn at(&self, i: usize, j: usize) -> [f64; 3] {
        let k = i * self.n_points() + j;
        [self.u[k], self.ux[k], self.ut[k]]
    }

    fn same_shape(&self, other: &Trajectory) -> Result<()> {
        if self.x.len() != other.x.len() || self.times.len() != other.times.len() {
            return Err(Error::GridMismatch(format!(
                "trajectories are {}x{} and {}x{}",
                self.times.len(),
                self.x.len(),
                other.times.len(),
                other.x.len()
            )));
        }
        Ok(())
    }

    /// `max |u|` and `max |u_t|` over the whole grid.
    pub fn sup_u_ut(&self) -> (f64, f64) {
        let m = |v: &[f64]| v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        (m(&self.u), m(&self.ut))
    }
}

/// `Σ_{w ∈ {u, u_x, u_t}} max_{i,j} e^{−λt_i}|Δw|`.
pub fn weighted_norm(v1: &Trajectory, v2: &Trajectory, lambda: f64) -> Result<f64> {
    v1.same_shape(v2)?;
    let np = v1.n_points();
    let mut maxima = [0.0_f64; 3];
    for (i, &t) in v1.times.iter().enumerate() {
        let w = (-lambda * t).exp();
        if w == 0.0 {
            continue;
        }
        for (c, (a, b)) in [(&v1.u, &v2.u), (&v1.ux, &v2.ux), (&v1.ut, &v2.ut)].into_iter().enumerate() {
            let r = i * np..(i + 1) * np;
            let level = a[r.clone()].iter().zip(&b[r]).fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
            maxima[c] = maxima[c].max(w * level);
        }
    }
    Ok(maxima.iter().sum())
}

/// Coefficient of the contraction estimate for the fixed-point map at weight `λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionCertificate {
    pub lambda: f64,
    pub mu: f64,
    pub factor: f64,
    pub m_prime: f64,
    pub kappa: f64,
    pub theta: f64,
    pub valid: bool,
}

/// Largest `j` in the `λ = 2/ε + 2^j` schedule.
pub const LAMBDA_SCHEDULE_MAX: i32 = 20;
/// The schedule stops at the first `λ` with factor at most this.
pub const TARGET_FACTOR: f64 = 0.5;

/// `Θ = 2 (2π/ε)^{1/4} θ₃(π/(2εT))^{1/2}`.
pub fn theta_constant(eps: f64, t_final: f64) -> Result<f64> {
    let th = jacobi_theta3(PI / (2.0 * eps * t_final))?;
    Ok(2.0 * (2.0 * PI / eps).powf(0.25) * th.sqrt())
}

/// Factor and `M'` at a given `λ > 2/ε`.
pub fn certificate_at(params: &EquationParams, bc: BcKind, mu: f64, t_final: f64, lambda: f64) -> Result<ContractionCertificate> {
    let eps = params.eps;
    if !(lambda > 2.0 / eps) {
        return Err(Error::InvalidParameter(format!("lambda must exceed 2/eps = {}, got {lambda}", 2.0 / eps)));
    }
    let env = BoundEnvelope::new(params);
    let m_prime = match bc {
        BcKind::Dirichlet => env.m,
        _ if params.a > 0.0 => env.m + 1.0 / params.a,
        _ => env.m + 1.0 / lambda,
    };
    let theta = theta_constant(eps, t_final)?;
    let bracket = 2.0 * m_prime + (2.0 + (12.0 + 2.0 * PI * PI) / (3.0 * eps)).sqrt() + env.kappa.sqrt();
    let factor = mu / lambda * bracket + (lambda - 2.0 / eps).powf(-0.75) * theta * GAMMA_3_4;
    Ok(ContractionCertificate { lambda, mu, factor, m_prime, kappa: env.kappa, theta, valid: factor < 1.0 })
}

/// Contraction certificate for a canonical problem (`a ≥ 0`, unit speed).
///
/// With a hint, that `λ` is used as is; otherwise the schedule
/// `2/ε + 2^j`, `j = 0..=20`, is searched for the first factor `≤ 0.5`,
/// falling back to the smallest factor seen.
pub fn certify(
    params: &EquationParams,
    bc: BcKind,
    mu: f64,
    t_final: f64,
    lambda_hint: Option<f64>,
) -> Result<ContractionCertificate> {
    params.validate()?;
    if params.a < 0.0 {
        return Err(Error::InvalidParameter("certify expects a canonical problem with a >= 0".into()));
    }
    if !(mu >= 0.0) || !(t_final > 0.0) {
        return Err(Error::InvalidParameter(format!("need mu >= 0 and T > 0, got mu = {mu}, T = {t_final}")));
    }
    if let Some(lambda) = lambda_hint {
        return certificate_at(params, bc, mu, t_final, lambda);
    }
    let mut best: Option<ContractionCertificate> = None;
    for j in 0..=LAMBDA_SCHEDULE_MAX {
        let c = certificate_at(params, bc, mu, t_final, 2.0 / params.eps + 2f64.powi(j))?;
        if c.factor <= TARGET_FACTOR {
            return Ok(c);
        }
        if best.map_or(true, |b| c.factor < b.factor) {
            best = Some(c);
        }
    }
    Ok(best.expect("schedule is non-empty"))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub t_final: f64,
    pub dt: f64,
    pub n_modes: usize,
    /// Relative tolerance on successive iterates, in both the weighted and the plain sup norm.
    pub stop_tol: f64,
    pub k_max: usize,
    pub lambda: Option<f64>,
}

impl SolverConfig {
    pub fn new(t_final: f64, dt: f64, n_modes: usize) -> Self {
        Self { t_final, dt, n_modes, stop_tol: 1e-10, k_max: 200, lambda: None }
    }

    /// Number of time steps; `T/Δt` must be an integer up to rounding.
    pub fn steps(&self) -> Result<usize> {
        if !(self.t_final > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("need T > 0 and dt > 0, got {} and {}", self.t_final, self.dt)));
        }
        let k = (self.t_final / self.dt).round();
        if k < 1.0 || ((k * self.dt - self.t_final) / self.t_final).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("T = {} is not a multiple of dt = {}", self.t_final, self.dt)));
        }
        Ok(k as usize)
    }
}

/// Precomputed pieces of the fixed-point map for one canonical problem.
pub struct PicardMap {
    pub problem: ProblemSpec,
    pub engine: SpectralEngine,
    pub basis: Basis,
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    dt: f64,
    /// `H_n(jΔt)` and `Ḣ_n(jΔt)`, one row per mode.
    h: Vec<Vec<f64>>,
    hd: Vec<Vec<f64>>,
    /// Homogeneous evolution, `[level][mode]`.
    hom_u: Vec<Vec<Complex64>>,
    hom_ut: Vec<Vec<Complex64>>,
    u0_samples: Vec<f64>,
    u1_samples: Vec<f64>,
}

impl PicardMap {
    /// `problem` must be canonical: homogeneous boundary data, `a ≥ 0`, `c = 1`.
    pub fn new(problem: &ProblemSpec, cfg: &SolverConfig) -> Result<Self> {
        let params = problem.params;
        if params.a < 0.0 || params.c != 1.0 {
            return Err(Error::InvalidParameter("PicardMap needs a canonical problem (a >= 0, c = 1)".into()));
        }
        let kind = problem.bc.kind();
        let grid = SpaceGrid::for_modes(SpaceGrid::for_bc(kind), cfg.n_modes, problem.length)?;
        let engine = SpectralEngine::new(grid, cfg.n_modes)?;
        let basis = Basis::for_bc(kind);
        let k_steps = cfg.steps()?;
        let dt = cfg.t_final / k_steps as f64;
        let times: Vec<f64> = (0..=k_steps).map(|i| i as f64 * dt).collect();
        let x = grid.points();
        let k0 = grid.fundamental();

        let (h, hd): (Vec<Vec<f64>>, Vec<Vec<f64>>) = (0..=cfg.n_modes as i64)
            .into_par_iter()
            .map(|n| {
                let kernel = mode_kernel_for(&params, k0, n);
                times.iter().map(|&t| {
                    let v = kernel.eval_all(t);
                    (v[0], v[1])
                }).unzip()
            })
            .unzip();

        let u0_samples: Vec<f64> = x.iter().map(|&xj| problem.u0.eval(xj)).collect();
        let u1_samples: Vec<f64> = x.iter().map(|&xj| problem.u1.eval(xj)).collect();
        if let Some(j) = u0_samples.iter().chain(&u1_samples).position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("initial data not finite at x = {}", x[j % x.len()])));
        }
        let mut u0_hat = vec![Complex64::new(0.0, 0.0); cfg.n_modes + 1];
        let mut u1_hat = u0_hat.clone();
        engine.analyze_half(&u0_samples, basis, &mut u0_hat);
        engine.analyze_half(&u1_samples, basis, &mut u1_hat);

        let (hom_u, hom_ut): (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) = (0..times.len())
            .map(|i| {
                (0..=cfg.n_modes)
                    .map(|n| {
                        let k = n as f64 * k0;
                        let k2 = k * k;
                        let (hh, hhd) = (h[n][i], hd[n][i]);
                        let (a0, a1) = (u0_hat[n], u1_hat[n]);
                        ((a1 + a0 * (params.a + params.eps * k2)) * hh + a0 * hhd, a1 * hhd - a0 * (k2 * hh))
                    })
                    .unzip()
            })
            .unzip();

        Ok(Self {
            problem: problem.clone(),
            engine,
            basis,
            times,
            x,
            dt,
            h,
            hd,
            hom_u,
            hom_ut,
            u0_samples,
            u1_samples,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.engine.n_modes
    }

    fn derivative_basis(&self) -> Basis {
        match self.basis {
            Basis::ComplexExp => Basis::ComplexExp,
            Basis::Sine => Basis::Cosine,
            Basis::Cosine => Basis::Sine,
        }
    }

    /// Synthesizes per-level coefficient series into a trajectory whose level 0
    /// carries the exact initial samples.
    fn assemble(&self, coef_u: &[Vec<Complex64>], coef_ut: &[Vec<Complex64>]) -> Trajectory {
        let np = self.x.len();
        let mut traj = Trajectory::zeros(self.x.clone(), self.times.clone());
        let k0 = self.engine.grid.fundamental();
        let dbasis = self.derivative_basis();
        traj.u
            .par_chunks_mut(np)
            .zip(traj.ux.par_chunks_mut(np))
            .zip(traj.ut.par_chunks_mut(np))
            .enumerate()
            .for_each(|(i, ((u, ux), ut))| {
                self.engine.synthesize_half(&coef_u[i], self.basis, u);
                let du: Vec<Complex64> = coef_u[i]
                    .iter()
                    .enumerate()
                    .map(|(n, &c)| {
                        let k = n as f64 * k0;
                        match self.basis {
                            Basis::ComplexExp => c * Complex64::new(0.0, k),
                            Basis::Sine => c * k,
                            Basis::Cosine => c * (-k),
                        }
                    })
                    .collect();
                self.engine.synthesize_half(&du, dbasis, ux);
                self.engine.synthesize_half(&coef_ut[i], self.basis, ut);
            });
        traj.u[..np].copy_from_slice(&self.u0_samples);
        traj.ut[..np].copy_from_slice(&self.u1_samples);
        traj
    }

    /// The homogeneous evolution, used as the initial guess.
    pub fn homogeneous(&self) -> Trajectory {
        self.assemble(&self.hom_u, &self.hom_ut)
    }

    /// One application of the fixed-point map.
    pub fn step(&self, v: &Trajectory) -> Result<Trajectory> {
        let np = self.x.len();
        let nt = self.times.len();
        if v.n_points() != np || v.n_times() != nt {
            return Err(Error::GridMismatch(format!(
                "iterate is {}x{}, map expects {nt}x{np}",
                v.n_times(),
                v.n_points()
            )));
        }
        let f = &self.problem.source;
        let n_half = self.n_modes() + 1;
        let source_hat: Vec<Vec<Complex64>> = (0..nt)
            .into_par_iter()
            .map(|i| {
                let t = self.times[i];
                let (u, ux, ut) = v.level(i);
                let mut samples = Vec::with_capacity(np);
                for j in 0..np {
                    let val = f.eval(self.x[j], t, u[j], ux[j], ut[j]);
                    if !val.is_finite() {
                        return Err(Error::NonFiniteSource { x: self.x[j], t });
                    }
                    samples.push(val);
                }
                let mut half = vec![Complex64::new(0.0, 0.0); n_half];
                self.engine.analyze_half(&samples, self.basis, &mut half);
                Ok(half)
            })
            .collect::<Result<_>>()?;

        let dt = self.dt;
        let per_mode: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..n_half)
            .into_par_iter()
            .map(|n| {
                let (h, hd) = (&self.h[n], &self.hd[n]);
                let fs: Vec<Complex64> = source_hat.iter().map(|row| row[n]).collect();
                let mut cu = vec![Complex64::new(0.0, 0.0); nt];
                let mut cut = cu.clone();
                for i in 1..nt {
                    let mut su = fs[0] * (0.5 * h[i]);
                    let mut sut = fs[0] * (0.5 * hd[i]) + fs[i] * 0.5;
                    for l in 1..i {
                        su += fs[l] * h[i - l];
                        sut += fs[l] * hd[i - l];
                    }
                    cu[i] = su * dt;
                    cut[i] = sut * dt;
                }
                (cu, cut)
            })
            .collect();

        let mut coef_u = self.hom_u.clone();
        let mut coef_ut = self.hom_ut.clone();
        for (n, (cu, cut)) in per_mode.iter().enumerate() {
            for i in 0..nt {
                coef_u[i][n] += cu[i];
                coef_ut[i][n] += cut[i];
            }
        }
        Ok(self.assemble(&coef_u, &coef_ut))
    }
}

/// One application of the fixed-point map for a canonical problem.
pub fn picard_step(v: &Trajectory, p: &ProblemSpec, cfg: &SolverConfig) -> Result<Trajectory> {
    PicardMap::new(p, cfg)?.step(v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub weighted_norm: f64,
    pub sup_norm: f64,
    /// `‖v^{k+1} − v^k‖ / ‖v^k − v^{k−1}‖` in the weighted norm; `None` for
    /// the first iteration or after an exactly vanishing difference.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveWarning {
    NotConverged { iterations: usize, last_norm: f64 },
    CertificateInvalid { factor: f64 },
    BallExceeded { sup_u: f64, sup_ut: f64 },
}

pub struct SolveOutput {
    /// Solution in user coordinates. Rings include the closing point `x = 2π`.
    pub trajectory: Trajectory,
    /// Solution of the canonical problem on the engine grid.
    pub canonical: Trajectory,
    pub reduction: Reduction,
    pub certificate: ContractionCertificate,
    pub log: Vec<IterationRecord>,
    pub warnings: Vec<SolveWarning>,
    pub converged: bool,
}

/// Lifts a canonical trajectory to user coordinates.
pub fn lift_trajectory(reduction: &Reduction, canonical: &Trajectory) -> Trajectory {
    let periodic = matches!(reduction.canonical.bc, BoundarySpec::Periodic { .. });
    let np = canonical.n_points();
    let mut xs = canonical.x.clone();
    if periodic {
        xs.push(reduction.canonical.length);
    }
    let npu = xs.len();
    let user_x: Vec<f64> = xs.iter().map(|&x| reduction.to_user(x, 0.0, [0.0; 3]).0).collect();
    let mut out = Trajectory::zeros(user_x, canonical.times.clone());
    out.u
        .par_chunks_mut(npu)
        .zip(out.ux.par_chunks_mut(npu))
        .zip(out.ut.par_chunks_mut(npu))
        .enumerate()
        .for_each(|(i, ((u, ux), ut))| {
            let t = canonical.times[i];
            for j in 0..npu {
                let state = canonical.at(i, j % np);
                let (_, s) = reduction.to_user(xs[j], t, state);
                u[j] = s[0];
                ux[j] = s[1];
                ut[j] = s[2];
            }
        });
    out
}

fn sup_size(v: &Trajectory, lambda: f64) -> f64 {
    let zero = Trajectory::zeros(v.x.clone(), v.times.clone());
    weighted_norm(v, &zero, lambda).unwrap_or(0.0).max(1.0)
}

/// Reduces `p`, certifies the map, iterates to convergence and lifts back.
pub fn solve(p: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveOutput> {
    if !(cfg.stop_tol > 0.0) || cfg.k_max == 0 {
        return Err(Error::InvalidParameter("stop_tol must be > 0 and k_max >= 1".into()));
    }
    let reduction = reduce(p)?;
    let canonical = &reduction.canonical;
    let certificate = certify(&canonical.params, canonical.bc.kind(), canonical.source.mu, cfg.t_final, cfg.lambda)?;
    let lambda = certificate.lambda;
    let map = PicardMap::new(canonical, cfg)?;

    let mut warnings = Vec::new();
    if !certificate.valid {
        warnings.push(SolveWarning::CertificateInvalid { factor: certificate.factor });
    }
    let ball = canonical.source.ball;
    let mut ball_flagged = false;

    let mut v = map.homogeneous();
    let mut log: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    let mut prev: Option<f64> = None;
    for k in 1..=cfg.k_max {
        let next = map.step(&v)?;
        let w = weighted_norm(&next, &v, lambda)?;
        let s = weighted_norm(&next, &v, 0.0)?;
        let ratio = prev.and_then(|p| (p > 0.0).then(|| w / p));
        log.push(IterationRecord { k, weighted_norm: w, sup_norm: s, ratio });
        debug!("picard k={k} weighted={w:.3e} sup={s:.3e} ratio={ratio:?}");
        if !w.is_finite() || !s.is_finite() {
            return Err(Error::IterationDiverged { norms: log.iter().map(|r| r.weighted_norm).collect() });
        }
        if let (Some(b), false) = (ball, ball_flagged) {
            let user = lift_trajectory(&reduction, &next);
            let (su, sut) = user.sup_u_ut();
            if su > b.u_max || sut > b.ut_max {
                warnings.push(SolveWarning::BallExceeded { sup_u: su, sup_ut: sut });
                ball_flagged = true;
            }
        }
        v = next;
        prev = Some(w);
        if w <= cfg.stop_tol * sup_size(&v, lambda) && s <= cfg.stop_tol * sup_size(&v, 0.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        let sups: Vec<f64> = log.iter().map(|r| r.sup_norm).collect();
        let growing = sups.len() >= 2 && sups[sups.len() - 1] > sups[0];
        if growing {
            return Err(Error::IterationDiverged { norms: log.iter().map(|r| r.weighted_norm).collect() });
        }
        warnings.push(SolveWarning::NotConverged {
            iterations: log.len(),
            last_norm: log.last().map_or(f64::NAN, |r| r.sup_norm),
        });
    }
    let trajectory = lift_trajectory(&reduction, &v);
    Ok(SolveOutput { trajectory, canonical: v, reduction, certificate, log, warnings, converged })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualNorms {
    pub sup: f64,
    /// Root mean square over interior levels and grid points.
    pub l2: f64,
}

/// `Lu − f` over interior time levels: centred differences in `t`, spectral in `x`.
///
/// `p` must have homogeneous boundary data and `traj` must live on the
/// engine grid of `p` with `n_modes` resolved modes.
pub fn residual(traj: &Trajectory, p: &ProblemSpec, n_modes: usize) -> Result<ResidualNorms> {
    let nt = traj.n_times();
    if nt < 5 {
        return Err(Error::TooFewTimeLevels(nt));
    }
    let kind = p.bc.kind();
    if let BoundarySpec::Periodic { m } = p.bc {
        if m != 0 {
            return Err(Error::InvalidParameter("residual expects homogeneous boundary data".into()));
        }
    }
    let grid = SpaceGrid::for_modes(SpaceGrid::for_bc(kind), n_modes, p.length)?;
    if grid.len() != traj.n_points() {
        return Err(Error::GridMismatch(format!("trajectory has {} points, grid {}", traj.n_points(), grid.len())));
    }
    let engine = SpectralEngine::new(grid, n_modes)?;
    let basis = Basis::for_bc(kind);
    let k0 = grid.fundamental();
    let dt = traj.times[1] - traj.times[0];
    let EquationParams { a, eps, c } = p.params;
    let np = traj.n_points();
    let xx = |samples: &[f64]| {
        let mut half = vec![Complex64::new(0.0, 0.0); n_modes + 1];
        engine.analyze_half(samples, basis, &mut half);
        for (n, h) in half.iter_mut().enumerate() {
            let k = n as f64 * k0;
            *h *= -k * k;
        }
        let mut out = vec![0.0; np];
        engine.synthesize_half(&half, basis, &mut out);
        out
    };
    let per_level: Vec<(f64, f64)> = (1..nt - 1)
        .into_par_iter()
        .map(|i| {
            let t = traj.times[i];
            let (u, ux, ut) = traj.level(i);
            let (um, _, _) = traj.level(i - 1);
            let (up, _, _) = traj.level(i + 1);
            let uxx = xx(u);
            let uxxt = xx(ut);
            let mut sup = 0.0_f64;
            let mut sq = 0.0;
            for j in 0..np {
                let utt = (up[j] - 2.0 * u[j] + um[j]) / (dt * dt);
                let lu = utt + a * ut[j] - c * c * (eps * uxxt[j] + uxx[j]);
                let r = lu - p.source.eval(traj.x[j], t, u[j], ux[j], ut[j]);
                sup = sup.max(r.abs());
                sq += r * r;
            }
            (sup, sq)
        })
        .collect();
    let sup = per_level.iter().fold(0.0_f64, |m, r| m.max(r.0));
    let total: f64 = per_level.iter().map(|r| r.1).sum();
    Ok(ResidualNorms { sup, l2: (total / ((nt - 2) * np) as f64).sqrt() })
}
