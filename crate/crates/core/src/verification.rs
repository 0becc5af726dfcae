//! Executable audits of the kernel inequalities, the theta-kernel bounds and
//! the initial limits of the Green-function convolutions.
//!
//! Every check is an inequality `lhs ≤ rhs`; it passes iff
//! `lhs ≤ rhs·(1 + 1e−12) + 1e−300`. Relative slack is `(rhs − lhs)/|rhs|`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{self, Write};
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mode_kernel::{bound_oracles, l2_norm_bounds, BoundEnvelope, EquationParams, LemmaValues, ModeKernel};
use crate::reduction::BcKind;
use crate::spectral::{mode_kernel_for, Basis, SpaceGrid, SpectralEngine, SpectralField};

pub const REL_SLACK: f64 = 1e-12;
pub const ABS_FLOOR: f64 = 1e-300;
/// Tolerance for identities that hold exactly up to rounding (evenness, traces).
pub const EXACT_TOL: f64 = 1e-12;
/// Points per period at which the theta kernel is sampled.
pub const THETA_X_POINTS: usize = 128;

pub const LEMMA_IDS: [&str; 9] = [
    "deriv_bound_l0",
    "deriv_bound_l1",
    "deriv_bound_l2",
    "eps_h_weighted",
    "eps_hdot_weighted",
    "h_mode_decay",
    "h_linear_in_t",
    "hdot_unit",
    "hdot_near_one",
];

pub const THETA_IDS: [&str; 8] = [
    "theta_peak",
    "theta_envelope",
    "theta_x_l2",
    "theta_t_l2",
    "theta_tx_l2",
    "theta_zero_at_t0",
    "theta_even",
    "theta_periodic",
];

pub fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + REL_SLACK) + ABS_FLOOR
}

pub fn slack(lhs: f64, rhs: f64) -> f64 {
    if rhs != 0.0 {
        (rhs - lhs) / rhs.abs()
    } else {
        -lhs
    }
}

/// One evaluated inequality. For pointwise theta checks `n` is the x-grid index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditRecord {
    pub id: &'static str,
    pub n: i64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl AuditRecord {
    pub fn new(id: &'static str, n: i64, t: f64, lhs: f64, rhs: f64) -> Self {
        Self { id, n, t, lhs, rhs, slack: slack(lhs, rhs) }
    }

    pub fn passed(&self) -> bool {
        holds(self.lhs, self.rhs)
    }

    fn sort_slack(&self) -> f64 {
        if self.slack.is_nan() { f64::NEG_INFINITY } else { self.slack }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdSummary {
    pub checks: usize,
    pub failures: usize,
    /// Record with the smallest slack.
    pub worst: AuditRecord,
}

/// Failing records plus per-inequality counts and worst cases.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditReport {
    pub failures: Vec<AuditRecord>,
    pub summary: BTreeMap<&'static str, IdSummary>,
}

impl AuditReport {
    pub fn push(&mut self, rec: AuditRecord) {
        let failed = !rec.passed();
        if failed {
            self.failures.push(rec);
        }
        let entry = self.summary.entry(rec.id).or_insert(IdSummary { checks: 0, failures: 0, worst: rec });
        entry.checks += 1;
        entry.failures += failed as usize;
        if rec.sort_slack() < entry.worst.sort_slack() {
            entry.worst = rec;
        }
    }

    pub fn check(&mut self, id: &'static str, n: i64, t: f64, lhs: f64, rhs: f64) {
        self.push(AuditRecord::new(id, n, t, lhs, rhs));
    }

    /// Appends `other`; records of `self` stay first.
    pub fn merge(mut self, other: AuditReport) -> AuditReport {
        self.failures.extend(other.failures);
        for (id, s) in other.summary {
            match self.summary.get_mut(id) {
                None => {
                    self.summary.insert(id, s);
                }
                Some(e) => {
                    e.checks += s.checks;
                    e.failures += s.failures;
                    if s.worst.sort_slack() < e.worst.sort_slack() {
                        e.worst = s.worst;
                    }
                }
            }
        }
        self
    }

    pub fn total_checks(&self) -> usize {
        self.summary.values().map(|s| s.checks).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.summary.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Whether every check of `id` passed; `None` if it never ran.
    pub fn id_passed(&self, id: &str) -> Option<bool> {
        self.summary.get(id).map(|s| s.failures == 0)
    }

    pub fn min_slack(&self, id: &str) -> Option<f64> {
        self.summary.get(id).map(|s| s.worst.slack)
    }

    /// `inequality_id,n,t,lhs,rhs,slack`: all failures, then the worst case of
    /// each inequality without failures.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "inequality_id,n,t,lhs,rhs,slack")?;
        let row = |w: &mut W, r: &AuditRecord| {
            writeln!(w, "{},{},{:e},{:e},{:e},{:e}", r.id, r.n, r.t, r.lhs, r.rhs, r.slack)
        };
        for r in &self.failures {
            row(&mut w, r)?;
        }
        for s in self.summary.values().filter(|s| s.failures == 0) {
            row(&mut w, &s.worst)?;
        }
        Ok(())
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.summary
            .iter()
            .map(|(id, s)| {
                format!(
                    "{id:<20} {:>4} checks={:<8} failures={:<6} min_slack={:+.3e} at n={} t={:e}",
                    if s.failures == 0 { "PASS" } else { "FAIL" },
                    s.checks,
                    s.failures,
                    s.worst.slack,
                    s.worst.n,
                    s.worst.t
                )
            })
            .collect()
    }
}

/// `m` points logarithmically spaced on `[lo, hi]`, endpoints included.
pub fn logspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..m)
                .map(|i| {
                    if i == m - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (m - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

fn require_nonneg_damping(params: &EquationParams) -> Result<()> {
    params.validate()?;
    if params.a < 0.0 || params.c != 1.0 {
        return Err(Error::InvalidParameter(format!(
            "kernel bounds need a >= 0 and unit wave speed, got a = {}, c = {}",
            params.a, params.c
        )));
    }
    Ok(())
}

/// Kernel inequalities for every `(n, t)` of the sweep.
pub fn audit_lemma(params: &EquationParams, n_range: RangeInclusive<i64>, t_grid: &[f64]) -> Result<AuditReport> {
    audit_lemma_with(params, n_range, t_grid, &|k: &ModeKernel, t: f64| k.eval_all(t))
}

/// As [`audit_lemma`] with a replaceable kernel evaluator (for mutation tests).
pub fn audit_lemma_with(
    params: &EquationParams,
    n_range: RangeInclusive<i64>,
    t_grid: &[f64],
    eval: &(dyn Fn(&ModeKernel, f64) -> [f64; 3] + Sync),
) -> Result<AuditReport> {
    require_nonneg_damping(params)?;
    let ns: Vec<i64> = n_range.collect();
    let report = ns
        .par_iter()
        .map(|&n| {
            let kernel = ModeKernel::new(params, n).expect("validated params");
            let mut r = AuditReport::default();
            for &t in t_grid {
                let v = LemmaValues::from_eval(params, n, eval(&kernel, t));
                let b = bound_oracles(params, n, t);
                for l in 0..3 {
                    if let Some(rhs) = b.derivative[l] {
                        r.check(LEMMA_IDS[l], n, t, v.derivative[l], rhs);
                    }
                }
                if let Some(rhs) = b.eps_h {
                    r.check("eps_h_weighted", n, t, v.eps_h, rhs);
                }
                if let Some(rhs) = b.eps_hdot {
                    r.check("eps_hdot_weighted", n, t, v.eps_hdot, rhs);
                }
                if let Some(rhs) = b.mode_decay {
                    r.check("h_mode_decay", n, t, v.abs_h, rhs);
                }
                r.check("h_linear_in_t", n, t, v.abs_h, b.h_linear_in_t);
                r.check("hdot_unit", n, t, v.abs_hdot, b.hdot_unit);
                r.check("hdot_near_one", n, t, v.one_minus_hdot, b.hdot_near_one);
            }
            r
        })
        .reduce(AuditReport::default, AuditReport::merge);
    Ok(report)
}

/// Theta-kernel bounds with the series truncated at `|n| ≤ n_max`.
///
/// `θ(·, 0) = 0` is checked in addition to the given times.
pub fn audit_prop1(params: &EquationParams, t_grid: &[f64], n_max: usize) -> Result<AuditReport> {
    require_nonneg_damping(params)?;
    let env = BoundEnvelope::new(params);
    let xs: Vec<f64> = (0..THETA_X_POINTS).map(|j| 2.0 * PI * j as f64 / THETA_X_POINTS as f64).collect();
    let mut times = vec![0.0];
    times.extend(t_grid.iter().copied().filter(|&t| t > 0.0));

    let per_t: Vec<AuditReport> = times
        .par_iter()
        .map(|&t| -> Result<AuditReport> {
            let mut r = AuditReport::default();
            let vals: Vec<[f64; 3]> =
                (0..=n_max as i64).map(|n| ModeKernel::new(params, n).expect("validated params").eval_all(t)).collect();
            let theta = |x: f64| {
                let mut s = 0.0;
                for n in (1..=n_max).rev() {
                    s += vals[n][0] * (n as f64 * x).cos();
                }
                (vals[0][0] + 2.0 * s) / (2.0 * PI)
            };
            let th: Vec<f64> = xs.iter().map(|&x| theta(x)).collect();
            let scale = th.iter().fold(1.0_f64, |m, v| m.max(v.abs()));

            if t == 0.0 {
                for (j, v) in th.iter().enumerate() {
                    r.check("theta_zero_at_t0", j as i64, t, v.abs(), 0.0);
                }
                return Ok(r);
            }

            let peak = 2.0 * PI * th[0];
            let sup = th.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for (j, v) in th.iter().enumerate() {
                r.check("theta_peak", j as i64, t, 2.0 * PI * v.abs(), peak);
                let mirrored = theta(-xs[j]);
                r.check("theta_even", j as i64, t, (v - mirrored).abs(), EXACT_TOL * scale);
                let shifted = theta(xs[j] + 2.0 * PI);
                r.check("theta_periodic", j as i64, t, (v - shifted).abs(), EXACT_TOL * scale);
            }
            r.check("theta_envelope", n_max as i64, t, 2.0 * PI * sup.max(th[0]), env.theta_envelope(params, t));

            let mut sums = [0.0_f64; 3];
            for n in (1..=n_max).rev() {
                let n2 = (n * n) as f64;
                let [h, hd, _] = vals[n];
                sums[0] += 2.0 * n2 * h * h;
                sums[1] += 2.0 * hd * hd;
                sums[2] += 2.0 * n2 * hd * hd;
            }
            sums[1] += vals[0][1] * vals[0][1];
            let b = l2_norm_bounds(params, t)?;
            r.check("theta_x_l2", n_max as i64, t, sums[0], b.theta_x);
            r.check("theta_t_l2", n_max as i64, t, sums[1], b.theta_t);
            r.check("theta_tx_l2", n_max as i64, t, sums[2], b.theta_tx);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_t.into_iter().fold(AuditReport::default(), AuditReport::merge))
}

/// Grid on which [`audit_prop2`] expects its `g` samples.
pub fn prop2_grid(bc: BcKind, n_modes: usize) -> Result<SpaceGrid> {
    let kind = SpaceGrid::for_bc(bc);
    let length = if bc == BcKind::Periodic { 2.0 * PI } else { PI };
    SpaceGrid::for_modes(kind, n_modes, length)
}

/// Per-time values of the two initial-limit checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialLimitLevel {
    pub t: f64,
    pub sup_wg: f64,
    pub wg_envelope: f64,
    pub sup_wgt_err: f64,
    pub wgt_envelope: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prop2Audit {
    pub report: AuditReport,
    pub levels: Vec<InitialLimitLevel>,
}

/// `(n, |c_n|)` of the periodic extension in `Σ c_n e^{inx}` form.
fn exp_magnitudes(f: &SpectralField) -> Vec<(i64, f64)> {
    let n_max = f.n_max as i64;
    (-n_max..=n_max)
        .map(|n| {
            let m = n.abs();
            let mag = match f.basis {
                Basis::ComplexExp => f.coeff(n).norm(),
                Basis::Sine => 0.5 * f.coeff(m).re.abs(),
                Basis::Cosine => {
                    if m == 0 {
                        f.coeff(0).re.abs()
                    } else {
                        0.5 * f.coeff(m).re.abs()
                    }
                }
            };
            (n, mag)
        })
        .collect()
}

/// `Σ_n (2h_n + |Im ω_n|) |c_n|`, the slope of the linear bound on `|1 − Ḣ_n|`.
fn linear_slope(params: &EquationParams, k0: f64, mags: &[(i64, f64)]) -> f64 {
    mags.iter()
        .map(|&(n, c)| {
            let k = mode_kernel_for(params, k0, n);
            (2.0 * k.h + k.imag_omega()) * c
        })
        .sum()
}

/// Band-limited test functions `φ` as `(n, φ_n)` lists for the weak delta limit.
pub fn pairing_test_functions() -> Vec<Vec<(i64, Complex64)>> {
    let re = |v: f64| Complex64::new(v, 0.0);
    let im = |v: f64| Complex64::new(0.0, v);
    vec![
        // 1 + cos x
        vec![(0, re(1.0)), (1, re(0.5)), (-1, re(0.5))],
        // cos 3x + 0.5 sin 2x
        vec![(3, re(0.5)), (-3, re(0.5)), (2, im(-0.25)), (-2, im(0.25))],
        // Σ_{n=1}^{8} cos(nx)/n²
        (1..=8).flat_map(|n: i64| [(n, re(0.5 / (n * n) as f64)), (-n, re(0.5 / (n * n) as f64))]).collect(),
    ]
}

/// Initial limits of `w^g` and `w^g_t` as `t → 0`, boundary traces, and the
/// weak delta limit `∫ θ_t(x,t) φ(x) dx → φ(0)`.
///
/// `g` is sampled on [`prop2_grid`]; Dirichlet data must vanish at both ends
/// and Neumann data must have zero slope there.
pub fn audit_prop2(params: &EquationParams, g: &[f64], bc: BcKind, t_seq: &[f64], n_modes: usize) -> Result<Prop2Audit> {
    require_nonneg_damping(params)?;
    let grid = prop2_grid(bc, n_modes)?;
    if g.len() != grid.len() {
        return Err(Error::GridMismatch(format!("g has {} samples, grid needs {}", g.len(), grid.len())));
    }
    let engine = SpectralEngine::new(grid, n_modes)?;
    let basis = Basis::for_bc(bc);
    let field = engine.analyze(g, basis)?;
    let k0 = field.k0;
    let mags = exp_magnitudes(&field);
    let g_l2 = mags.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
    let slope = linear_slope(params, k0, &mags);
    let env = BoundEnvelope::new(params);
    let g_scale = g.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let derivative_scale = mags.iter().map(|&(n, c)| (n as f64 * k0).abs() * c).sum::<f64>().max(1.0);

    let mut report = AuditReport::default();
    let mut levels = Vec::new();
    for &t in t_seq {
        if !(t > 0.0) {
            return Err(Error::NegativeTime(t));
        }
        let w = engine.synthesize(&crate::spectral::green_convolve(&field, t, params, 0)?)?;
        let wt = engine.synthesize(&crate::spectral::green_convolve(&field, t, params, 1)?)?;
        let sup_wg = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let sup_err = wt.iter().zip(g).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let wg_envelope = (t * env.theta_envelope(params, t)).sqrt() * g_l2;
        let wgt_envelope = t * slope;
        report.check("wg_vanishes", n_modes as i64, t, sup_wg, wg_envelope);
        report.check("wgt_near_g", n_modes as i64, t, sup_err, wgt_envelope);
        levels.push(InitialLimitLevel { t, sup_wg, wg_envelope, sup_wgt_err: sup_err, wgt_envelope });

        let last = w.len() - 1;
        match bc {
            BcKind::Dirichlet => {
                let lhs = [w[0], w[last], wt[0], wt[last]].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                report.check("trace_dirichlet", n_modes as i64, t, lhs, EXACT_TOL * g_scale);
            }
            BcKind::Neumann => {
                let mut lhs = 0.0_f64;
                for order in [0u8, 1] {
                    let d = crate::spectral::spectral_derivative(&crate::spectral::green_convolve(&field, t, params, order)?);
                    let s = engine.synthesize(&d)?;
                    lhs = lhs.max(s[0].abs()).max(s[last].abs());
                }
                report.check("trace_neumann", n_modes as i64, t, lhs, EXACT_TOL * derivative_scale);
            }
            BcKind::Periodic => {}
        }

        for (i, phi) in pairing_test_functions().iter().enumerate() {
            let mut pairing = Complex64::new(0.0, 0.0);
            let mut at_zero = Complex64::new(0.0, 0.0);
            let mut phi_mags = Vec::with_capacity(phi.len());
            for &(n, c) in phi {
                let hd = ModeKernel::new(params, n).expect("validated params").eval_all(t)[1];
                pairing += c * hd;
                at_zero += c;
                phi_mags.push((n, c.norm()));
            }
            let rhs = t * linear_slope(params, 1.0, &phi_mags);
            report.check("delta_pairing", i as i64, t, (pairing - at_zero).norm(), rhs);
        }
    }
    Ok(Prop2Audit { report, levels })
}

/// One random kernel evaluation point `(n, a, ε, t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelTuple {
    pub n: i64,
    pub a: f64,
    pub eps: f64,
    pub t: f64,
}

/// `count` tuples with `n ∈ [0, 40]`, `a ∈ [0, 2]`, `ε ∈ [0.1, 5]`, `t ∈ (0, 10]`.
pub fn random_kernel_tuples(seed: u64, count: usize) -> Vec<KernelTuple> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| KernelTuple {
            n: rng.gen_range(0..=40),
            a: rng.gen_range(0.0..2.0),
            eps: rng.gen_range(0.1..5.0),
            t: 10.0 * (1.0 - rng.gen::<f64>()),
        })
        .collect()
}

/// `(H, Ḣ)` at `t` by adaptive Dormand–Prince 5(4) integration of
/// `Ḧ + (a + εk²)Ḣ + k²H = 0` from `(0, 1)`.
pub fn integrate_kernel_ode(a: f64, eps: f64, k: f64, t_end: f64, rtol: f64) -> [f64; 2] {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let damp = a + eps * k * k;
    let k2 = k * k;
    let rhs = |y: [f64; 2]| [y[1], -damp * y[1] - k2 * y[0]];
    // errors are measured in the norm max(k|H|, |Ḣ|)
    let s = k.max(1.0);
    let norm = |y: [f64; 2]| (s * y[0].abs()).max(y[1].abs());

    let mut y = [0.0, 1.0];
    let mut t = 0.0;
    let mut h = (0.1 / (damp + k + 1.0)).min(t_end);
    let mut stages = [[0.0; 2]; 7];
    while t < t_end {
        h = h.min(t_end - t);
        for i in 0..7 {
            let mut yi = y;
            for (j, aij) in A[i].iter().enumerate().take(i) {
                yi[0] += h * aij * stages[j][0];
                yi[1] += h * aij * stages[j][1];
            }
            stages[i] = rhs(yi);
        }
        // the last stage is evaluated at the 5th-order solution (FSAL layout)
        let mut y_new = y;
        let mut err = [0.0; 2];
        for c in 0..2 {
            y_new[c] += h * (0..6).map(|i| A[6][i] * stages[i][c]).sum::<f64>();
            err[c] = h * (0..7).map(|i| E[i] * stages[i][c]).sum::<f64>();
        }
        let scale = rtol * norm(y).max(norm(y_new)).max(f64::MIN_POSITIVE);
        let ratio = norm(err) / scale;
        if ratio <= 1.0 {
            t += h;
            y = y_new;
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    y
}

/// Closed-form kernel against [`integrate_kernel_ode`] at each tuple.
///
/// The check is `max(k|ΔH|, |ΔḢ|) ≤ 1e−9 · max(k|H|, |Ḣ|)` with `k ≥ 1`.
pub fn audit_kernel_ode(tuples: &[KernelTuple]) -> Result<AuditReport> {
    let rows: Vec<Result<AuditRecord>> = tuples
        .par_iter()
        .map(|tp| {
            let params = EquationParams::canonical(tp.a, tp.eps)?;
            let kernel = ModeKernel::new(&params, tp.n)?;
            let [h, hd, _] = kernel.eval_all(tp.t);
            let k = tp.n.unsigned_abs() as f64;
            let [oh, ohd] = integrate_kernel_ode(tp.a, tp.eps, k, tp.t, 1e-13);
            let s = k.max(1.0);
            let diff = (s * (h - oh).abs()).max((hd - ohd).abs());
            let size = (s * oh.abs()).max(ohd.abs());
            Ok(AuditRecord::new("kernel_ode", tp.n, tp.t, diff / size, 1e-9))
        })
        .collect();
    let mut r = AuditReport::default();
    for row in rows {
        r.push(row?);
    }
    Ok(r)
}
