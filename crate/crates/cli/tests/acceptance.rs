//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;

use common::fd::{fd_reference, FdProblem};
use common::rk::kernel_by_rk;
use greenwave::mode_kernel::{EquationParams, ModeKernel};
use greenwave::physics::{josephson_problem, winding_value, JosephsonConfig, JunctionGeometry};
use greenwave::picard::{residual, solve, SolveOutput, SolverConfig};
use greenwave::reduction::{BcKind, BoundarySpec, Profile, ProblemSpec, Source, TimeSignal};
use greenwave::spectral::{analyze, homogeneous_evolution, synthesize, SpaceGrid};
use greenwave::verification::{
    audit_kernel_ode, audit_lemma, audit_prop1, audit_prop2, logspace, prop2_grid, random_kernel_tuples, AuditReport,
    LEMMA_IDS, THETA_IDS,
};

type Outcome = Result<String, String>;

const SWEEP_A: [f64; 3] = [0.0, 0.5, 2.0];
const SWEEP_EPS: [f64; 3] = [0.1, 1.0, 5.0];

fn sweep() -> impl Iterator<Item = EquationParams> {
    SWEEP_A.into_iter().flat_map(|a| SWEEP_EPS.into_iter().map(move |e| EquationParams::canonical(a, e).unwrap()))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()))
}

fn failing_ids(report: &AuditReport, ids: &[&str]) -> Vec<String> {
    ids.iter()
        .filter(|id| report.id_passed(id) != Some(true))
        .map(|id| format!("{id} (min slack {:.3e})", report.min_slack(id).unwrap_or(f64::NAN)))
        .collect()
}

fn lemma_audit() -> Outcome {
    let start = Instant::now();
    let t_grid = logspace(1e-6, 50.0, 200);
    let mut report = AuditReport::default();
    for params in sweep() {
        report = report.merge(audit_lemma(&params, -200..=200, &t_grid).map_err(|e| e.to_string())?);
    }
    let secs = start.elapsed().as_secs_f64();
    let bad = failing_ids(&report, &LEMMA_IDS);
    let detail = format!("{} checks in {secs:.2} s", report.total_checks());
    if !bad.is_empty() {
        return Err(format!("{detail}; failing: {}", bad.join(", ")));
    }
    if secs > 30.0 {
        return Err(format!("{detail}; over the 30 s budget"));
    }
    Ok(detail)
}

fn kernel_ode_cross_oracle() -> Outcome {
    let start = Instant::now();
    let tuples = random_kernel_tuples(2024, 50);
    let mut worst = 0.0_f64;
    for tp in &tuples {
        let params = EquationParams::canonical(tp.a, tp.eps).unwrap();
        let [h, hd, _] = ModeKernel::new(&params, tp.n).unwrap().eval_all(tp.t);
        let k = tp.n.unsigned_abs() as f64;
        let [oh, ohd] = kernel_by_rk(tp.a, tp.eps, k, tp.t, 1e-13);
        let s = k.max(1.0);
        let gap = (s * (h - oh).abs()).max((hd - ohd).abs()) / (s * oh.abs()).max(ohd.abs());
        worst = worst.max(gap);
    }
    let library = audit_kernel_ode(&tuples).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("worst relative gap {worst:.2e} over 50 tuples in {secs:.2} s");
    if worst > 1e-9 || !library.passed() {
        return Err(format!("{detail}; library self-check passed: {}", library.passed()));
    }
    if secs > 5.0 {
        return Err(format!("{detail}; over the 5 s budget"));
    }
    Ok(detail)
}

fn theta_audit() -> Outcome {
    let t_grid = logspace(1e-6, 50.0, 20);
    let mut report = AuditReport::default();
    for params in sweep() {
        report = report.merge(audit_prop1(&params, &t_grid, 200).map_err(|e| e.to_string())?);
    }
    let bad = failing_ids(&report, &THETA_IDS);
    if bad.is_empty() {
        Ok(format!("{} checks", report.total_checks()))
    } else {
        Err(format!("failing: {}", bad.join(", ")))
    }
}

/// `(u, u_t)` of `y'' + (a + ε)y' + y = 0` from the two roots of its characteristic polynomial.
fn single_mode(a: f64, eps: f64, y0: f64, y1: f64, t: f64) -> (f64, f64) {
    let b = a + eps;
    let disc = Complex64::new(b * b - 4.0, 0.0).sqrt();
    let r1 = (-b + disc) / 2.0;
    let r2 = (-b - disc) / 2.0;
    // y = α e^{r1 t} + β e^{r2 t}
    let alpha = (y1 - r2 * y0) / (r1 - r2);
    let beta = (r1 * y0 - y1) / (r1 - r2);
    let (e1, e2) = ((r1 * t).exp(), (r2 * t).exp());
    ((alpha * e1 + beta * e2).re, (alpha * r1 * e1 + beta * r2 * e2).re)
}

fn single_mode_closed_forms() -> Outcome {
    let start = Instant::now();
    let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
    let n_modes = 16;
    let mut worst = 0.0_f64;
    // (bc, u0 is cos x, u1 is sin x)
    let cases = [
        (BcKind::Periodic, true, false),
        (BcKind::Periodic, false, true),
        (BcKind::Dirichlet, false, true),
        (BcKind::Neumann, true, false),
    ];
    for (a, eps) in [(0.1, 0.5), (0.0, 0.1), (2.0, 5.0), (0.5, 1.0)] {
        let params = EquationParams::canonical(a, eps).unwrap();
        for (bc, cos_u0, sin_u1) in cases {
            let length = if bc == BcKind::Periodic { 2.0 * PI } else { PI };
            let grid = SpaceGrid::for_modes(SpaceGrid::for_bc(bc), n_modes, length).unwrap();
            let xs = grid.points();
            let u0: Vec<f64> = xs.iter().map(|&x| if cos_u0 { x.cos() } else { 0.0 }).collect();
            let u1: Vec<f64> = xs.iter().map(|&x| if sin_u1 { x.sin() } else { 0.0 }).collect();
            let f0 = analyze(&u0, &grid, bc, n_modes).map_err(|e| e.to_string())?;
            let f1 = analyze(&u1, &grid, bc, n_modes).map_err(|e| e.to_string())?;
            for &t in &times {
                let (u, ut) = homogeneous_evolution(&f0, &f1, t, &params).map_err(|e| e.to_string())?;
                let u = synthesize(&u, &grid).map_err(|e| e.to_string())?;
                let ut = synthesize(&ut, &grid).map_err(|e| e.to_string())?;
                let (y, yt) = if cos_u0 { single_mode(a, eps, 1.0, 0.0, t) } else { single_mode(a, eps, 0.0, 1.0, t) };
                for (j, &x) in xs.iter().enumerate() {
                    let shape = if cos_u0 { x.cos() } else { x.sin() };
                    worst = worst.max((u[j] - y * shape).abs()).max((ut[j] - yt * shape).abs());
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("worst sup error {worst:.2e} in {secs:.2} s");
    if worst > 1e-10 {
        return Err(detail);
    }
    if secs > 1.0 {
        return Err(format!("{detail}; over the 1 s budget"));
    }
    Ok(detail)
}

fn manufactured_problem() -> ProblemSpec {
    let (a, eps) = (0.1, 0.5);
    let k = 2.0 - a - eps;
    ProblemSpec::new(
        EquationParams::canonical(a, eps).unwrap(),
        BoundarySpec::Periodic { m: 0 },
        Profile::new(|x: f64| x.cos()),
        Profile::new(|x: f64| -x.cos()),
        Source::new(move |x: f64, t: f64, _, _, _| k * (-t).exp() * x.cos(), 0.0),
    )
    .unwrap()
}

fn manufactured_error(dt: f64) -> Result<f64, String> {
    let out = solve(&manufactured_problem(), &SolverConfig::new(2.0, dt, 64)).map_err(|e| e.to_string())?;
    let tr = &out.trajectory;
    let mut err = 0.0_f64;
    for i in 0..tr.n_times() {
        let e = (-tr.times[i]).exp();
        let (u, _, _) = tr.level(i);
        for (j, &x) in tr.x.iter().enumerate() {
            err = err.max((u[j] - e * x.cos()).abs());
        }
    }
    Ok(err)
}

fn manufactured_order() -> Outcome {
    let errs: Vec<f64> = [128.0, 256.0, 512.0].iter().map(|k| manufactured_error(2.0 / k)).collect::<Result<_, _>>()?;
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let detail = format!("errors {:.3e}, {:.3e}, {:.3e}; ratios {:.3}, {:.3}", errs[0], errs[1], errs[2], ratios[0], ratios[1]);
    if ratios.iter().all(|r| (3.2..=4.8).contains(r)) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn desk_config(m: i64) -> (ProblemSpec, SolverConfig) {
    let mut cfg = JosephsonConfig::new(1.0, 0.5, 0.1, 0.5);
    cfg.geometry = JunctionGeometry::Ring { m };
    let p = josephson_problem(&cfg, Profile::new(move |x: f64| m as f64 * x + 0.1 * x.cos()), Profile::zero()).unwrap();
    (p, SolverConfig::new(5.0, 5.0 / 1024.0, 64))
}

fn contraction_honored() -> Outcome {
    let (p, cfg) = desk_config(0);
    let out: SolveOutput = solve(&p, &cfg).map_err(|e| e.to_string())?;
    let factor = out.certificate.factor;
    let worst_ratio = out.log.iter().filter(|r| r.k >= 2).filter_map(|r| r.ratio).fold(0.0_f64, f64::max);
    let r = residual(&out.canonical, &out.reduction.canonical, cfg.n_modes).map_err(|e| e.to_string())?;

    let mut reference = manufactured_problem();
    reference.params = p.params;
    let k = 2.0 - p.params.a - p.params.eps;
    reference.source = Source::new(move |x: f64, t: f64, _, _, _| k * (-t).exp() * x.cos(), 0.0);
    let mref = solve(&reference, &cfg).map_err(|e| e.to_string())?;
    let rref = residual(&mref.canonical, &mref.reduction.canonical, cfg.n_modes).map_err(|e| e.to_string())?;

    let detail = format!(
        "{} iterations, factor {factor:.4}, worst ratio {worst_ratio:.3e}, residual {:.3e} vs manufactured {:.3e}",
        out.log.len(),
        r.sup,
        rref.sup
    );
    if out.converged && out.certificate.valid && worst_ratio <= factor + 1e-6 && r.sup <= 10.0 * rref.sup {
        Ok(detail)
    } else {
        Err(format!("{detail}; converged {}", out.converged))
    }
}

fn fd_check(p: &ProblemSpec, fd: &FdProblem, t_final: f64) -> Result<(f64, f64), String> {
    let out = solve(p, &SolverConfig::new(t_final, t_final / 512.0, 32)).map_err(|e| e.to_string())?;
    let tr = &out.trajectory;
    let u = tr.level(tr.n_times() - 1).0;
    let (reference, est) = fd_reference(fd, t_final, 256, 512, 64);
    let stride = (tr.n_points() - 1) / 64;
    let ours: Vec<f64> = (0..=64).map(|j| u[j * stride]).collect();
    Ok((sup_diff(&ours, &reference), est))
}

fn reduction_round_trips() -> Outcome {
    let lifted = ProblemSpec::new(
        EquationParams::new(0.2, 0.5, 1.0).unwrap(),
        BoundarySpec::Dirichlet {
            h0: TimeSignal::new(|t: f64| [0.3 * t.sin(), 0.3 * t.cos(), -0.3 * t.sin()]),
            hpi: TimeSignal::new(|t: f64| [0.5 + 0.2 * t * t, 0.4 * t, 0.4]),
        },
        Profile::with_derivative(|x: f64| 0.5 * x / PI + x.sin(), |x: f64| 0.5 / PI + x.cos()),
        Profile::with_derivative(|x: f64| 0.3 * (1.0 - x / PI), |_| -0.3 / PI),
        Source::new(|_, _, u: f64, _, _| u.sin() - 0.2, 1.0),
    )
    .unwrap();
    let f1 = |_: f64, _: f64, u: f64, _: f64, _: f64| u.sin() - 0.2;
    let fd1 = FdProblem {
        a: 0.2,
        eps: 0.5,
        c: 1.0,
        h0: &|t: f64| [0.3 * t.sin(), 0.3 * t.cos()],
        hpi: &|t: f64| [0.5 + 0.2 * t * t, 0.4 * t],
        u0: &|x: f64| 0.5 * x / PI + x.sin(),
        u1: &|x: f64| 0.3 * (1.0 - x / PI),
        f: &f1,
    };
    let (d1, e1) = fd_check(&lifted, &fd1, 2.0)?;

    let negative = ProblemSpec::new(
        EquationParams::new(-1.0, 0.5, 1.5).unwrap(),
        BoundarySpec::homogeneous(BcKind::Dirichlet),
        Profile::new(|x: f64| x.sin()),
        Profile::new(|x: f64| 0.5 * (2.0 * x).sin()),
        Source::new(|_, _, u: f64, _, ut: f64| 0.5 * u.sin() + 0.1 * ut, 0.5),
    )
    .unwrap();
    let f2 = |_: f64, _: f64, u: f64, _: f64, ut: f64| 0.5 * u.sin() + 0.1 * ut;
    let fd2 = FdProblem {
        a: -1.0,
        eps: 0.5,
        c: 1.5,
        h0: &|_| [0.0, 0.0],
        hpi: &|_| [0.0, 0.0],
        u0: &|x: f64| x.sin(),
        u1: &|x: f64| 0.5 * (2.0 * x).sin(),
        f: &f2,
    };
    let (d2, e2) = fd_check(&negative, &fd2, 2.0)?;

    let detail = format!("boundary lift diff {d1:.2e} (fd estimate {e1:.1e}); negative damping diff {d2:.2e} (fd estimate {e2:.1e})");
    if d1 <= 5e-3f64.max(10.0 * e1) && d2 <= 5e-3f64.max(10.0 * e2) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn delta_limit() -> Outcome {
    let grid = prop2_grid(BcKind::Periodic, 16).unwrap();
    let g: Vec<f64> = grid.points().iter().map(|&x| x.cos() + 0.3 * (2.0 * x).sin()).collect();
    let mut worst_drop = f64::INFINITY;
    for params in sweep() {
        let audit = audit_prop2(&params, &g, BcKind::Periodic, &[1e-3, 1e-4], 16).map_err(|e| e.to_string())?;
        let [l3, l4] = [audit.levels[0], audit.levels[1]];
        for l in [l3, l4] {
            if l.sup_wgt_err > l.wgt_envelope {
                return Err(format!("a = {}, eps = {}, t = {}: {:.3e} above envelope {:.3e}", params.a, params.eps, l.t, l.sup_wgt_err, l.wgt_envelope));
            }
        }
        let drop = l3.sup_wgt_err / l4.sup_wgt_err;
        if drop < 8.0 {
            return Err(format!("a = {}, eps = {}: error drops only {drop:.2}x", params.a, params.eps));
        }
        worst_drop = worst_drop.min(drop);
    }
    Ok(format!("under the envelope for all 9 parameter pairs; smallest decrease {worst_drop:.2}x"))
}

fn ring_topology() -> Outcome {
    let (p, cfg) = desk_config(1);
    let out = solve(&p, &cfg).map_err(|e| e.to_string())?;
    let tr = &out.trajectory;
    let mut worst = 0.0_f64;
    for i in 0..tr.n_times() {
        let w = winding_value(tr.level(i).0).map_err(|e| e.to_string())?;
        worst = worst.max((w - 1.0).abs());
    }
    let detail = format!("max winding deviation {worst:.1e} over {} snapshots", tr.n_times());
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const DESK_JSON: &str = r#"{
  "equation": { "a": 0.1, "eps": 0.5 },
  "bc": { "kind": "periodic", "m": 0 },
  "initial": { "u0": "0.1*cos(x)", "u1": 0 },
  "source": { "preset": "josephson", "b": 1, "gamma": 0.5 },
  "solver": { "T": 5, "dt": 0.0048828125, "N": 64 },
  "output": { "dir": "out", "snapshot_stride": 8 }
}"#;

fn run_cli(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let config = dir.join("desk.json");
    std::fs::write(&config, DESK_JSON).map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_greenwave"))
        .args(["--config", config.to_str().unwrap(), "--mode", "solve", "--threads", "1", "--seed", "17", "--quiet"])
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("solver exited with {status}"));
    }
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.join("out"))
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_cli(d1.path())?;
    let second = run_cli(d2.path())?;
    let names: Vec<&str> = first.iter().map(|f| f.0.as_str()).collect();
    if first.is_empty() {
        return Err("no output files".into());
    }
    if first == second {
        Ok(format!("identical bytes in {}", names.join(", ")))
    } else {
        Err(format!("outputs differ among {}", names.join(", ")))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("kernel lemma audit", lemma_audit),
        ("kernel ODE cross-oracle", kernel_ode_cross_oracle),
        ("theta series audit", theta_audit),
        ("single-mode exact solutions", single_mode_closed_forms),
        ("manufactured solution order", manufactured_order),
        ("contraction certificate honored", contraction_honored),
        ("reduction round trips", reduction_round_trips),
        ("delta limit", delta_limit),
        ("ring topology", ring_topology),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
