//! Second-order finite-difference reference for Dirichlet problems on `[0, π]`.
//!
//! Crank–Nicolson for the linear part of `u_t = v`,
//! `v_t = −a v + c²∂x²(εv + u) + f`, with the source extrapolated by
//! Adams–Bashforth 2 and central differences in space.

use std::f64::consts::PI;

pub type Signal<'a> = &'a dyn Fn(f64) -> [f64; 2];
pub type Source<'a> = &'a dyn Fn(f64, f64, f64, f64, f64) -> f64;

pub struct FdProblem<'a> {
    pub a: f64,
    pub eps: f64,
    pub c: f64,
    /// `(h, h')` at `x = 0` and `x = π`.
    pub h0: Signal<'a>,
    pub hpi: Signal<'a>,
    pub u0: &'a dyn Fn(f64) -> f64,
    pub u1: &'a dyn Fn(f64) -> f64,
    pub f: Source<'a>,
}

fn thomas(sub: f64, diag: f64, sup: f64, rhs: &mut [f64]) {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    c[0] = sup / diag;
    rhs[0] /= diag;
    for i in 1..n {
        let m = diag - sub * c[i - 1];
        c[i] = sup / m;
        rhs[i] = (rhs[i] - sub * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// `u(x_j, T)` at `x_j = jπ/m`, `j = 0..=m`, after `k` steps.
pub fn fd_solve(p: &FdProblem, t_final: f64, m: usize, k: usize) -> Vec<f64> {
    let dx = PI / m as f64;
    let dt = t_final / k as f64;
    let xs: Vec<f64> = (0..=m).map(|j| j as f64 * dx).collect();
    let mut u: Vec<f64> = xs.iter().map(|&x| (p.u0)(x)).collect();
    let mut v: Vec<f64> = xs.iter().map(|&x| (p.u1)(x)).collect();
    let beta = dt * p.c * p.c / 2.0;
    let gamma = p.eps + dt / 2.0;
    let diag = 1.0 + p.a * dt / 2.0 + 2.0 * beta * gamma / (dx * dx);
    let off = -beta * gamma / (dx * dx);

    let source = |t: f64, u: &[f64], v: &[f64]| -> Vec<f64> {
        (1..m).map(|j| (p.f)(xs[j], t, u[j], (u[j + 1] - u[j - 1]) / (2.0 * dx), v[j])).collect()
    };
    let mut f_prev: Option<Vec<f64>> = None;
    for step in 0..k {
        let t = step as f64 * dt;
        let t1 = t + dt;
        let f_now = source(t, &u, &v);
        let fh: Vec<f64> = match &f_prev {
            None => f_now.clone(),
            Some(fp) => f_now.iter().zip(fp).map(|(a, b)| 1.5 * a - 0.5 * b).collect(),
        };
        let [g0, g0d] = (p.h0)(t1);
        let [gp, gpd] = (p.hpi)(t1);
        let w: Vec<f64> = (0..=m).map(|j| p.eps * v[j] + u[j]).collect();
        let mut z: Vec<f64> = (0..=m).map(|j| u[j] + dt / 2.0 * v[j]).collect();
        z[0] = p.eps * g0d + g0;
        z[m] = p.eps * gpd + gp;
        let lap = |q: &[f64], j: usize| (q[j - 1] - 2.0 * q[j] + q[j + 1]) / (dx * dx);
        let mut rhs: Vec<f64> = (1..m)
            .map(|j| v[j] * (1.0 - p.a * dt / 2.0) + beta * (lap(&w, j) + lap(&z, j)) + dt * fh[j - 1])
            .collect();
        thomas(off, diag, off, &mut rhs);
        for j in 1..m {
            let vn = rhs[j - 1];
            u[j] += dt / 2.0 * (vn + v[j]);
            v[j] = vn;
        }
        u[0] = g0;
        v[0] = g0d;
        u[m] = gp;
        v[m] = gpd;
        f_prev = Some(f_now);
    }
    u
}

/// Fine-grid solution sampled every `m / coarse` points, with the Richardson
/// estimate `max|u_h − u_{h/2}|/3` of its error.
pub fn fd_reference(p: &FdProblem, t_final: f64, m: usize, k: usize, coarse: usize) -> (Vec<f64>, f64) {
    assert!(m % coarse == 0);
    let uh = fd_solve(p, t_final, m, k);
    let uh2 = fd_solve(p, t_final, 2 * m, 2 * k);
    let s1 = m / coarse;
    let mut est = 0.0_f64;
    let mut out = Vec::with_capacity(coarse + 1);
    for j in 0..=coarse {
        let a = uh[j * s1];
        let b = uh2[2 * j * s1];
        est = est.max((a - b).abs() / 3.0);
        out.push(b);
    }
    (out, est)
}
