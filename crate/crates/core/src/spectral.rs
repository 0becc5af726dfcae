//! Fourier machinery on uniform grids. Dirichlet and Neumann problems are run
//! through the periodic transform by odd/even extension.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::mode_kernel::{EquationParams, ModeKernel};
use crate::reduction::{extend, extend_unchecked, BcKind, Parity};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    /// `[0, L)` with `2N_x` points.
    Periodic,
    /// `[0, L]` with `N_x + 1` points.
    Interval,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceGrid {
    pub kind: GridKind,
    pub nx: usize,
    pub length: f64,
}

impl SpaceGrid {
    pub fn new(kind: GridKind, nx: usize, length: f64) -> Result<Self> {
        if nx < 4 || !nx.is_power_of_two() {
            return Err(Error::GridMismatch(format!("N_x must be a power of two >= 4, got {nx}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::GridMismatch(format!("grid length must be positive, got {length}")));
        }
        Ok(Self { kind, nx, length })
    }

    /// Smallest grid resolving modes `|n| ≤ n_modes` without a Nyquist mode.
    pub fn for_modes(kind: GridKind, n_modes: usize, length: f64) -> Result<Self> {
        Self::new(kind, (n_modes + 1).next_power_of_two().max(4), length)
    }

    pub fn standard(kind: GridKind, nx: usize) -> Result<Self> {
        let length = match kind {
            GridKind::Periodic => 2.0 * PI,
            GridKind::Interval => PI,
        };
        Self::new(kind, nx, length)
    }

    pub fn for_bc(kind: BcKind) -> GridKind {
        match kind {
            BcKind::Periodic => GridKind::Periodic,
            _ => GridKind::Interval,
        }
    }

    /// Number of stored samples.
    pub fn len(&self) -> usize {
        match self.kind {
            GridKind::Periodic => 2 * self.nx,
            GridKind::Interval => self.nx + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        match self.kind {
            GridKind::Periodic => self.length / (2 * self.nx) as f64,
            GridKind::Interval => self.length / self.nx as f64,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..self.len()).map(|j| j as f64 * dx).collect()
    }

    /// Period of the (extended) periodic field.
    pub fn period(&self) -> f64 {
        match self.kind {
            GridKind::Periodic => self.length,
            GridKind::Interval => 2.0 * self.length,
        }
    }

    /// Wavenumber of mode 1.
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.period()
    }

    pub fn max_modes(&self) -> usize {
        self.nx - 1
    }

    fn fft_size(&self) -> usize {
        2 * self.nx
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// `Σ_{|n|≤N} c_n e^{inkx}`.
    ComplexExp,
    /// `Σ_{n=1}^{N} b_n sin(nkx)`.
    Sine,
    /// `Σ_{n=0}^{N} a_n cos(nkx)`.
    Cosine,
}

impl Basis {
    pub fn for_bc(kind: BcKind) -> Self {
        match kind {
            BcKind::Periodic => Basis::ComplexExp,
            BcKind::Dirichlet => Basis::Sine,
            BcKind::Neumann => Basis::Cosine,
        }
    }

    fn parity(self) -> Option<Parity> {
        match self {
            Basis::ComplexExp => None,
            Basis::Sine => Some(Parity::Odd),
            Basis::Cosine => Some(Parity::Even),
        }
    }
}

/// Truncated expansion of a field on one of the three bases.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub basis: Basis,
    pub n_max: usize,
    /// Wavenumber of mode 1.
    pub k0: f64,
    /// `ComplexExp`: index `n + N`; `Sine`/`Cosine`: index `n`, real parts.
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(basis: Basis, n_max: usize, k0: f64) -> Self {
        let len = match basis {
            Basis::ComplexExp => 2 * n_max + 1,
            _ => n_max + 1,
        };
        Self { basis, n_max, k0, coeffs: vec![Complex64::new(0.0, 0.0); len] }
    }

    /// Non-negative half of a real field's spectrum; `c_{−n} = conj(c_n)` for `ComplexExp`.
    pub fn from_half(basis: Basis, k0: f64, half: &[Complex64]) -> Self {
        let n_max = half.len() - 1;
        let mut f = Self::zeros(basis, n_max, k0);
        match basis {
            Basis::ComplexExp => {
                for (n, c) in half.iter().enumerate() {
                    f.coeffs[n_max + n] = *c;
                    f.coeffs[n_max - n] = c.conj();
                }
            }
            Basis::Sine => {
                for (n, c) in half.iter().enumerate().skip(1) {
                    f.coeffs[n] = Complex64::new(c.re, 0.0);
                }
            }
            Basis::Cosine => {
                for (n, c) in half.iter().enumerate() {
                    f.coeffs[n] = Complex64::new(c.re, 0.0);
                }
            }
        }
        f
    }

    /// Coefficient of mode `n`; zero outside the stored range.
    pub fn coeff(&self, n: i64) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        match self.basis {
            Basis::ComplexExp => {
                if n.unsigned_abs() as usize > self.n_max {
                    zero
                } else {
                    self.coeffs[(n + self.n_max as i64) as usize]
                }
            }
            _ => {
                if n < 0 || n as usize > self.n_max || (self.basis == Basis::Sine && n == 0) {
                    zero
                } else {
                    self.coeffs[n as usize]
                }
            }
        }
    }

    pub fn set_coeff(&mut self, n: i64, value: Complex64) {
        match self.basis {
            Basis::ComplexExp => {
                assert!(n.unsigned_abs() as usize <= self.n_max, "mode {n} out of range");
                self.coeffs[(n + self.n_max as i64) as usize] = value;
            }
            _ => {
                assert!(n >= 0 && n as usize <= self.n_max, "mode {n} out of range");
                assert!(!(self.basis == Basis::Sine && n == 0), "sine basis has no mode 0");
                self.coeffs[n as usize] = Complex64::new(value.re, 0.0);
            }
        }
    }

    /// Stored mode indices.
    pub fn modes(&self) -> Vec<i64> {
        let n = self.n_max as i64;
        match self.basis {
            Basis::ComplexExp => (-n..=n).collect(),
            Basis::Sine => (1..=n).collect(),
            Basis::Cosine => (0..=n).collect(),
        }
    }

    /// `Σ|coefficients|` in the basis' own normalisation.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    fn map_modes(&self, mut f: impl FnMut(i64, Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        for n in self.modes() {
            out.set_coeff(n, f(n, self.coeff(n)));
        }
        out
    }

    /// Non-negative half in the layout of [`SpectralField::from_half`].
    pub fn half(&self) -> Vec<Complex64> {
        (0..=self.n_max as i64).map(|n| self.coeff(n)).collect()
    }
}

/// Cached FFT plans for one grid.
#[derive(Clone)]
pub struct SpectralEngine {
    pub grid: SpaceGrid,
    pub n_modes: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralEngine").field("grid", &self.grid).field("n_modes", &self.n_modes).finish()
    }
}

impl SpectralEngine {
    pub fn new(grid: SpaceGrid, n_modes: usize) -> Result<Self> {
        if n_modes > grid.max_modes() {
            return Err(Error::GridMismatch(format!(
                "{n_modes} modes need N_x > {n_modes}, grid has N_x = {}",
                grid.nx
            )));
        }
        let mut planner = FftPlanner::new();
        let m = grid.fft_size();
        Ok(Self { grid, n_modes, fwd: planner.plan_fft_forward(m), inv: planner.plan_fft_inverse(m) })
    }

    fn check_len(&self, samples: &[f64]) -> Result<()> {
        if samples.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                self.grid.len(),
                samples.len()
            )));
        }
        Ok(())
    }

    fn check_basis(&self, basis: Basis) -> Result<()> {
        let ok = matches!(
            (self.grid.kind, basis),
            (GridKind::Periodic, Basis::ComplexExp) | (GridKind::Interval, Basis::Sine | Basis::Cosine)
        );
        if ok {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("basis {basis:?} does not live on a {:?} grid", self.grid.kind)))
        }
    }

    /// Samples to coefficients with parity checks on interval grids.
    pub fn analyze(&self, samples: &[f64], basis: Basis) -> Result<SpectralField> {
        self.check_len(samples)?;
        self.check_basis(basis)?;
        if let Some(parity) = basis.parity() {
            extend(samples, parity, 1e-8)?;
        }
        Ok(self.analyze_unchecked(samples, basis))
    }

    /// As [`SpectralEngine::analyze`] without parity checks.
    pub fn analyze_unchecked(&self, samples: &[f64], basis: Basis) -> SpectralField {
        let mut half = vec![Complex64::new(0.0, 0.0); self.n_modes + 1];
        self.analyze_half(samples, basis, &mut half);
        SpectralField::from_half(basis, self.grid.fundamental(), &half)
    }

    /// Real samples to the non-negative half spectrum (see [`SpectralField::from_half`]).
    pub fn analyze_half(&self, samples: &[f64], basis: Basis, half: &mut [Complex64]) {
        let m = self.grid.fft_size();
        let mut buf: Vec<Complex64> = match basis.parity() {
            None => samples.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            Some(parity) => extend_unchecked(samples, parity).into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        };
        self.fwd.process(&mut buf);
        let scale = 1.0 / m as f64;
        for (n, slot) in half.iter_mut().enumerate() {
            let c = buf[n] * scale;
            *slot = match basis {
                Basis::ComplexExp => c,
                Basis::Sine => Complex64::new(if n == 0 { 0.0 } else { -2.0 * c.im }, 0.0),
                Basis::Cosine => Complex64::new(if n == 0 { c.re } else { 2.0 * c.re }, 0.0),
            };
        }
    }

    /// Half spectrum to grid samples.
    pub fn synthesize_half(&self, half: &[Complex64], basis: Basis, out: &mut [f64]) {
        let m = self.grid.fft_size();
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (n, &c) in half.iter().enumerate() {
            match basis {
                Basis::ComplexExp => {
                    buf[n] = c;
                    if n > 0 {
                        buf[m - n] = c.conj();
                    }
                }
                Basis::Sine => {
                    if n > 0 {
                        buf[n] = Complex64::new(0.0, -0.5 * c.re);
                        buf[m - n] = Complex64::new(0.0, 0.5 * c.re);
                    }
                }
                Basis::Cosine => {
                    if n == 0 {
                        buf[0] = Complex64::new(c.re, 0.0);
                    } else {
                        buf[n] = Complex64::new(0.5 * c.re, 0.0);
                        buf[m - n] = Complex64::new(0.5 * c.re, 0.0);
                    }
                }
            }
        }
        self.inv.process(&mut buf);
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o = b.re;
        }
    }

    /// Coefficients to samples. Real output is enforced for `ComplexExp` by
    /// taking the real part; fields without conjugate symmetry are rejected.
    pub fn synthesize(&self, field: &SpectralField) -> Result<Vec<f64>> {
        self.check_basis(field.basis)?;
        if field.n_max > self.grid.max_modes() {
            return Err(Error::GridMismatch(format!(
                "field has {} modes, grid resolves {}",
                field.n_max,
                self.grid.max_modes()
            )));
        }
        if field.basis == Basis::ComplexExp {
            let scale = field.l1_norm().max(1.0);
            for n in 0..=field.n_max as i64 {
                if (field.coeff(n) - field.coeff(-n).conj()).norm() > 1e-12 * scale {
                    return Err(Error::GridMismatch(format!(
                        "mode {n} breaks conjugate symmetry; the field is not real"
                    )));
                }
            }
        }
        let mut out = vec![0.0; self.grid.len()];
        self.synthesize_half(&field.half(), field.basis, &mut out);
        Ok(out)
    }

    /// Complex samples of an arbitrary `ComplexExp` field on the periodic grid.
    pub fn synthesize_complex(&self, field: &SpectralField) -> Result<Vec<Complex64>> {
        if field.basis != Basis::ComplexExp || self.grid.kind != GridKind::Periodic {
            return Err(Error::GridMismatch("complex synthesis needs a periodic grid".into()));
        }
        let m = self.grid.fft_size();
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let n_max = field.n_max as i64;
        for n in -n_max..=n_max {
            buf[n.rem_euclid(m as i64) as usize] += field.coeff(n);
        }
        self.inv.process(&mut buf);
        Ok(buf)
    }

    /// Complex samples to `ComplexExp` coefficients.
    pub fn analyze_complex(&self, samples: &[Complex64]) -> Result<SpectralField> {
        if self.grid.kind != GridKind::Periodic || samples.len() != self.grid.len() {
            return Err(Error::GridMismatch("complex analysis needs matching periodic samples".into()));
        }
        let m = self.grid.fft_size();
        let mut buf = samples.to_vec();
        self.fwd.process(&mut buf);
        let mut f = SpectralField::zeros(Basis::ComplexExp, self.n_modes, self.grid.fundamental());
        for n in -(self.n_modes as i64)..=self.n_modes as i64 {
            f.set_coeff(n, buf[n.rem_euclid(m as i64) as usize] / m as f64);
        }
        Ok(f)
    }
}

/// One-shot analysis; plans a transform for the given grid.
pub fn analyze(samples: &[f64], grid: &SpaceGrid, bc: BcKind, n_modes: usize) -> Result<SpectralField> {
    SpectralEngine::new(*grid, n_modes)?.analyze(samples, Basis::for_bc(bc))
}

/// One-shot synthesis onto `grid`.
pub fn synthesize(field: &SpectralField, grid: &SpaceGrid) -> Result<Vec<f64>> {
    SpectralEngine::new(*grid, field.n_max)?.synthesize(field)
}

/// Kernel of mode `n` for a field of fundamental wavenumber `k0`.
pub fn mode_kernel_for(params: &EquationParams, k0: f64, n: i64) -> ModeKernel {
    ModeKernel::with_wavenumber(params, n, params.c * k0 * n.unsigned_abs() as f64).expect("validated params")
}

/// Multiplies mode `n` by `H_n(t)` (order 0) or `Ḣ_n(t)` (order 1).
pub fn green_convolve(g: &SpectralField, t: f64, params: &EquationParams, order: u8) -> Result<SpectralField> {
    params.validate()?;
    if order > 1 {
        return Err(Error::InvalidOrder(order));
    }
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    Ok(g.map_modes(|n, c| c * mode_kernel_for(params, g.k0, n).eval_all(t)[order as usize]))
}

/// Solution of `Lu = 0` with data `(u0, u1)` at time `t`, returned with its time derivative.
pub fn homogeneous_evolution(
    u0: &SpectralField,
    u1: &SpectralField,
    t: f64,
    params: &EquationParams,
) -> Result<(SpectralField, SpectralField)> {
    params.validate()?;
    if u0.basis != u1.basis || u0.n_max != u1.n_max || u0.k0 != u1.k0 {
        return Err(Error::GridMismatch("u0 and u1 must share basis, truncation and wavenumber".into()));
    }
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    let mut u = u0.clone();
    let mut ut = u0.clone();
    for n in u0.modes() {
        let kernel = mode_kernel_for(params, u0.k0, n);
        let [h, hd, _] = kernel.eval_all(t);
        let k2 = kernel.wavenumber * kernel.wavenumber;
        let (a0, a1) = (u0.coeff(n), u1.coeff(n));
        u.set_coeff(n, (a1 + a0 * (params.a + params.eps * k2)) * h + a0 * hd);
        ut.set_coeff(n, a1 * hd - a0 * (k2 * h));
    }
    Ok((u, ut))
}

/// `∂x` in coefficient space; sine and cosine bases swap.
pub fn spectral_derivative(g: &SpectralField) -> SpectralField {
    let k0 = g.k0;
    match g.basis {
        Basis::ComplexExp => g.map_modes(|n, c| c * Complex64::new(0.0, n as f64 * k0)),
        Basis::Sine => {
            let mut out = SpectralField::zeros(Basis::Cosine, g.n_max, k0);
            for n in 1..=g.n_max as i64 {
                out.set_coeff(n, g.coeff(n) * (n as f64 * k0));
            }
            out
        }
        Basis::Cosine => {
            let mut out = SpectralField::zeros(Basis::Sine, g.n_max, k0);
            for n in 1..=g.n_max as i64 {
                out.set_coeff(n, g.coeff(n) * (-(n as f64) * k0));
            }
            out
        }
    }
}
