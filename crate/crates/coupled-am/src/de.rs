//! Density evolution for the coupled recall dynamics.
//!
//! The scalar recursion is `z(t+1) = f(g(z(t)); p_e)` with
//! `f(z; p_e) = p_e * lambda(z)` and
//! `g(z) = 1 - sum_{s=0}^{e-1} (z^s / s!) * rho^(s)(1 - z)`,
//! where `rho^(s)` is the s-th derivative of the cluster-side polynomial and
//! `e` is the number of errors each cluster corrects. The coupled recursion
//! averages over a sliding window of half-width `omega` across a chain of
//! `chain_len` planes and is equal, by construction, to the operator form
//! `A^T f(A g(z))` with `A` the banded window-averaging matrix.
//!
//! Potentials are evaluated in closed form; the only searches are the grid +
//! golden-section minimizations and the bisection on `p_e`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Convention, EdgePolynomial};

/// Whether the chain boundary is pinned to the known-correct state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Constrained,
    Unconstrained,
}

/// Parameters of one density-evolution model.
#[derive(Debug, Clone)]
pub struct DEModel {
    lambda: EdgePolynomial,
    rho: EdgePolynomial,
    e: u32,
    omega: usize,
    chain_len: usize,
}

impl DEModel {
    pub fn new(
        lambda: EdgePolynomial,
        rho: EdgePolynomial,
        e: u32,
        omega: usize,
        chain_len: usize,
    ) -> Result<Self> {
        if lambda.convention() != Convention::PatternSide {
            return Err(Error::Config {
                field: "lambda",
                message: "pattern-side convention required".into(),
            });
        }
        if rho.convention() != Convention::ClusterSide {
            return Err(Error::Config {
                field: "rho",
                message: "cluster-side convention required".into(),
            });
        }
        if e < 1 {
            return Err(Error::Config {
                field: "e",
                message: "e >= 1 required".into(),
            });
        }
        if e > 1 + rho.max_degree() {
            return Err(Error::Config {
                field: "e",
                message: format!(
                    "e = {e} exceeds 1 + max degree of rho = {}; g would vanish identically",
                    1 + rho.max_degree()
                ),
            });
        }
        if chain_len < 1 {
            return Err(Error::Config {
                field: "chain_len",
                message: "chain_len >= 1 required".into(),
            });
        }
        Ok(Self {
            lambda,
            rho,
            e,
            omega,
            chain_len,
        })
    }

    pub fn lambda(&self) -> &EdgePolynomial {
        &self.lambda
    }
    pub fn rho(&self) -> &EdgePolynomial {
        &self.rho
    }
    pub fn e(&self) -> u32 {
        self.e
    }
    pub fn omega(&self) -> usize {
        self.omega
    }
    pub fn chain_len(&self) -> usize {
        self.chain_len
    }
}

/// Per-plane average error probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProfile {
    z: Vec<f64>,
}

impl ErrorProfile {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        for &v in &z {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain("z", v, 0.0, 1.0));
            }
        }
        Ok(Self { z })
    }

    pub fn uniform(value: f64, len: usize) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn zeros(len: usize) -> Self {
        Self { z: vec![0.0; len] }
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.z.iter().cloned().fold(0.0, f64::max)
    }

    /// Pins the first and last `omega` entries to zero (side information).
    pub fn pin_boundary(&mut self, omega: usize) {
        let l = self.z.len();
        for i in 0..omega.min(l) {
            self.z[i] = 0.0;
        }
        for i in l.saturating_sub(omega)..l {
            self.z[i] = 0.0;
        }
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<f64> {
    if !(-1e-12..=1.0 + 1e-12).contains(&v) {
        return Err(Error::domain(name, v, 0.0, 1.0));
    }
    Ok(v.clamp(0.0, 1.0))
}

/// Falling factorial d * (d-1) * ... * (d-s+1); 1 for s = 0, 0 once s > d.
fn falling(d: u32, s: u32) -> f64 {
    if s > d {
        return 0.0;
    }
    let mut p = 1.0;
    for t in 0..s {
        p *= f64::from(d - t);
    }
    p
}

fn factorial(s: u32) -> f64 {
    (1..=s).map(f64::from).product::<f64>().max(1.0)
}

/// Binomial coefficient as f64 (n small; relative error ~1e-15).
fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k.min(n));
    let mut c = 1.0;
    for i in 1..=k {
        c = c * f64::from(n - k + i) / f64::from(i);
    }
    c
}

/// Probability that a cluster fails to shield one of its pattern neurons:
/// `g(z) = 1 - sum_{s<e} (z^s/s!) rho^(s)(1-z)`. Nondecreasing on `[0, 1]`.
pub fn g_func(model: &DEModel, z: f64) -> Result<f64> {
    let z = check_unit("z", z)?;
    let omz = 1.0 - z;
    let mut shield = 0.0;
    for (idx, &c) in model.rho.coeffs().iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let d = idx as u32; // cluster-side exponent
        for s in 0..model.e.min(d + 1) {
            shield += c * (z.powi(s as i32) / factorial(s))
                * falling(d, s)
                * omz.powi((d - s) as i32);
        }
    }
    let g = 1.0 - shield;
    // Round-off may push the closed form a hair outside [0,1]; anything larger
    // would be a model error, not noise.
    debug_assert!(g > -1e-12 && g < 1.0 + 1e-12, "g(z) = {g} out of range");
    Ok(g.clamp(0.0, 1.0))
}

/// `f(z; p_e) = p_e * lambda(z)`.
pub fn f_func(model: &DEModel, z: f64, p_e: f64) -> Result<f64> {
    let z = check_unit("z", z)?;
    let p_e = check_unit("p_e", p_e)?;
    Ok(p_e * model.lambda.eval(z)?)
}

/// `int_0^z u^s (1-u)^m du` in closed form: the binomial-tail expansion of the
/// regularized incomplete beta function. All summands are nonnegative, so the
/// evaluation is stable for every degree that occurs here.
fn int_power_product(s: u32, m: u32, z: f64) -> f64 {
    let n = s + m + 1;
    let pref = 1.0 / (f64::from(n) * binomial(n - 1, s));
    let mut tail = 0.0;
    for j in (s + 1)..=n {
        tail += binomial(n, j) * z.powi(j as i32) * (1.0 - z).powi((n - j) as i32);
    }
    pref * tail
}

/// Closed-form antiderivative `G(z) = int_0^z g(u) du`.
pub fn big_g(model: &DEModel, z: f64) -> Result<f64> {
    let z = check_unit("z", z)?;
    let mut shield = 0.0;
    for (idx, &c) in model.rho.coeffs().iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let d = idx as u32;
        for s in 0..model.e.min(d + 1) {
            shield += c * falling(d, s) / factorial(s) * int_power_product(s, d - s, z);
        }
    }
    Ok(z - shield)
}

/// Closed-form antiderivative `F(z; p_e) = p_e * int_0^z lambda(u) du`.
pub fn big_f(model: &DEModel, z: f64, p_e: f64) -> Result<f64> {
    let z = check_unit("z", z)?;
    let p_e = check_unit("p_e", p_e)?;
    Ok(p_e * model.lambda.antiderivative_eval(z)?)
}

/// One step of the uncoupled recursion: `f(g(z); p_e)`.
pub fn de_step_scalar(model: &DEModel, z: f64, p_e: f64) -> Result<f64> {
    f_func(model, g_func(model, z)?, p_e)
}

/// One step of the coupled recursion, computed componentwise.
///
/// With `w = 2*omega + 1` and `g~` the zero-padded componentwise image of `g`
/// (planes outside 1..=L carry no error), the update of plane `j` is
/// `(1/w) * sum_{i=j}^{j+2*omega} f( (1/w) * sum_{j'=i-2*omega}^{i} g~(z_j') )`.
/// In constrained mode the first and last `omega` planes are re-pinned to zero
/// after the step.
pub fn de_step_coupled(model: &DEModel, profile: &ErrorProfile, p_e: f64) -> Result<ErrorProfile> {
    let l = profile.len();
    if l != model.chain_len {
        return Err(Error::DimensionMismatch {
            context: "profile length vs model chain_len",
            expected: model.chain_len,
            got: l,
        });
    }
    let omega = model.omega;
    let w = 2 * omega + 1;
    let inv_w = 1.0 / w as f64;

    let gv: Vec<f64> = profile
        .values()
        .iter()
        .map(|&z| g_func(model, z))
        .collect::<Result<_>>()?;

    // inner window averages, rows i = 0 .. l + 2*omega - 1
    let mut inner = vec![0.0; l + 2 * omega];
    for (i, slot) in inner.iter_mut().enumerate() {
        let lo = i.saturating_sub(2 * omega);
        let hi = i.min(l - 1);
        let acc: f64 = gv[lo..=hi].iter().sum();
        *slot = acc * inv_w;
    }
    let fv: Vec<f64> = inner
        .iter()
        .map(|&v| f_func(model, v, p_e))
        .collect::<Result<_>>()?;

    let mut out = vec![0.0; l];
    for (j, slot) in out.iter_mut().enumerate() {
        let acc: f64 = fv[j..=(j + 2 * omega)].iter().sum();
        *slot = acc * inv_w;
    }
    Ok(ErrorProfile { z: out })
}

/// The banded window-averaging operator `A` of shape `(L + 2*omega) x L`:
/// `A[i][j] = 1/(2*omega+1)` for `j <= i <= j + 2*omega`. Indexing row `i` by
/// its window center `c = i - omega`, rows with centers in
/// `omega+1 ..= L-omega` (1-based) have unit sum; boundary rows are short.
#[derive(Debug, Clone)]
pub struct CouplingOperator {
    pub omega: usize,
    pub chain_len: usize,
    pub mode: Mode,
}

impl CouplingOperator {
    pub fn new(omega: usize, chain_len: usize, mode: Mode) -> Self {
        Self {
            omega,
            chain_len,
            mode,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.chain_len + 2 * self.omega
    }

    /// Dense materialization of `A`.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let w = 2 * self.omega + 1;
        let inv_w = 1.0 / w as f64;
        let mut a = vec![vec![0.0; self.chain_len]; self.n_rows()];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                if j <= i && i <= j + 2 * self.omega {
                    *v = inv_w;
                }
            }
        }
        a
    }
}

/// One step of the coupled recursion via explicit matrix algebra:
/// `A^T f(A g(z); p_e)`. Must agree with [`de_step_coupled`] componentwise to
/// 1e-12 in unconstrained mode; that agreement pins the exact shape of `A`.
pub fn de_step_matrix(
    op: &CouplingOperator,
    model: &DEModel,
    profile: &ErrorProfile,
    p_e: f64,
) -> Result<ErrorProfile> {
    let l = profile.len();
    if l != op.chain_len {
        return Err(Error::DimensionMismatch {
            context: "profile length vs operator chain_len",
            expected: op.chain_len,
            got: l,
        });
    }
    if op.omega != model.omega || op.chain_len != model.chain_len {
        return Err(Error::DimensionMismatch {
            context: "operator geometry vs model",
            expected: model.chain_len,
            got: op.chain_len,
        });
    }
    let a = op.matrix();
    let gv: Vec<f64> = profile
        .values()
        .iter()
        .map(|&z| g_func(model, z))
        .collect::<Result<_>>()?;

    let mut ag = vec![0.0; op.n_rows()];
    for (i, slot) in ag.iter_mut().enumerate() {
        *slot = a[i].iter().zip(&gv).map(|(aij, g)| aij * g).sum();
    }
    let fv: Vec<f64> = ag
        .iter()
        .map(|&v| f_func(model, v, p_e))
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; l];
    for (j, slot) in out.iter_mut().enumerate() {
        *slot = (0..op.n_rows()).map(|i| a[i][j] * fv[i]).sum();
    }
    let mut profile = ErrorProfile { z: out };
    if op.mode == Mode::Constrained {
        profile.pin_boundary(op.omega);
    }
    Ok(profile)
}

/// Scalar potential `U_s(z; p_e) = z*g(z) - G(z) - F(g(z); p_e)`.
pub fn potential_scalar(model: &DEModel, z: f64, p_e: f64) -> Result<f64> {
    let g = g_func(model, z)?;
    Ok(z * g - big_g(model, z)? - big_f(model, g, p_e)?)
}

/// Result of an energy-gap evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyGap {
    /// Minimum of the scalar potential over the contraction-violating region.
    pub value: f64,
    /// Location of the minimizer.
    pub z_at: f64,
    /// True when `f(g(z)) < z` everywhere on the grid, i.e. below the
    /// uncoupled threshold where the only minimum is the trivial one at z = 0.
    pub degenerate: bool,
}

const GAP_GRID: usize = 4096;
const GOLDEN_TOL: f64 = 1e-10;

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Energy gap `Delta_E(p_e) = min_z U_s(z; p_e)`.
///
/// The minimum is taken over the region where the single-step drift
/// `z - f(g(z))` is negative; below the uncoupled threshold that region is
/// empty, the potential is strictly increasing from `U_s(0) = 0`, and the
/// result is flagged degenerate with value 0.
pub fn energy_gap(model: &DEModel, p_e: f64) -> Result<EnergyGap> {
    let p_e = check_unit("p_e", p_e)?;
    let drift_neg_from = (1..=GAP_GRID)
        .map(|i| i as f64 / GAP_GRID as f64)
        .find(|&z| {
            let fz = de_step_scalar(model, z, p_e).expect("z on grid is in domain");
            z < fz
        });
    let Some(z_first) = drift_neg_from else {
        return Ok(EnergyGap {
            value: 0.0,
            z_at: 0.0,
            degenerate: true,
        });
    };

    let us = |z: f64| potential_scalar(model, z, p_e).expect("z in domain");
    let mut best = (z_first, us(z_first));
    let start = (z_first * GAP_GRID as f64).round() as usize;
    for i in start..=GAP_GRID {
        let z = i as f64 / GAP_GRID as f64;
        let u = us(z);
        if u < best.1 {
            best = (z, u);
        }
    }
    let a = (best.0 - 1.0 / GAP_GRID as f64).max(z_first);
    let b = (best.0 + 1.0 / GAP_GRID as f64).min(1.0);
    let (zr, ur) = golden_min(us, a, b);
    let (z_at, value) = if ur < best.1 { (zr, ur) } else { best };
    Ok(EnergyGap {
        value,
        z_at,
        degenerate: false,
    })
}

/// Uncoupled and coupled noise thresholds of one model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Thresholds {
    pub p_dagger: f64,
    pub p_star: f64,
}

const BISECT_TOL: f64 = 1e-6;
const UNCOUPLED_GRID: usize = 8192;

/// Largest `p_e` such that `f(g(z); p_e) < z` for all `z` in `(0, p_e]`:
/// the uncoupled system's convergence threshold. Bisection to 1e-6 with the
/// universally quantified condition checked on an 8192-point grid plus a
/// golden-section refinement around the worst grid point.
pub fn threshold_uncoupled(model: &DEModel) -> Result<f64> {
    let holds = |p_e: f64| -> Result<bool> {
        if p_e <= 0.0 {
            return Ok(true);
        }
        let drift = |z: f64| -> f64 {
            z - de_step_scalar(model, z, p_e).expect("grid z within domain")
        };
        let mut worst = (f64::INFINITY, p_e);
        for i in 1..=UNCOUPLED_GRID {
            let z = p_e * i as f64 / UNCOUPLED_GRID as f64;
            let m = drift(z);
            if m < worst.0 {
                worst = (m, z);
            }
        }
        if worst.0 <= 0.0 {
            return Ok(false);
        }
        let step = p_e / UNCOUPLED_GRID as f64;
        let a = (worst.1 - 2.0 * step).max(f64::MIN_POSITIVE);
        let b = (worst.1 + 2.0 * step).min(p_e);
        let (_, m) = golden_min(drift, a, b);
        Ok(m > 0.0)
    };

    if !holds(1e-6)? {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (1e-6, 1.0);
    if holds(1.0)? {
        return Ok(1.0);
    }
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest `p_e` with a nonnegative energy gap: the coupled (potential)
/// threshold. Returns 1.0 when the gap never turns negative.
pub fn threshold_coupled(model: &DEModel) -> Result<f64> {
    let ok = |p_e: f64| -> Result<bool> { Ok(energy_gap(model, p_e)?.value >= 0.0) };
    if ok(1.0)? {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Both thresholds of a model.
pub fn thresholds(model: &DEModel) -> Result<Thresholds> {
    let p_dagger = threshold_uncoupled(model)?;
    let p_star = threshold_coupled(model)?;
    Ok(Thresholds { p_dagger, p_star })
}

/// Vector potential of the coupled system:
/// `U(z; p_e) = g(z)^T z - sum_i G(z_i) - sum_rows F((A g(z))_row; p_e)`.
pub fn potential_vector(
    op: &CouplingOperator,
    model: &DEModel,
    profile: &ErrorProfile,
    p_e: f64,
) -> Result<f64> {
    let a = op.matrix();
    let mut total = 0.0;
    let mut gv = vec![0.0; profile.len()];
    for (i, &z) in profile.values().iter().enumerate() {
        let g = g_func(model, z)?;
        gv[i] = g;
        total += g * z - big_g(model, z)?;
    }
    for row in &a {
        let w: f64 = row.iter().zip(&gv).map(|(aij, g)| aij * g).sum();
        total -= big_f(model, w, p_e)?;
    }
    Ok(total)
}

/// Finite-difference estimate of the sufficient coupling width
/// `||U''(z; p_e)||_inf / Delta_E(p_e)` (an estimate, not a certificate).
/// The Hessian infinity norm is maximized over uniform profiles.
pub fn sufficient_coupling(model: &DEModel, p_e: f64) -> Result<f64> {
    let gap = energy_gap(model, p_e)?;
    if gap.degenerate {
        return Err(Error::Degenerate(format!(
            "energy gap is degenerate at p_e = {p_e}; no nontrivial minimum below the uncoupled threshold"
        )));
    }
    if gap.value <= 0.0 {
        return Err(Error::Degenerate(format!(
            "energy gap {:.3e} is not positive at p_e = {p_e}",
            gap.value
        )));
    }
    let op = CouplingOperator::new(model.omega, model.chain_len, Mode::Unconstrained);
    let l = model.chain_len;
    let h = 1e-4;
    let mut max_norm = 0.0f64;
    for step in 1..=9 {
        let c = step as f64 / 10.0;
        let base = vec![c; l];
        let u = |z: &[f64]| -> Result<f64> {
            potential_vector(&op, model, &ErrorProfile { z: z.to_vec() }, p_e)
        };
        let mut hess = vec![vec![0.0; l]; l];
        let u0 = u(&base)?;
        for i in 0..l {
            for j in i..l {
                let v = if i == j {
                    let mut zp = base.clone();
                    zp[i] += h;
                    let mut zm = base.clone();
                    zm[i] -= h;
                    (u(&zp)? - 2.0 * u0 + u(&zm)?) / (h * h)
                } else {
                    let mut zpp = base.clone();
                    zpp[i] += h;
                    zpp[j] += h;
                    let mut zpm = base.clone();
                    zpm[i] += h;
                    zpm[j] -= h;
                    let mut zmp = base.clone();
                    zmp[i] -= h;
                    zmp[j] += h;
                    let mut zmm = base.clone();
                    zmm[i] -= h;
                    zmm[j] -= h;
                    (u(&zpp)? - u(&zpm)? - u(&zmp)? + u(&zmm)?) / (4.0 * h * h)
                };
                hess[i][j] = v;
                hess[j][i] = v;
            }
        }
        for row in &hess {
            let s: f64 = row.iter().map(|v| v.abs()).sum();
            max_norm = max_norm.max(s);
        }
    }
    Ok(max_norm / gap.value)
}

/// Per-iteration observer for [`iterate_coupled`].
pub type ProfileSink<'a> = &'a mut dyn FnMut(usize, &ErrorProfile);

/// Outcome of running a recursion until it reaches `tol` or stalls.
#[derive(Debug, Clone)]
pub struct IterationRun {
    pub converged: bool,
    pub iterations: usize,
    pub final_max: f64,
}

/// Iterates the scalar recursion from `z0` until `z < tol`, a fixed point, or
/// `t_max` steps.
pub fn iterate_scalar(
    model: &DEModel,
    p_e: f64,
    z0: f64,
    tol: f64,
    t_max: usize,
) -> Result<IterationRun> {
    let mut z = check_unit("z0", z0)?;
    for t in 0..t_max {
        let zn = de_step_scalar(model, z, p_e)?;
        if zn < tol {
            return Ok(IterationRun {
                converged: true,
                iterations: t + 1,
                final_max: zn,
            });
        }
        if (zn - z).abs() < 1e-15 {
            return Ok(IterationRun {
                converged: false,
                iterations: t + 1,
                final_max: zn,
            });
        }
        z = zn;
    }
    Ok(IterationRun {
        converged: false,
        iterations: t_max,
        final_max: z,
    })
}

/// Iterates the coupled recursion from `profile`, optionally reporting each
/// iterate through `sink`.
pub fn iterate_coupled(
    model: &DEModel,
    p_e: f64,
    profile: &ErrorProfile,
    mode: Mode,
    tol: f64,
    t_max: usize,
    mut sink: Option<ProfileSink<'_>>,
) -> Result<IterationRun> {
    let mut z = profile.clone();
    if mode == Mode::Constrained {
        z.pin_boundary(model.omega);
    }
    for t in 0..t_max {
        let mut zn = de_step_coupled(model, &z, p_e)?;
        if mode == Mode::Constrained {
            zn.pin_boundary(model.omega);
        }
        if let Some(s) = sink.as_deref_mut() {
            s(t + 1, &zn);
        }
        let m = zn.max();
        if m < tol {
            return Ok(IterationRun {
                converged: true,
                iterations: t + 1,
                final_max: m,
            });
        }
        let delta = zn
            .values()
            .iter()
            .zip(z.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if delta < 1e-16 {
            return Ok(IterationRun {
                converged: false,
                iterations: t + 1,
                final_max: m,
            });
        }
        z = zn;
    }
    Ok(IterationRun {
        converged: false,
        iterations: t_max,
        final_max: z.max(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::default_dist;
    use crate::rng::SplitMix64;

    pub(crate) fn sim_model(e: u32, omega: usize, chain_len: usize) -> DEModel {
        let d = default_dist();
        DEModel::new(
            d.lambda_poly().unwrap(),
            d.rho_poly().unwrap(),
            e,
            omega,
            chain_len,
        )
        .unwrap()
    }

    #[test]
    fn g_trivial_endpoints() {
        let m = sim_model(2, 0, 1);
        assert_eq!(g_func(&m, 0.0).unwrap(), 0.0);
        assert_eq!(g_func(&m, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn g_closed_form_e2() {
        // 1 - 0.99^63 - 0.01*63*0.99^62 evaluated directly.
        let m = sim_model(2, 0, 1);
        let expect = 1.0 - 0.99f64.powi(63) - 0.01 * 63.0 * 0.99f64.powi(62);
        let got = g_func(&m, 0.01).unwrap();
        assert!((got - expect).abs() < 1e-15, "got {got} expect {expect}");
        assert!((got - 0.13124547516436036).abs() < 1e-12);
    }

    #[test]
    fn g_nondecreasing() {
        for e in [1, 2, 3] {
            let m = sim_model(e, 0, 1);
            let mut prev = -1.0;
            for i in 0..=500 {
                let v = g_func(&m, i as f64 / 500.0).unwrap();
                assert!(v >= prev - 1e-14);
                prev = v;
            }
        }
    }

    #[test]
    fn f_examples() {
        let m = sim_model(2, 0, 1);
        assert_eq!(f_func(&m, 0.0, 0.7).unwrap(), 0.0);
        assert!((f_func(&m, 1.0, 0.3).unwrap() - 0.3).abs() < 1e-12);
        // Regression constant: lambda(0.5) on the normalized list.
        let v = f_func(&m, 0.5, 1.0).unwrap();
        assert!((v - 0.006854866394842609).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn scalar_step_zero_fixed_point() {
        let m = sim_model(2, 0, 1);
        assert_eq!(de_step_scalar(&m, 0.0, 0.8).unwrap(), 0.0);
        assert_eq!(de_step_scalar(&m, 0.37, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn big_g_endpoint_identity() {
        // 1 - G(1) = e / 64 for the degree-64 cluster polynomial.
        for e in [1u32, 2, 3] {
            let m = sim_model(e, 0, 1);
            let g1 = big_g(&m, 1.0).unwrap();
            assert!((1.0 - g1 - f64::from(e) / 64.0).abs() < 1e-12);
        }
        assert_eq!(big_g(&sim_model(2, 0, 1), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn potential_derivative_identity() {
        // dU_s/dz = g'(z) * (z - f(g(z); p_e)), checked by central differences.
        let m = sim_model(2, 0, 1);
        let mut rng = SplitMix64::new(17);
        for _ in 0..100 {
            let z = rng.uniform(1e-3, 1.0 - 1e-3);
            let p_e = rng.next_f64();
            let h = 1e-6;
            let fd = (potential_scalar(&m, z + h, p_e).unwrap()
                - potential_scalar(&m, z - h, p_e).unwrap())
                / (2.0 * h);
            let gp = (g_func(&m, z + h).unwrap() - g_func(&m, z - h).unwrap()) / (2.0 * h);
            let expect = gp * (z - de_step_scalar(&m, z, p_e).unwrap());
            assert!(
                (fd - expect).abs() < 1e-5,
                "z={z} pe={p_e}: fd={fd} expect={expect}"
            );
        }
    }

    #[test]
    fn potential_zero_at_origin() {
        let m = sim_model(2, 0, 1);
        assert_eq!(potential_scalar(&m, 0.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn coupled_equals_matrix_and_scalar_at_omega_zero() {
        let m = sim_model(2, 0, 7);
        let op = CouplingOperator::new(0, 7, Mode::Unconstrained);
        let mut rng = SplitMix64::new(3);
        let z: Vec<f64> = (0..7).map(|_| rng.next_f64()).collect();
        let prof = ErrorProfile::new(z.clone()).unwrap();
        let a = de_step_coupled(&m, &prof, 0.4).unwrap();
        let b = de_step_matrix(&op, &m, &prof, 0.4).unwrap();
        for (i, &zi) in z.iter().enumerate() {
            assert!((a.values()[i] - b.values()[i]).abs() < 1e-15);
            let s = de_step_scalar(&m, zi, 0.4).unwrap();
            assert!((a.values()[i] - s).abs() < 1e-15);
        }
    }

    #[test]
    fn coupled_zero_profile_fixed() {
        let m = sim_model(2, 2, 9);
        let out = de_step_coupled(&m, &ErrorProfile::zeros(9), 0.9).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coupled_monotone_in_profile() {
        let m = sim_model(2, 2, 15);
        let mut rng = SplitMix64::new(9);
        for _ in 0..20 {
            let z1: Vec<f64> = (0..15).map(|_| rng.next_f64() * 0.5).collect();
            let z2: Vec<f64> = z1.iter().map(|&v| v + rng.next_f64() * (1.0 - v)).collect();
            let a = de_step_coupled(&m, &ErrorProfile::new(z1).unwrap(), 0.35).unwrap();
            let b = de_step_coupled(&m, &ErrorProfile::new(z2).unwrap(), 0.35).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!(x <= &(y + 1e-15));
            }
        }
    }

    #[test]
    fn operator_entries_and_center_rows() {
        let op = CouplingOperator::new(2, 29, Mode::Unconstrained);
        let a = op.matrix();
        let w = 1.0 / 5.0;
        for row in &a {
            for &v in row {
                assert!(v == 0.0 || (v - w).abs() < 1e-15);
            }
        }
        // Rows indexed by window center omega+1..=L-omega (1-based) sum to 1.
        for center in (op.omega + 1)..=(op.chain_len - op.omega) {
            let i = center - 1 + op.omega;
            let s: f64 = a[i].iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "center {center} sum {s}");
        }
    }

    #[test]
    fn threshold_regressions() {
        // Frozen from an independent reference computation of the same
        // closed forms (bisection tolerance 1e-6).
        let m1 = sim_model(1, 0, 1);
        let m2 = sim_model(2, 0, 1);
        let t1 = thresholds(&m1).unwrap();
        let t2 = thresholds(&m2).unwrap();
        assert!((t1.p_dagger - 0.0792651).abs() < 1e-4, "{:?}", t1);
        assert!((t1.p_star - 0.2004209).abs() < 1e-4, "{:?}", t1);
        assert!((t2.p_dagger - 0.1154323).abs() < 1e-4, "{:?}", t2);
        assert!((t2.p_star - 0.4008422).abs() < 1e-4, "{:?}", t2);
        assert!(t1.p_dagger <= t1.p_star);
        assert!(t2.p_dagger <= t2.p_star);
    }

    #[test]
    fn energy_gap_degenerate_below_dagger() {
        let m = sim_model(2, 0, 1);
        let gap = energy_gap(&m, 0.05).unwrap();
        assert!(gap.degenerate);
        assert_eq!(gap.value, 0.0);
    }

    #[test]
    fn energy_gap_negative_at_full_noise() {
        let m = sim_model(2, 0, 1);
        let gap = energy_gap(&m, 1.0).unwrap();
        assert!(!gap.degenerate);
        assert!(gap.value < 0.0);
    }

    #[test]
    fn energy_gap_nonincreasing_in_pe() {
        let m = sim_model(2, 0, 1);
        let pd = threshold_uncoupled(&m).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let p_e = pd + 1e-4 + (1.0 - pd - 1e-4) * i as f64 / 49.0;
            let gap = energy_gap(&m, p_e).unwrap().value;
            assert!(gap <= prev + 1e-9, "gap rose at pe={p_e}");
            prev = gap;
        }
    }

    #[test]
    fn scalar_iteration_below_dagger_converges() {
        let m = sim_model(2, 0, 1);
        let pd = threshold_uncoupled(&m).unwrap();
        let run = iterate_scalar(&m, 0.95 * pd, 0.95 * pd, 1e-9, 100_000).unwrap();
        assert!(run.converged, "{run:?}");
    }

    #[test]
    fn scalar_iteration_stalls_at_0_15_for_e2() {
        // 0.15 sits above the e=2 uncoupled threshold (0.1154), so the
        // fixed-point iteration from z = p_e reaches a nonzero fixed point.
        let m = sim_model(2, 0, 1);
        let run = iterate_scalar(&m, 0.15, 0.15, 1e-9, 100_000).unwrap();
        assert!(!run.converged);
        assert!(run.final_max > 0.1, "stall level {:.4}", run.final_max);
    }

    #[test]
    fn threshold_uncoupled_matches_brute_force_for_linear_lambda() {
        // lambda(x) = x turns the condition into p_e * g(z) < z; a plain
        // 1e-4-resolution scan over (p_e, z) is an independent oracle.
        let lam = EdgePolynomial::new(vec![1.0], Convention::PatternSide).unwrap();
        let rho = default_dist().rho_poly().unwrap();
        let m = DEModel::new(lam, rho, 2, 0, 1).unwrap();
        let fine = threshold_uncoupled(&m).unwrap();

        let mut brute = 0.0;
        let mut pe = 1e-4;
        while pe <= 1.0 {
            let mut ok = true;
            let mut i = 1;
            loop {
                let z = i as f64 * 1e-4;
                if z > pe {
                    break;
                }
                if pe * g_func(&m, z).unwrap() >= z {
                    ok = false;
                    break;
                }
                i += 1;
            }
            if ok {
                brute = pe;
            } else {
                break;
            }
            pe += 1e-4;
        }
        assert!(
            (fine - brute).abs() < 2e-3,
            "bisection {fine:.5} vs brute force {brute:.5}"
        );
    }

    #[test]
    fn coupled_iteration_interior_decreases_below_star() {
        // Unconstrained, omega=2, L=29, all components at 0.3 (below the
        // coupled threshold): by monotonicity of the map the iterates are
        // pointwise nonincreasing, and the profile reaches 1e-9 within 1e4
        // steps. Central components can sit bit-for-bit at the scalar fixed
        // point until the boundary wave arrives, so the per-step comparison
        // allows equality.
        // Components that have fallen to the g-cancellation noise floor
        // (the closed form of g loses absolute accuracy ~1e-16 for z << 1e-8,
        // so iterates bottom out near pe * lambda_1 * 1e-16 ~ 1e-19) are
        // exempt from the per-step comparison.
        const FLOOR: f64 = 1e-15;
        let m = sim_model(2, 2, 29);
        let mut z = ErrorProfile::uniform(0.3, 29).unwrap();
        let mut iters = 0;
        loop {
            let next = de_step_coupled(&m, &z, 0.3).unwrap();
            for (i, (a, b)) in z.values().iter().zip(next.values()).enumerate() {
                assert!(
                    b <= a || *b < FLOOR,
                    "component {i} increased above the noise floor: {a} -> {b}"
                );
            }
            iters += 1;
            if next.max() < 1e-9 {
                break;
            }
            assert!(iters < 10_000, "did not reach 1e-9 within 1e4 steps");
            z = next;
        }
        // The first iterate already decreases strictly at every component.
        let first = de_step_coupled(&m, &ErrorProfile::uniform(0.3, 29).unwrap(), 0.3).unwrap();
        for (i, b) in first.values().iter().enumerate() {
            assert!(*b < 0.3, "component {i} must strictly decrease initially");
        }
    }

    #[test]
    fn sufficient_coupling_grows_toward_star() {
        let m = sim_model(2, 2, 9);
        let near = sufficient_coupling(&m, 0.39).unwrap();
        let far = sufficient_coupling(&m, 0.3).unwrap();
        assert!(
            near > far,
            "bound must blow up as the gap closes: {far:.1} -> {near:.1}"
        );
        assert!(near > 100.0, "near-threshold bound {near:.1}");
    }

    #[test]
    fn sufficient_coupling_large_near_star() {
        let m = sim_model(2, 2, 9);
        let bound = sufficient_coupling(&m, 0.3).unwrap();
        assert!(bound > 2.0, "bound {bound} should exceed the small window widths used in practice");
        // Degenerate below the uncoupled threshold.
        assert!(sufficient_coupling(&m, 0.05).is_err());
    }

    #[test]
    fn dimension_mismatch_errors() {
        let m = sim_model(2, 2, 9);
        let op = CouplingOperator::new(2, 9, Mode::Unconstrained);
        let short = ErrorProfile::zeros(5);
        assert!(matches!(
            de_step_coupled(&m, &short, 0.3),
            Err(crate::error::Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            de_step_matrix(&op, &m, &short, 0.3),
            Err(crate::error::Error::DimensionMismatch { .. })
        ));
        let op_wrong = CouplingOperator::new(1, 9, Mode::Unconstrained);
        assert!(de_step_matrix(&op_wrong, &m, &ErrorProfile::zeros(9), 0.3).is_err());
    }

    #[test]
    fn model_validation() {
        let d = default_dist();
        assert!(DEModel::new(
            d.lambda_poly().unwrap(),
            d.rho_poly().unwrap(),
            0,
            2,
            29
        )
        .is_err());
        assert!(DEModel::new(
            d.lambda_poly().unwrap(),
            d.rho_poly().unwrap(),
            65,
            2,
            29
        )
        .is_err());
        // Conventions must not be swapped.
        assert!(DEModel::new(
            d.rho_poly().unwrap().clone(),
            d.rho_poly().unwrap(),
            2,
            2,
            29
        )
        .is_err());
    }
}
