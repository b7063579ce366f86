//! Minimum uncertainty coherent/squeezed states (MUCS) and eigenstates of the
//! lowering operator (AOCS), expanded over the normalized psi_n^m basis.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::eigensystem::EigenSystem;
use crate::error::{Error, Result};
use crate::ladder_phase::{FCoeffs, LadderSet};
use crate::master_catalog::{MasterSpec, Preset, Shape};
use crate::numerics::solve_fixed_point;

/// States whose tail carries more mass than this are flagged.
pub const TAIL_TOL: f64 = 1e-8;
pub const HARD_CAP: usize = 512;
pub const DEFAULT_NTRUNC: usize = 60;
/// Agreement asked of (r, C) and their audited values; truncation alone
/// leaves a bias near 1e-9.
pub const SC_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Mucs,
    Aocs,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Debug, Serialize)]
pub struct MucsParams {
    pub x0: f64,
    pub p0: f64,
    /// r = <G> / (2 (Delta p)^2)
    pub squeeze_ratio: f64,
    pub c: Complex64,
    pub k0: Complex64,
    /// filled in from the built state
    pub g_expect: f64,
    pub delta_p: f64,
    /// the printed constant g at the bottom column
    pub g_printed: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AocsParams {
    pub beta0: Complex64,
    /// C_n / C_m = beta0^{n-m} m!/n! over the unnormalized phi_{n,m}
    pub seed: Vec<Complex64>,
    /// F(k) that turns F(H) A-tilde into an operator with C_n = beta0^n / n!
    pub f_used: Vec<f64>,
    /// (n+1) mu_{n+1} / E(n+1,m) as printed
    pub f_printed: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateParams {
    Mucs(MucsParams),
    Aocs(AocsParams),
    Custom,
}

#[derive(Clone, Debug, Serialize)]
pub struct StateExpansion {
    pub kind: StateKind,
    pub m: usize,
    pub n_trunc: usize,
    /// a_j for j = m..=m + n_trunc
    pub coeffs: Vec<Complex64>,
    pub params: StateParams,
    pub tail_mass: f64,
    pub converged: bool,
}

impl StateExpansion {
    pub fn custom(m: usize, coeffs: Vec<Complex64>) -> Result<StateExpansion> {
        finish(StateKind::Custom, m, coeffs, StateParams::Custom)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Errors unless the truncation diagnostic passed.
    pub fn require_converged(self) -> Result<StateExpansion> {
        if self.converged {
            return Ok(self);
        }
        let (tail_mass, n_trunc) = (self.tail_mass, self.n_trunc);
        Err(match self.kind {
            StateKind::Aocs => Error::DivergentSeries { tail_mass, n_trunc },
            _ => Error::DivergentRecursion { tail_mass, n_trunc },
        })
    }

    /// Coefficients padded with zeros to length `dim`.
    pub fn padded(&self, dim: usize) -> DVector<Complex64> {
        DVector::from_fn(dim, |i, _| self.coeffs.get(i).copied().unwrap_or_default())
    }

    /// psi(x) = sum_j a_j psi_j^m at the grid nodes of `es`.
    pub fn on_grid(&self, es: &EigenSystem) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); es.grid.len()];
        for (a, psi) in self.coeffs.iter().zip(&es.wavefunctions) {
            for (o, &p) in out.iter_mut().zip(psi) {
                *o += a * p;
            }
        }
        out
    }
}

fn tail_mass(c: &[Complex64]) -> f64 {
    let total: f64 = c.iter().map(|a| a.norm_sqr()).sum();
    let k = c.len().div_ceil(10);
    c[c.len() - k..].iter().map(|a| a.norm_sqr()).sum::<f64>() / total
}

fn finish(
    kind: StateKind,
    m: usize,
    mut coeffs: Vec<Complex64>,
    params: StateParams,
) -> Result<StateExpansion> {
    let n_trunc = coeffs.len() - 1;
    if coeffs
        .iter()
        .any(|a| !a.re.is_finite() || !a.im.is_finite())
    {
        return Err(match kind {
            StateKind::Aocs => Error::DivergentSeries {
                tail_mass: f64::INFINITY,
                n_trunc,
            },
            _ => Error::DivergentRecursion {
                tail_mass: f64::INFINITY,
                n_trunc,
            },
        });
    }
    let big = coeffs.iter().map(|a| a.norm()).fold(0.0, f64::max);
    if big == 0.0 {
        return Err(Error::InvalidSpec(
            "state has no nonzero coefficient".into(),
        ));
    }
    for a in &mut coeffs {
        *a /= big;
    }
    let nrm = coeffs.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut coeffs {
        *a /= nrm;
    }
    let tail = if coeffs.len() > 1 {
        tail_mass(&coeffs)
    } else {
        0.0
    };
    Ok(StateExpansion {
        kind,
        m,
        n_trunc,
        coeffs,
        params,
        tail_mass: tail,
        converged: tail < TAIL_TOL,
    })
}

fn clamp_trunc(ls: &LadderSet, n_trunc: usize) -> Result<usize> {
    if n_trunc == 0 || n_trunc > HARD_CAP {
        return Err(Error::ParameterRange(format!(
            "n_trunc = {n_trunc} must lie in 1..={HARD_CAP}"
        )));
    }
    Ok(n_trunc.min(ls.dim() - 1))
}

/// X + i r P as a real matrix; P = -i p0 Kop makes i r P = r p0 Kop.
pub fn mucs_matrix(ls: &LadderSet, r: f64) -> DMatrix<f64> {
    &ls.x_matrix + &ls.kop * (r * ls.p0)
}

/// The squeeze ratio that removes the sub-diagonal entry of X + i r P in the
/// bottom column; for the oscillator it removes the whole sub-diagonal.
pub fn balanced_ratio(ls: &LadderSet) -> f64 {
    -ls.x_matrix[(1, 0)] / (ls.p0 * ls.kop[(1, 0)])
}

/// The constant g of the printed recursion.
pub fn printed_g(sh: &Shape, f: &FCoeffs) -> f64 {
    let FCoeffs { f1, f2, f3, f4 } = *f;
    let (app, ap0) = (sh.app(), sh.c[1]);
    let s = f1 + f3;
    (2.0 * s * (f4 - f2) + 2.0 * (f2 + f4) * (f1 - f3) + 2.0 * ap0 * s - 2.0 * app * (f2 + f4)) / s
}

/// Input of the three-term construction.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MucsInput {
    pub squeeze_ratio: f64,
    pub c: Complex64,
}

impl MucsInput {
    /// Chooses C so that a_{m+1}/a_m = k0 / alpha_{m+1}, the first step of
    /// the lowering-operator eigenstate.
    pub fn from_k0(ls: &LadderSet, r: f64, k0: Complex64) -> MucsInput {
        let mm = mucs_matrix(ls, r);
        MucsInput {
            squeeze_ratio: r,
            c: mm[(0, 0)] + k0 * (mm[(0, 1)] / ls.lower[1]),
        }
    }

    pub fn k0(&self, ls: &LadderSet) -> Complex64 {
        let mm = mucs_matrix(ls, self.squeeze_ratio);
        (self.c - mm[(0, 0)]) * (ls.lower[1] / mm[(0, 1)])
    }
}

fn mucs_params(ls: &LadderSet, sh: &Shape, input: &MucsInput) -> MucsParams {
    MucsParams {
        x0: ls.x0,
        p0: ls.p0,
        squeeze_ratio: input.squeeze_ratio,
        c: input.c,
        k0: input.k0(ls),
        g_expect: 0.0,
        delta_p: 0.0,
        g_printed: printed_g(sh, &ls.f_coeffs[0]),
    }
}

fn fill_audit(ls: &LadderSet, mut st: StateExpansion) -> StateExpansion {
    let au = uncertainty_audit(ls, &st);
    if let StateParams::Mucs(p) = &mut st.params {
        p.g_expect = au.g_expect;
        p.delta_p = au.delta_p;
    }
    st
}

/// Three-term recursion for the eigenstates of X + i r P:
/// a_{j+1} = [(C - M_jj) a_j - M_{j,j-1} a_{j-1}] / M_{j,j+1}.
pub fn mucs_recursion(
    ls: &LadderSet,
    sh: &Shape,
    input: MucsInput,
    n_trunc: usize,
) -> Result<StateExpansion> {
    let nt = clamp_trunc(ls, n_trunc)?;
    let mm = mucs_matrix(ls, input.squeeze_ratio);
    let mut a = vec![Complex64::default(); nt + 1];
    a[0] = Complex64::new(1.0, 0.0);
    for j in 0..nt {
        let up = mm[(j, j + 1)];
        if up == 0.0 || !up.is_finite() {
            return Err(Error::ZeroDenominator { n: ls.m + j });
        }
        let mut v = (input.c - mm[(j, j)]) * a[j];
        if j > 0 {
            v -= a[j - 1] * mm[(j, j - 1)];
        }
        a[j + 1] = v / up;
        rescale(&mut a[..=j + 1]);
    }
    let st = finish(
        StateKind::Mucs,
        ls.m,
        a,
        StateParams::Mucs(mucs_params(ls, sh, &input)),
    )?;
    Ok(fill_audit(ls, st))
}

fn rescale(a: &mut [Complex64]) {
    let last = a[a.len() - 1].norm();
    if last > 1e150 {
        for v in a.iter_mut() {
            *v /= last;
        }
    }
}

/// Default squeeze ratio (as a multiple of `balanced_ratio`) and the largest
/// |k0| (in units of |alpha_{m+1}|) of the standard sweep. Finite intervals
/// prefer squeezing towards x; potentials with few bound states need small
/// displacements to keep the expansion inside the bound spectrum.
pub fn mucs_defaults(spec: &MasterSpec) -> (f64, f64) {
    match spec.preset_id() {
        Some(Preset::ShiftedOscillator | Preset::ThreeDimOscillator) => (1.0, 1.0),
        Some(Preset::Morse) => (1.5, 0.5),
        Some(Preset::Scarf2Hyperbolic) => (1.5, 0.25),
        Some(Preset::Scarf1Trigonometric | Preset::Row7Trigonometric) => (0.25, 0.5),
        Some(Preset::GenPoschlTeller | Preset::Natanzon) => (1.0, 0.5),
        None => (1.0, 0.25),
    }
}

/// Five displacements k0 = kappa |alpha_{m+1}| e^{i pi/4}, kappa up to the default maximum.
pub fn default_sweep(ls: &LadderSet, spec: &MasterSpec) -> Vec<MucsInput> {
    let (fac, kmax) = mucs_defaults(spec);
    let r = fac * balanced_ratio(ls);
    (1..=5)
        .map(|i| {
            let k0 = Complex64::from_polar(
                kmax * i as f64 / 5.0 * ls.lower[1].abs(),
                std::f64::consts::FRAC_PI_4,
            );
            MucsInput::from_k0(ls, r, k0)
        })
        .collect()
}

/// Re-feeds the audited (r, C) with damping 1/2 until the state reproduces
/// its own parameters. Returns the state and the number of iterations.
pub fn mucs_self_consistent(
    ls: &LadderSet,
    sh: &Shape,
    input: MucsInput,
    n_trunc: usize,
) -> Result<(StateExpansion, usize)> {
    let mut cur = input;
    for it in 1..=50 {
        let st = mucs_recursion(ls, sh, cur, n_trunc)?;
        let au = uncertainty_audit(ls, &st);
        let dr = (au.r_self - cur.squeeze_ratio).abs();
        let dc = (au.c_self - cur.c).norm();
        let scale = 1.0 + cur.c.norm() + cur.squeeze_ratio.abs();
        if dr <= SC_TOL * scale && dc <= SC_TOL * scale {
            return Ok((st, it));
        }
        cur = MucsInput {
            squeeze_ratio: 0.5 * (cur.squeeze_ratio + au.r_self),
            c: 0.5 * (cur.c + au.c_self),
        };
    }
    Err(Error::NoConvergence { iterations: 50 })
}

/// Eigenstate of A-tilde: a_{n+1} = k0 a_n / alpha_{n+1}, built in log space.
pub fn mucs_two_term(ls: &LadderSet, k0: Complex64, n_trunc: usize) -> Result<StateExpansion> {
    let nt = clamp_trunc(ls, n_trunc)?;
    let mut ln_mag = vec![0.0; nt + 1];
    let mut phase = vec![0.0; nt + 1];
    for j in 1..=nt {
        let al = ls.lower[j];
        if al == 0.0 {
            return Err(Error::ZeroEnergyDivision { n: ls.m + j });
        }
        ln_mag[j] = ln_mag[j - 1] + k0.norm().ln() - al.abs().ln();
        phase[j] = phase[j - 1] + k0.arg() + if al < 0.0 { std::f64::consts::PI } else { 0.0 };
    }
    let coeffs = from_log(&ln_mag, &phase, k0 == Complex64::default());
    let p = MucsParams {
        x0: ls.x0,
        p0: ls.p0,
        squeeze_ratio: f64::NAN,
        c: Complex64::new(f64::NAN, 0.0),
        k0,
        g_expect: 0.0,
        delta_p: 0.0,
        g_printed: f64::NAN,
    };
    let st = finish(StateKind::Mucs, ls.m, coeffs, StateParams::Mucs(p))?;
    let mut st = fill_audit(ls, st);
    // the matching (r, C) of X + i r P, when one exists, is recovered by the audit
    let au = uncertainty_audit(ls, &st);
    if let StateParams::Mucs(p) = &mut st.params {
        p.squeeze_ratio = au.r_self;
        p.c = au.c_self;
    }
    Ok(st)
}

fn from_log(ln_mag: &[f64], phase: &[f64], only_first: bool) -> Vec<Complex64> {
    let top = ln_mag
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    ln_mag
        .iter()
        .zip(phase)
        .enumerate()
        .map(|(j, (&l, &ph))| {
            if only_first {
                return if j == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::default()
                };
            }
            Complex64::from_polar((l - top).exp(), ph)
        })
        .collect()
}

/// True when A is even, W is even and the interval is symmetric.
pub fn is_symmetric(spec: &MasterSpec) -> bool {
    let sh = spec.shape();
    let (a, b) = spec.interval;
    sh.c[1] == 0.0 && sh.cc == 0.0 && a == -b
}

/// Parity-restricted MUCS: C equals the (constant) diagonal of X + i r P so
/// the recursion couples j to j +- 2 only.
pub fn mucs_parity(
    ls: &LadderSet,
    spec: &MasterSpec,
    squeeze_ratio: f64,
    parity: Parity,
    n_trunc: usize,
) -> Result<StateExpansion> {
    if !is_symmetric(spec) {
        return Err(Error::ParityUnavailable);
    }
    let nt = clamp_trunc(ls, n_trunc)?;
    let mm = mucs_matrix(ls, squeeze_ratio);
    let c = mm[(0, 0)];
    let scale = mm.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if (0..=nt).any(|j| (mm[(j, j)] - c).abs() > 1e-9 * scale) {
        return Err(Error::ParityUnavailable);
    }
    let mut a = vec![Complex64::default(); nt + 1];
    let start = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    if start > nt {
        return Err(Error::TruncationTooSmall {
            nmax: ls.nmax,
            m: ls.m,
        });
    }
    a[start] = Complex64::new(1.0, 0.0);
    let mut j = start + 1;
    while j < nt {
        let up = mm[(j, j + 1)];
        if up == 0.0 {
            return Err(Error::ZeroDenominator { n: ls.m + j });
        }
        a[j + 1] = -a[j - 1] * mm[(j, j - 1)] / up;
        rescale(&mut a[..=j + 1]);
        j += 2;
    }
    let input = MucsInput {
        squeeze_ratio,
        c: Complex64::new(c, 0.0),
    };
    let sh = spec.shape();
    let mut p = mucs_params(ls, &sh, &input);
    p.k0 = Complex64::default();
    let st = finish(StateKind::Mucs, ls.m, a, StateParams::Mucs(p))?;
    Ok(fill_audit(ls, st))
}

/// Default squeeze ratio of `mucs_parity`, as a multiple of `balanced_ratio`.
/// Short spectra need r above balance, long ones below.
pub fn parity_default_factor(spec: &MasterSpec) -> f64 {
    match spec.preset_id() {
        Some(Preset::Scarf2Hyperbolic) => 2.0,
        _ => 0.5,
    }
}

/// max |psi(-xi) -/+ psi(xi)| / max |psi| over mirrored grid nodes.
pub fn parity_defect(es: &EigenSystem, st: &StateExpansion, parity: Parity) -> f64 {
    let psi = st.on_grid(es);
    let n = psi.len();
    let s = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    let top = psi
        .iter()
        .map(|v| v.norm())
        .fold(f64::MIN_POSITIVE, f64::max);
    (0..n)
        .map(|k| (psi[n - 1 - k] - psi[k] * s).norm())
        .fold(0.0, f64::max)
        / top
}

/// Even or odd eigenstate of A-tilde^2 with eigenvalue k0^2:
/// a_{j+2} = k0^2 a_j / (alpha_{j+1} alpha_{j+2}).
pub fn cat_state(
    ls: &LadderSet,
    spec: &MasterSpec,
    k0: Complex64,
    parity: Parity,
    n_trunc: usize,
) -> Result<StateExpansion> {
    if !is_symmetric(spec) {
        return Err(Error::ParityUnavailable);
    }
    let nt = clamp_trunc(ls, n_trunc)?;
    let start = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    let mut ln_mag = vec![f64::NEG_INFINITY; nt + 1];
    let mut phase = vec![0.0; nt + 1];
    ln_mag[start] = 0.0;
    let mut j = start;
    while j + 2 <= nt {
        let den = ls.lower[j + 1] * ls.lower[j + 2];
        if den == 0.0 {
            return Err(Error::ZeroEnergyDivision { n: ls.m + j + 1 });
        }
        ln_mag[j + 2] = ln_mag[j] + 2.0 * k0.norm().ln() - den.abs().ln();
        phase[j + 2] =
            phase[j] + 2.0 * k0.arg() + if den < 0.0 { std::f64::consts::PI } else { 0.0 };
        j += 2;
    }
    let zero = k0 == Complex64::default();
    let mut coeffs = from_log(&ln_mag, &phase, false);
    if zero {
        coeffs
            .iter_mut()
            .enumerate()
            .for_each(|(i, a)| *a = if i == start { 1.0.into() } else { 0.0.into() });
    }
    let p = MucsParams {
        x0: ls.x0,
        p0: ls.p0,
        squeeze_ratio: f64::NAN,
        c: Complex64::new(f64::NAN, 0.0),
        k0,
        g_expect: 0.0,
        delta_p: 0.0,
        g_printed: f64::NAN,
    };
    let st = finish(StateKind::Mucs, ls.m, coeffs, StateParams::Mucs(p))?;
    Ok(fill_audit(ls, st))
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub x_expect: f64,
    pub p_expect: f64,
    pub delta_x: f64,
    pub delta_p: f64,
    pub g_expect: f64,
    /// <G> / (2 (Delta p)^2) recomputed from the state
    pub r_self: f64,
    /// <X> + i r_self <P>
    pub c_self: Complex64,
    /// |(X + i r P) psi - C psi| / (|psi| |X|_inf) at the recomputed (r, C)
    pub eigen_residual: f64,
    /// Delta x Delta p - |<G>|/2
    pub saturation_defect: f64,
    pub relative_defect: f64,
}

pub fn uncertainty_audit(ls: &LadderSet, st: &StateExpansion) -> AuditReport {
    let dim = ls.dim().max(st.coeffs.len());
    let a = st.padded(dim);
    let lift = |mat: &DMatrix<f64>| {
        DMatrix::from_fn(dim, dim, |i, j| {
            if i < mat.nrows() && j < mat.ncols() {
                Complex64::new(mat[(i, j)], 0.0)
            } else {
                Complex64::default()
            }
        })
    };
    let x = lift(&ls.x_matrix);
    let kop = lift(&ls.kop);
    let p = kop.map(|v| v * Complex64::new(0.0, -ls.p0));
    let g = lift(&ls.g_matrix);
    let nrm2 = a.norm_squared();
    let xa = &x * &a;
    let pa = &p * &a;
    let x_expect = a.dotc(&xa).re / nrm2;
    let p_expect = a.dotc(&pa).re / nrm2;
    let dx2 = (xa.norm_squared() / nrm2 - x_expect * x_expect).max(0.0);
    let dp2 = (pa.norm_squared() / nrm2 - p_expect * p_expect).max(0.0);
    let g_expect = a.dotc(&(&g * &a)).re / nrm2;
    let r_self = g_expect / (2.0 * dp2);
    let c_self = Complex64::new(x_expect, r_self * p_expect);
    let res = &xa + &pa * Complex64::new(0.0, r_self) - &a * c_self;
    let xnorm = (0..ls.dim())
        .map(|i| ls.x_matrix.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let defect = (dx2 * dp2).sqrt() - 0.5 * g_expect.abs();
    AuditReport {
        x_expect,
        p_expect,
        delta_x: dx2.sqrt(),
        delta_p: dp2.sqrt(),
        g_expect,
        r_self,
        c_self,
        eigen_residual: res.norm() / (nrm2.sqrt() * xnorm),
        saturation_defect: defect,
        relative_defect: defect / g_expect.abs(),
    }
}

/// F(k) in the eigenbasis, k = m..=nmax: (k+1) / r_A(k+1), where A-tilde
/// phi_{k+1,m} = r_A(k+1) phi_{k,m} on the unnormalized functions.
pub fn aocs_f_values(ls: &LadderSet) -> Vec<f64> {
    let dim = ls.dim();
    (0..dim)
        .map(|i| {
            if i + 1 >= dim {
                return f64::NAN;
            }
            let k = ls.m + i;
            let r_a = ls.lower[i + 1] * (ls.ln_nu[i + 1] - ls.ln_nu[i]).exp();
            (k as f64 + 1.0) / r_a
        })
        .collect()
}

/// The printed F(n+1) = (n+1) mu_{n+1} / E(n+1,m) for n = m..nmax-1.
pub fn aocs_f_printed(ls: &LadderSet, sh: &Shape) -> Vec<f64> {
    (ls.m..ls.nmax)
        .map(|n| (n as f64 + 1.0) * sh.mu(n + 1) / sh.energy(n + 1, ls.m))
        .collect()
}

/// Eigenstate of F(H) A-tilde with eigenvalue beta0. Over phi_{n,m} the
/// coefficients are beta0^n / n!; over psi_n^m they pick up the norms nu_n.
pub fn aocs_recursion(
    ls: &LadderSet,
    sh: &Shape,
    beta0: Complex64,
    n_trunc: usize,
) -> Result<StateExpansion> {
    let nt = clamp_trunc(ls, n_trunc)?;
    let m = ls.m;
    let mut ln_mag = vec![0.0; nt + 1];
    let mut phase = vec![0.0; nt + 1];
    let mut seed = Vec::with_capacity(nt + 1);
    for i in 0..=nt {
        let n = m + i;
        let lc = i as f64 * beta0.norm().ln() + ln_gamma(m as f64 + 1.0) - ln_gamma(n as f64 + 1.0);
        seed.push(if i == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(lc.exp(), i as f64 * beta0.arg())
        });
        ln_mag[i] = lc + ls.ln_nu[i] - ls.ln_nu[0];
        phase[i] = i as f64 * beta0.arg();
    }
    let coeffs = from_log(&ln_mag, &phase, beta0 == Complex64::default());
    let p = AocsParams {
        beta0,
        seed,
        f_used: aocs_f_values(ls),
        f_printed: aocs_f_printed(ls, sh),
    };
    let st = finish(StateKind::Aocs, m, coeffs, StateParams::Aocs(p))?;
    Ok(st)
}

/// |F(H) A-tilde psi - beta0 psi| / |psi| on the retained block, excluding
/// the top row where F needs the next level.
pub fn aocs_residual(ls: &LadderSet, st: &StateExpansion, beta0: Complex64) -> f64 {
    let f = aocs_f_values(ls);
    let n = st.coeffs.len();
    let mut r2 = 0.0;
    for i in 0..n.saturating_sub(1) {
        let fa = st.coeffs[i + 1] * ls.lower[i + 1] * f[i];
        r2 += (fa - beta0 * st.coeffs[i]).norm_sqr();
    }
    r2.sqrt() / st.norm_sqr().sqrt()
}

/// Sum_n t^n/n! A^{1/4} W^{1/2} phi_{n,m}(x) over the grid of `es`, n = m..=nmax.
pub fn aocs_series_on_grid(es: &EigenSystem, t: f64) -> Vec<f64> {
    let m = es.m;
    let mut out = vec![0.0; es.grid.len()];
    for (i, psi) in es.wavefunctions.iter().enumerate() {
        let n = m + i;
        let c = if t == 0.0 {
            if n == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            let s = if t < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
            s * (n as f64 * t.abs().ln() - ln_gamma(n as f64 + 1.0) + es.sector.ln_nu[n]).exp()
        };
        for (o, &p) in out.iter_mut().zip(psi) {
            *o += c * p;
        }
    }
    out
}

/// A(x), in factored form when the roots are real so that it keeps its
/// relative accuracy next to a root.
fn a_factored(sh: &Shape, x: f64) -> f64 {
    let [c0, c1, c2] = sh.c;
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if c2 == 0.0 || disc < 0.0 {
        return sh.a(x);
    }
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    if q == 0.0 {
        return c2 * x * x;
    }
    let (r1, r2) = (q / c2, c0 / q);
    c2 * (x - r1) * (x - r2)
}

/// A^{1/4} W^{1/2} (-1)^m A^{m/2} (d/dx)^m [W(z)/W(x) dz/dx], z = x + t A(z).
/// Available for m <= 2. Everything is written in d = z - x so that nodes
/// close to a root of A do not cancel.
pub fn aocs_closed_form(spec: &MasterSpec, m: usize, t: f64, x: f64) -> Result<f64> {
    if m > 2 {
        return Err(Error::BadQuantumNumbers { n: m, m });
    }
    let sh = spec.shape();
    let (ax, apx, c2) = (a_factored(&sh, x), sh.ap(x), sh.c[2]);
    let da = |d: f64| d * (apx + c2 * d);
    let tol = (4.0 * f64::EPSILON * (t * ax).abs()).max(f64::MIN_POSITIVE);
    let d = solve_fixed_point(|d| t * (ax + da(d)), t * ax, tol)?;
    let (lo, hi) = spec.interval;
    let z = x + d;
    if !(z > lo && z < hi) {
        return Err(Error::OutOfInterval { x: z });
    }
    let app = sh.app();
    let az = ax + da(d);
    let apz = apx + app * d;
    let l1x = sh.l1(x);
    let l1z = l1x + sh.a1 * d;
    let zp = 1.0 / (1.0 - t * apz);
    let zp_m1 = t * apz * zp;
    let zpp = t * app * zp.powi(3);
    let ell_z = l1z / az;
    // ell(z) - ell(x) and ell'(z) - ell'(x), ell = L1 / A
    let d_ell = d * (sh.a1 * ax - l1x * apx - l1x * c2 * d) / (az * ax);
    let nx = sh.a1 * ax - l1x * apx;
    let nz = nx - c2 * d * (2.0 * l1x + sh.a1 * d);
    let d_ell_d = ((nz - nx) * ax * ax - nx * da(d) * (ax + az)) / (az * az * ax * ax);
    let ell_d_z = nz / (az * az);
    let lg1 = ell_z * zp_m1 + d_ell + t * app * zp * zp;
    let lg2 = ell_d_z * (zp * zp - 1.0) + d_ell_d + ell_z * zpp + 2.0 * t * app * zp * zpp;
    let factor = match m {
        0 => 1.0,
        1 => -lg1,
        _ => lg1 * lg1 + lg2,
    };
    let ln_env =
        (0.25 + 0.5 * m as f64) * ax.ln() + 0.5 * spec.weight.ln_w(x) + spec.weight.ln_ratio(x, d);
    Ok(factor * zp * ln_env.exp())
}

/// Nodes where the closed form is compared: |t| (|A'| + 2 sqrt|c2 A|) <= 1/2.
pub fn aocs_region(spec: &MasterSpec, t: f64, x: f64) -> bool {
    let sh = spec.shape();
    t.abs() * (sh.ap(x).abs() + 2.0 * (sh.c[2] * sh.a(x)).abs().sqrt()) <= 0.5
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClosedFormGap {
    /// max |series - closed| / max |closed| over the compared nodes
    pub gap: f64,
    pub nodes: usize,
}

/// Compares the generating function with the truncated series on the grid.
/// Nodes outside `aocs_region` are skipped.
pub fn aocs_closed_form_gap(es: &EigenSystem, t: f64) -> Result<ClosedFormGap> {
    let series = aocs_series_on_grid(es, t);
    let mut top: f64 = 0.0;
    let mut gap: f64 = 0.0;
    let mut nodes = 0;
    for (k, &x) in es.grid.nodes.iter().enumerate() {
        if !aocs_region(&es.spec, t, x) {
            continue;
        }
        let c = aocs_closed_form(&es.spec, es.m, t, x)?;
        top = top.max(c.abs());
        gap = gap.max((c - series[k]).abs());
        nodes += 1;
    }
    Ok(ClosedFormGap {
        gap: if top > 0.0 { gap / top } else { gap },
        nodes,
    })
}

pub fn overlap(st1: &StateExpansion, st2: &StateExpansion) -> Result<Complex64> {
    if st1.m != st2.m {
        return Err(Error::BasisMismatch);
    }
    Ok(st1
        .coeffs
        .iter()
        .zip(&st2.coeffs)
        .map(|(a, b)| a.conj() * b)
        .sum())
}

/// Coefficients from the recursion exactly as printed, with p0<G>/(4 dp^2)
/// written as r p0 / 2. Only for comparison with `mucs_recursion`.
pub fn printed_mucs_coefficients(
    ls: &LadderSet,
    sh: &Shape,
    input: MucsInput,
    n_trunc: usize,
) -> Result<Vec<Complex64>> {
    let nt = clamp_trunc(ls, n_trunc)?;
    let (x0, p0, r) = (ls.x0, ls.p0, input.squeeze_ratio);
    let app = sh.app();
    let h = 0.5 * r * p0;
    let m = ls.m;
    let mut a = vec![Complex64::default(); nt + 1];
    a[0] = Complex64::new(1.0, 0.0);
    for i in 0..nt {
        let n = m + i;
        let f = &ls.f_coeffs[i];
        let s = f.f1 + f.f3;
        let pre = 2.0 * x0 + h * (4.0 * f.f3 + 2.0 * app) / s;
        let ratio = sh.mu(n + 1) / sh.energy(n + 1, m);
        if pre == 0.0 || !ratio.is_finite() {
            return Err(Error::ZeroDenominator { n });
        }
        let mut v = (input.c - h * printed_g(sh, f)) * a[i];
        if i > 0 {
            v -= a[i - 1] * ((2.0 * x0 - h * (4.0 * f.f1 - 2.0 * app) / s) * sh.mu(n));
        }
        a[i + 1] = v * (ratio / pre);
        rescale(&mut a[..=i + 1]);
    }
    Ok(a)
}
