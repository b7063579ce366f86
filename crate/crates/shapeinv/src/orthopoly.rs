//! Rodrigues polynomials, associated functions and the per-sector
//! three-term recurrence used for stable high-degree evaluation.

use crate::error::{Error, Result};
use crate::master_catalog::{validate, MasterSpec, Shape};
use crate::numerics::{build_grid, Grid, DEFAULT_NPOINTS};
use crate::poly::{Frame, Poly};

#[derive(Clone, Debug)]
pub struct PolySystem {
    pub spec: MasterSpec,
    pub shape: Shape,
    /// Highest degree actually built (after normalizability truncation).
    pub max_n: usize,
    pub requested_n: usize,
    pub polys: Vec<Poly>,
    /// a_n, always 1 here.
    pub rodrigues_norm: Vec<f64>,
    pub gammas: Vec<f64>,
    /// h_n = int phi_n^2 W dx
    pub norms: Vec<f64>,
    pub ln_norms: Vec<f64>,
}

impl PolySystem {
    pub fn truncated(&self) -> bool {
        self.max_n < self.requested_n
    }

    pub fn frame(&self) -> Frame {
        self.polys[0].frame()
    }
}

/// Polynomials W^{-1} (d/dx)^n (A^n W) for n = 0..=max_n.
pub fn rodrigues(spec: &MasterSpec, max_n: usize) -> Vec<Poly> {
    let frame = Frame::for_interval(spec.interval.0, spec.interval.1);
    let sh = spec.shape();
    let a = Poly::from_x_coeffs(frame, &sh.c);
    let ap = a.deriv();
    let l1 = Poly::from_x_coeffs(frame, &[sh.cc, sh.a1]);
    (0..=max_n)
        .map(|n| {
            let mut p = Poly::constant(frame, 1.0);
            for k in 0..n {
                let f = l1.add(&ap.scale((n - k) as f64));
                p = f.mul(&p).add(&a.mul(&p.deriv()));
            }
            p
        })
        .collect()
}

/// Largest n for which psi_n^m is square integrable: `Ok(None)` when every
/// degree is, `Err(NormDiverges)` when not even n = m is.
pub fn normalizable_limit(spec: &MasterSpec, m: usize) -> Result<Option<usize>> {
    let deg_a = if spec.a_coeffs[2] != 0.0 {
        2
    } else if spec.a_coeffs[1] != 0.0 {
        1
    } else {
        0
    };
    let (a, b) = spec.interval;
    let mut limit: Option<usize> = None;
    for (end, sign) in [(a, -1.0), (b, 1.0)] {
        if end.is_finite() {
            continue;
        }
        let x = sign * 1e8;
        let s = x * spec.weight.dlog(x);
        if !(s.is_finite() && s.abs() < 1e4) {
            continue;
        }
        // W A^m q_n^2 ~ |x|^{s + m deg_a + 2(n-m)} must decay faster than 1/|x|
        let bound = (-1.0 - s - (m * deg_a) as f64) / 2.0 + m as f64;
        let top = (bound - 1e-9).floor();
        if top < m as f64 {
            return Err(Error::NormDiverges { n: m });
        }
        let top = top as usize;
        limit = Some(limit.map_or(top, |l| l.min(top)));
    }
    Ok(limit)
}

pub fn build_polys(spec: &MasterSpec, max_n: usize) -> Result<PolySystem> {
    let grid = build_grid(spec, DEFAULT_NPOINTS)?;
    build_polys_on(spec, max_n, &grid)
}

pub fn build_polys_on(spec: &MasterSpec, max_n: usize, grid: &Grid) -> Result<PolySystem> {
    validate(spec).into_result()?;
    let sector = Sector::new(spec, 0, max_n, grid)?;
    let top = sector.nmax;
    let shape = spec.shape();
    let polys = rodrigues(spec, top);
    let mut ln_norms = Vec::with_capacity(top + 1);
    let lnw: Vec<f64> = grid.nodes.iter().map(|&x| spec.weight.ln_w(x)).collect();
    let mut acc = vec![0.0; top + 1];
    for (k, &x) in grid.nodes.iter().enumerate() {
        let (vals, scale) = sector.eval(x);
        for (n, v) in vals.iter().enumerate() {
            acc[n] += grid.weights[k] * (2.0 * scale[n] + lnw[k]).exp() * v[0] * v[0];
        }
    }
    for (n, a) in acc.iter().enumerate() {
        if !(a.is_finite() && *a > 0.0) {
            return Err(Error::NormDiverges { n });
        }
        ln_norms.push(2.0 * sector.ln_nu[n] + a.ln());
    }
    Ok(PolySystem {
        spec: spec.clone(),
        shape,
        max_n: top,
        requested_n: max_n,
        gammas: (0..=top).map(|n| shape.gamma_n(n)).collect(),
        rodrigues_norm: vec![1.0; top + 1],
        norms: ln_norms.iter().map(|l| l.exp()).collect(),
        ln_norms,
        polys,
    })
}

/// Residual polynomial A y'' + ((AW)'/W) y' + gamma_n y for (1/W)(AW y')' = -gamma y.
fn eigen_residual_poly(ps: &PolySystem, n: usize) -> (Poly, Poly) {
    let f = ps.frame();
    let sh = ps.shape;
    let a = Poly::from_x_coeffs(f, &sh.c);
    let b = a.deriv().add(&Poly::from_x_coeffs(f, &[sh.cc, sh.a1]));
    let y = &ps.polys[n];
    let r = a.mul(&y.deriv_n(2)).add(&b.mul(&y.deriv()));
    (r.add(&y.scale(ps.gammas[n])), y.scale(ps.gammas[n]))
}

pub fn eigen_residual(ps: &PolySystem, n: usize, grid: &Grid) -> f64 {
    let (r, g) = eigen_residual_poly(ps, n);
    let num = grid
        .nodes
        .iter()
        .map(|&x| r.eval(x).abs())
        .fold(0.0, f64::max);
    let den = grid
        .nodes
        .iter()
        .map(|&x| g.eval(x).abs())
        .fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

#[derive(Clone, Debug)]
pub struct AssociatedFunction {
    pub n: usize,
    pub m: usize,
    /// (d/dx)^m phi_n
    pub poly: Poly,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl AssociatedFunction {
    fn sign(&self) -> f64 {
        if self.m % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// (phi, phi', phi'') at x.
    pub fn eval_d2(&self, spec: &MasterSpec, x: f64) -> [f64; 3] {
        let m = self.m as f64;
        let (a, ap, app) = (spec.a(x), spec.a_prime(x), 2.0 * spec.a_coeffs[2]);
        let q = self.poly.eval(x);
        let dq = self.poly.deriv().eval(x);
        let d2q = self.poly.deriv_n(2).eval(x);
        let s = self.sign() * a.powf(0.5 * m);
        let g = ap / a;
        [
            s * q,
            s * (dq + 0.5 * m * g * q),
            s * (d2q + m * g * dq + (0.5 * m * app / a + 0.5 * m * (0.5 * m - 1.0) * g * g) * q),
        ]
    }
}

pub fn associated(ps: &PolySystem, n: usize, m: usize, grid: &Grid) -> Result<AssociatedFunction> {
    if m > n || n > ps.max_n {
        return Err(Error::BadQuantumNumbers { n, m });
    }
    let poly = ps.polys[n].deriv_n(m);
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let values = grid
        .nodes
        .iter()
        .map(|&x| sign * ps.spec.a(x).powf(0.5 * m as f64) * poly.eval(x))
        .collect();
    Ok(AssociatedFunction {
        n,
        m,
        poly,
        nodes: grid.nodes.clone(),
        values,
    })
}

/// Relative residual of the associated equation
/// A f'' + ((AW)'/W) f' + [-(n^2+n-m^2)A''/2 + (m-n)A1 - m^2 A'^2/(4A) - (m/2) A' W'/W] f = 0.
pub fn associated_residual(ps: &PolySystem, af: &AssociatedFunction) -> f64 {
    let spec = &ps.spec;
    let sh = ps.shape;
    let (n, m) = (af.n as f64, af.m as f64);
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for &x in &af.nodes {
        let [f, df, d2f] = af.eval_d2(spec, x);
        let a = sh.a(x);
        let ap = sh.ap(x);
        let wlog = sh.l1(x) / a;
        let bracket = -0.5 * (n * n + n - m * m) * sh.app() + (m - n) * sh.a1
            - 0.25 * m * m * ap * ap / a
            - 0.5 * m * ap * wlog;
        let t = [a * d2f, (ap + sh.l1(x)) * df, bracket * f];
        num = num.max((t[0] + t[1] + t[2]).abs());
        den = den.max(t.iter().map(|v| v.abs()).fold(0.0, f64::max));
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Monic orthogonal polynomials from the discrete Stieltjes procedure on `grid`.
pub fn stieltjes_monic(spec: &MasterSpec, grid: &Grid, max_n: usize) -> Vec<Poly> {
    let frame = Frame::for_interval(spec.interval.0, spec.interval.1);
    let w: Vec<f64> = grid
        .nodes
        .iter()
        .zip(&grid.weights)
        .map(|(&x, &q)| q * spec.weight.ln_w(x).exp())
        .collect();
    let ip = |p: &Poly, q: &Poly, xw: bool| -> f64 {
        grid.nodes
            .iter()
            .zip(&w)
            .map(|(&x, &wk)| wk * p.eval(x) * q.eval(x) * if xw { x } else { 1.0 })
            .sum()
    };
    let x = Poly::x(frame);
    let mut out = vec![Poly::constant(frame, 1.0)];
    let mut prev_norm = 0.0;
    for k in 0..max_n {
        let pk = out[k].clone();
        let nk = ip(&pk, &pk, false);
        let ak = ip(&pk, &pk, true) / nk;
        let mut next = x.mul(&pk).add(&pk.scale(-ak));
        if k > 0 {
            next = next.add(&out[k - 1].scale(-nk / prev_norm));
        }
        prev_norm = nk;
        out.push(next);
    }
    out
}

/// Three-term recurrence data for q_n = (d/dx)^m phi_n, n = m..=nmax.
///
/// Ladder amplitudes on the raw (a_n = 1) basis:
///   B(n,m) phi_{n-1,m} = r_b(n) phi_{n,m},  A(n,m) phi_{n,m} = r_a(n) phi_{n-1,m},
/// and x q_n mu_{n+1} = r_a(n) q_{n-1} + r_b(n+1) q_{n+1} + (k_a(n) + k_b(n+1)) q_n.
#[derive(Clone, Debug)]
pub struct Sector {
    pub m: usize,
    pub nmax: usize,
    pub shape: Shape,
    /// Indexed by n, valid up to nmax + 1.
    pub mu: Vec<f64>,
    pub r_a: Vec<f64>,
    pub r_b: Vec<f64>,
    pub k_a: Vec<f64>,
    pub k_b: Vec<f64>,
    /// Factorization energy of A(n,m)B(n,m).
    pub eps: Vec<f64>,
    /// ln of the L2 norm of A^{1/4} W^{1/2} phi_{n,m} in xi, for n = m..=nmax.
    pub ln_nu: Vec<f64>,
    /// sign of the constant q_m
    pub lead_sign: f64,
    /// ln |leading coefficient of q_n|
    pub ln_lead: Vec<f64>,
    /// Normalized Jacobi matrix: diag[n] = xhat_{n,n}, off[n] = xhat_{n,n-1} (n > m).
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

/// E of the factorization A(n,m) B(n,m) phi_{n-1,m} = eps phi_{n-1,m}.
pub fn factorization_energy(sh: &Shape, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    let (a1, c, app) = (sh.a1, sh.cc, sh.app());
    let (a0, ap0) = (sh.c[0], sh.c[1]);
    let top = a1 * c + n * n * app * ap0 + (2.0 * n - m) * a1 * ap0 + m * app * c;
    let den = a1 + n * app;
    top * top / (4.0 * den * den)
        - 0.25 * c * c
        - (n - m) * a1 * a0
        - 0.25 * m * m * ap0 * ap0
        - 0.5 * m * ap0 * c
        - 0.5 * (n * n - m * m) * app * a0
}

/// Constant term of A(n,m).
pub fn k_lower(sh: &Shape, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    let (a1, c, app, ap0) = (sh.a1, sh.cc, sh.app(), sh.c[1]);
    (n * n * app * ap0 + (2.0 * n - m) * a1 * ap0 + (m - n) * app * c) / (2.0 * (a1 + n * app))
}

/// Constant term of B(n,m).
pub fn k_raise(sh: &Shape, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    let (a1, c, app, ap0) = (sh.a1, sh.cc, sh.app(), sh.c[1]);
    (2.0 * a1 * c + n * n * app * ap0 + (2.0 * n - m) * a1 * ap0 + (m + n) * app * c)
        / (2.0 * (a1 + n * app))
}

fn nonzero(v: f64, n: usize) -> Result<f64> {
    if v == 0.0 || !v.is_finite() {
        Err(Error::ZeroDenominator { n })
    } else {
        Ok(v)
    }
}

impl Sector {
    /// Builds the recurrence for n = m..=nmax, truncating silently at the
    /// last normalizable index. Only int W A^m dx is computed by quadrature.
    pub fn new(spec: &MasterSpec, m: usize, nmax: usize, grid: &Grid) -> Result<Sector> {
        if m > nmax {
            return Err(Error::BadQuantumNumbers { n: nmax, m });
        }
        let lim = normalizable_limit(spec, m)?;
        let mut top = lim.map_or(nmax, |l| l.min(nmax));
        let sh = spec.shape();
        let c2 = sh.c[2];
        let len = top + 1;
        let mut mu = vec![0.0; len + 1];
        let mut r_a = vec![0.0; len + 1];
        let mut r_b = vec![0.0; len + 1];
        let mut k_a = vec![0.0; len + 1];
        let mut k_b = vec![0.0; len + 1];
        let mut eps = vec![0.0; len + 1];
        for n in m..=len {
            mu[n] = sh.mu(n);
            let d = sh.a1 + 2.0 * c2 * n as f64;
            if n > 0 {
                k_a[n] = k_lower(&sh, n, m);
                k_b[n] = k_raise(&sh, n, m);
                nonzero(d, n)?;
            } else {
                k_a[n] = if d != 0.0 { k_lower(&sh, n, m) } else { 0.0 };
            }
            if n > m {
                let nf = n as f64;
                r_b[n] = -((nf - m as f64) / nf) * (sh.a1 + c2 * nf) / d;
                eps[n] = factorization_energy(&sh, n, m);
                r_a[n] = eps[n] / nonzero(r_b[n], n)?;
            }
        }
        // lead(q_{n-1}) / lead(q_n) = r_b(n) / mu_n
        let mut ln_lead = vec![0.0; len + 1];
        let mut lead_sign = 1.0;
        for j in (m + 1)..=(2 * m) {
            let v = sh.a1 + c2 * j as f64;
            ln_lead[m] += v.abs().ln();
            lead_sign *= v.signum();
        }
        ln_lead[m] += (1..=m).map(|k| (k as f64).ln()).sum::<f64>();
        for n in (m + 1)..=len {
            let ratio = r_b[n] / nonzero(mu[n], n)?;
            ln_lead[n] = ln_lead[n - 1] - ratio.abs().ln();
        }

        let lw: Vec<f64> = grid
            .nodes
            .iter()
            .map(|&x| spec.weight.ln_w(x) + m as f64 * spec.a(x).ln())
            .collect();
        let shift = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let base: f64 = grid
            .weights
            .iter()
            .zip(&lw)
            .map(|(w, l)| w * (l - shift).exp())
            .sum();
        if !(base.is_finite() && base > 0.0) {
            return Err(Error::NormDiverges { n: m });
        }
        let mut ln_nu = vec![f64::NAN; top + 1];
        ln_nu[m] = ln_lead[m] + 0.5 * (base.ln() + shift);
        for n in m..top {
            let ratio = r_a[n + 1] * mu[n + 1] / (r_b[n + 1] * mu[n + 2]);
            if !(ratio.is_finite() && ratio > 0.0) {
                top = n;
                break;
            }
            ln_nu[n + 1] = ln_nu[n] + 0.5 * ratio.ln();
        }
        ln_nu.truncate(top + 1);

        let mut diag = vec![0.0; top + 1];
        let mut off = vec![0.0; top + 1];
        for n in m..=top {
            diag[n] = (k_a[n] + k_b[n + 1]) / mu[n + 1];
            if n > m {
                off[n] = r_b[n] * (ln_nu[n] - ln_nu[n - 1]).exp() / mu[n];
            }
        }
        Ok(Sector {
            m,
            nmax: top,
            shape: sh,
            mu,
            r_a,
            r_b,
            k_a,
            k_b,
            eps,
            ln_nu,
            lead_sign,
            ln_lead,
            diag,
            off,
        })
    }

    pub fn dim(&self) -> usize {
        self.nmax - self.m + 1
    }

    /// nu_{n-1} / nu_n
    pub fn nu_ratio(&self, n: usize) -> f64 {
        (self.ln_nu[n - 1] - self.ln_nu[n]).exp()
    }

    /// Normalized q_n/nu_n and its first two derivatives at x, for n = m..=nmax
    /// (index n - m). Each row is scaled; the true value is row * exp(scale).
    pub fn eval(&self, x: f64) -> (Vec<[f64; 3]>, Vec<f64>) {
        let m = self.m;
        let mut rows = Vec::with_capacity(self.dim());
        let mut scales = Vec::with_capacity(self.dim());
        let mut ln_s = 0.0;
        let q0 = self.lead_sign * (self.ln_lead[m] - self.ln_nu[m]).exp();
        let mut prev = [0.0; 3];
        let mut cur = [q0, 0.0, 0.0];
        rows.push(cur);
        scales.push(ln_s);
        for n in m..self.nmax {
            let t = x - self.diag[n];
            let b = if n > m { self.off[n] } else { 0.0 };
            let inv = 1.0 / self.off[n + 1];
            let next = [
                (t * cur[0] - b * prev[0]) * inv,
                (cur[0] + t * cur[1] - b * prev[1]) * inv,
                (2.0 * cur[1] + t * cur[2] - b * prev[2]) * inv,
            ];
            prev = cur;
            cur = next;
            let big = cur
                .iter()
                .chain(prev.iter())
                .fold(0.0f64, |a, v| a.max(v.abs()));
            if big > 1e150 {
                let s = big.ln();
                for v in cur.iter_mut().chain(prev.iter_mut()) {
                    *v /= big;
                }
                ln_s += s;
            }
            rows.push(cur);
            scales.push(ln_s);
        }
        (rows, scales)
    }
}
