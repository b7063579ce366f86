//! Raising and lowering operators, generalized phase operators X and P,
//! the commutator G, and the classical phase-space quantities.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::eigensystem::{psi_at, EigenSystem};
use crate::error::{Error, Result};
use crate::master_catalog::{interior_probes, MasterSpec, Shape};
use crate::orthopoly::Sector;

/// mu_{n,m}; independent of m.
pub fn mu_value(spec: &MasterSpec, n: usize, _m: usize) -> f64 {
    spec.shape().mu(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FCoeffs {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

pub fn f_coeffs(sh: &Shape, n: usize, m: usize) -> FCoeffs {
    let (a1, c, app, ap0) = (sh.a1, sh.cc, sh.app(), sh.c[1]);
    let (nf, mf) = (n as f64, m as f64);
    let den = 2.0 * (a1 + nf * app);
    FCoeffs {
        f1: -0.5 * app - 0.5 * a1 - 0.25 * app,
        f2: -0.5 * c
            - 0.25 * ap0
            - (nf * nf * app * ap0 + (2.0 * nf - mf) * a1 * ap0 + (mf - nf) * app * c) / den,
        f3: -0.5 * c - 0.5 * app + 0.25 * app,
        f4: 0.5 * c + 0.25 * ap0
            - (nf * nf * app * ap0
                + (2.0 * nf - mf) * a1 * ap0
                + (mf + nf) * app * c
                + 2.0 * a1 * c)
                / den,
    }
}

/// Coefficients (of A-tilde, of B-tilde, constant) in the printed adjoint formulas.
pub fn printed_adjoint_weights(sh: &Shape, f: &FCoeffs) -> ([f64; 3], [f64; 3]) {
    let app = sh.app();
    let ap0 = sh.c[1];
    let FCoeffs { f1, f2, f3, f4 } = *f;
    let s = f1 + f3;
    let a_dag = [
        (f1 - f3 - app) / s,
        (2.0 * f1 - app) / s,
        ((f2 - ap0) * s - (f1 - app) * (f2 + f4) + 0.5 * (f2 - f4) * s
            - 0.5 * (f1 - f3) * (f2 + f4))
            / s,
    ];
    let b_dag = [
        (2.0 * f3 + app) / s,
        (f3 - f1 + app) / s,
        ((f4 + ap0) * s - (f3 + app) * (f2 + f4) + 0.5 * (f1 - f3) * (f2 + f4)
            - 0.5 * (f2 - f4) * s)
            / s,
    ];
    (a_dag, b_dag)
}

/// Which constant terms to use for the grid-space ladder operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorForm {
    /// Constants exactly as printed next to the operator definitions.
    Printed,
    /// A^{1/4} W^{1/2} (.) A^{-1/4} W^{-1/2} applied to A(n,m), B(n,m).
    Similarity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    /// Quadratic fit of A(x)(E - V_m(x)).
    Fit,
    /// The printed eta_1..eta_3 expressions.
    Printed,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalPhase {
    pub mode: EtaMode,
    pub energy: f64,
    pub mass: f64,
    pub x0: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub omega_c: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// |cubic coefficient| of A(E - V) relative to its quadratic fit (fit mode only).
    pub cubic_residual: f64,
}

fn etas_printed(sh: &Shape, m: usize, e: f64, gamma: f64) -> [f64; 3] {
    let (a1, c, app) = (sh.a1, sh.cc, sh.app());
    let (a0, ap0) = (sh.c[0], sh.c[1]);
    let mf = m as f64;
    let base = e - gamma + (2.0 * mf - 1.0) / 4.0 * app;
    let eta1 = 0.5 * app * base + (1.0 - 2.0 * mf) / 4.0 * app * a1
        - 0.25 * a1
        - (4.0 * mf * mf - 1.0) / 16.0 * a1;
    let eta2 = ap0 * base + 0.5 * ap0 * a1 - 0.5 * a1 * c - 0.5 * mf * (app + ap0) * c;
    // the (4m^2-1)/16 A'(0)^2 term has no operator in print; taken as a product
    let eta3 = a0 * base + 0.5 * a0 * a1
        - 0.25 * c * c
        - 0.5 * mf * ap0 * c * (4.0 * mf * mf - 1.0) / 16.0 * ap0 * ap0;
    [eta1, eta2, eta3]
}

/// A(x)(E - V_m(x)) interpolated at four probes: (eta1, eta2, eta3, relative cubic part).
fn etas_fit(spec: &MasterSpec, m: usize, e: f64) -> ([f64; 3], f64) {
    let sh = spec.shape();
    let (a, b) = spec.interval;
    let xs = interior_probes(a, b, 4);
    let mf = m as f64;
    let f = |x: f64| {
        let (av, ap, l1) = (sh.a(x), sh.ap(x), sh.l1(x));
        let v = -0.5 * sh.a1 - (2.0 * mf - 1.0) / 4.0 * sh.app()
            + l1 * l1 / (4.0 * av)
            + 0.5 * mf * ap * (l1 / av)
            + (4.0 * mf * mf - 1.0) / 16.0 * ap * ap / av
            + spec.gamma_shift;
        av * (e - v)
    };
    let m4 = nalgebra::Matrix4::from_fn(|i, j| xs[i].powi(j as i32));
    let rhs = nalgebra::Vector4::from_fn(|i, _| f(xs[i]));
    let c = m4.lu().solve(&rhs).unwrap_or_else(nalgebra::Vector4::zeros);
    let scale = xs
        .iter()
        .map(|&x| (c[0] + c[1] * x + c[2] * x * x).abs())
        .fold(0.0, f64::max);
    let cubic = xs
        .iter()
        .map(|&x| (c[3] * x * x * x).abs())
        .fold(0.0, f64::max);
    ([c[2], c[1], c[0]], cubic / scale.max(f64::MIN_POSITIVE))
}

pub fn classical_phase_for(
    spec: &MasterSpec,
    m: usize,
    e: f64,
    x0: f64,
    mode: EtaMode,
) -> Result<ClassicalPhase> {
    let sh = spec.shape();
    let (eta, cubic) = match mode {
        EtaMode::Fit => etas_fit(spec, m, e),
        EtaMode::Printed => (etas_printed(&sh, m, e, spec.gamma_shift), 0.0),
    };
    let [eta1, eta2, eta3] = eta;
    if !(eta1 < 0.0) {
        return Err(Error::NonOscillatory { eta1 });
    }
    let offset = eta2 / (2.0 * eta1);
    Ok(ClassicalPhase {
        mode,
        energy: e,
        mass: spec.mass,
        x0,
        eta1,
        eta2,
        eta3,
        omega_c: (-2.0 * eta1 / spec.mass).sqrt(),
        amplitude: x0 * (offset * offset - eta3 / eta1).sqrt(),
        offset,
        cubic_residual: cubic,
    })
}

pub fn classical_phase(es: &EigenSystem, e: f64) -> Result<ClassicalPhase> {
    classical_phase_for(&es.spec, es.m, e, 1.0, EtaMode::Fit)
}

/// (X_c(t), P_c(t)) with t0 = 0.
pub fn classical_orbit(cp: &ClassicalPhase, t: f64) -> (f64, f64) {
    let w = cp.omega_c;
    (
        cp.amplitude * (w * t).sin(),
        cp.mass * cp.amplitude * w * (w * t).cos(),
    )
}

#[derive(Clone, Debug)]
pub struct LadderSet {
    pub m: usize,
    pub nmax: usize,
    pub x0: f64,
    pub p0: f64,
    pub a1: f64,
    pub c: f64,
    /// E(n,m) + gamma_shift, n = m..=nmax
    pub energies: Vec<f64>,
    /// mu_{n,m}, n = m+1..=nmax
    pub mu: Vec<f64>,
    /// factorization energies, n = m+1..=nmax
    pub eps: Vec<f64>,
    /// eps / mu, n = m+1..=nmax
    pub e_over_mu: Vec<f64>,
    /// n = m..=nmax
    pub f_coeffs: Vec<FCoeffs>,
    /// A-tilde psi_n = lower[n-m] psi_{n-1} (normalized basis; entry 0 unused)
    pub lower: Vec<f64>,
    /// B-tilde psi_{n-1} = raise[n-m] psi_n
    pub raise: Vec<f64>,
    /// A(n,m) constants K_A(n), n = m..=nmax
    pub k_lower: Vec<f64>,
    /// ln of the norm of A^{1/4} W^{1/2} phi_{n,m}, n = m..=nmax
    pub ln_nu: Vec<f64>,
    pub xhat: DMatrix<f64>,
    /// A d/dx + A'/4 in the normalized basis (real antisymmetric)
    pub kop: DMatrix<f64>,
    /// eta2 / (2 eta1) at each energy
    pub offset: Vec<f64>,
    pub x_matrix: DMatrix<f64>,
    pub p_matrix: DMatrix<Complex64>,
    pub g_matrix: DMatrix<f64>,
}

pub fn build_ladder(es: &EigenSystem, nmax: usize, x0: f64, p0: f64) -> Result<LadderSet> {
    let m = es.m;
    if nmax < m + 2 {
        return Err(Error::TruncationTooSmall { nmax, m });
    }
    if !(x0 > 0.0 && p0 > 0.0) {
        return Err(Error::ParameterRange(format!(
            "x0 = {x0}, p0 = {p0} must be positive"
        )));
    }
    let nmax = nmax.min(es.nmax);
    if nmax < m + 2 {
        return Err(Error::TruncationTooSmall { nmax, m });
    }
    let sec: &Sector = &es.sector;
    let sh = es.shape;
    let dim = nmax - m + 1;
    let energies: Vec<f64> = (m..=nmax).map(|n| es.energy(n)).collect();
    let mut lower = vec![0.0; dim];
    let mut raise = vec![0.0; dim];
    for n in (m + 1)..=nmax {
        lower[n - m] = sec.r_a[n] * sec.nu_ratio(n);
        raise[n - m] = sec.r_b[n] / sec.nu_ratio(n);
    }
    let mut xhat = DMatrix::zeros(dim, dim);
    for n in m..=nmax {
        let i = n - m;
        xhat[(i, i)] = sec.diag[n];
        if n > m {
            xhat[(i, i - 1)] = sec.off[n];
            xhat[(i - 1, i)] = sec.off[n];
        }
    }
    let mut kop = DMatrix::zeros(dim, dim);
    for n in m..=nmax {
        let i = n - m;
        let s = (n as f64 + 1.0) * sh.c[2] + 0.5 * sh.a1;
        kop[(i, i)] = s * xhat[(i, i)] + 0.5 * sh.c[1] + 0.5 * sh.cc + sec.k_a[n];
        if i > 0 {
            kop[(i - 1, i)] = lower[i] + s * xhat[(i - 1, i)];
        }
        if i + 1 < dim {
            kop[(i + 1, i)] = s * xhat[(i + 1, i)];
        }
    }
    let mut offset = Vec::with_capacity(dim);
    for &e in &energies {
        offset.push(classical_phase_for(&es.spec, m, e, x0, EtaMode::Fit)?.offset);
    }
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(offset.clone()));
    let x_matrix = (&xhat + &d) * x0;
    let p_matrix = kop.map(|v| Complex64::new(0.0, -p0 * v));
    let a_of_x = DMatrix::identity(dim, dim) * sh.c[0] + &xhat * sh.c[1] + &xhat * &xhat * sh.c[2];
    let comm = &d * &kop - &kop * &d;
    let g_matrix = (a_of_x - comm) * (x0 * p0);
    Ok(LadderSet {
        m,
        nmax,
        x0,
        p0,
        a1: sh.a1,
        c: sh.cc,
        mu: ((m + 1)..=nmax).map(|n| sec.mu[n]).collect(),
        eps: ((m + 1)..=nmax).map(|n| sec.eps[n]).collect(),
        e_over_mu: ((m + 1)..=nmax).map(|n| sec.eps[n] / sec.mu[n]).collect(),
        f_coeffs: (m..=nmax).map(|n| f_coeffs(&sh, n, m)).collect(),
        k_lower: (m..=nmax).map(|n| sec.k_a[n]).collect(),
        ln_nu: (m..=nmax).map(|n| sec.ln_nu[n]).collect(),
        energies,
        lower,
        raise,
        xhat,
        kop,
        offset,
        x_matrix,
        p_matrix,
        g_matrix,
    })
}

impl LadderSet {
    pub fn dim(&self) -> usize {
        self.nmax - self.m + 1
    }

    pub fn lower_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| if j == i + 1 { self.lower[j] } else { 0.0 })
    }

    pub fn raise_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| if i == j + 1 { self.raise[i] } else { 0.0 })
    }

    /// -i (XP - PX) by direct multiplication.
    pub fn commutator(&self) -> DMatrix<Complex64> {
        let x = self.x_matrix.map(|v| Complex64::new(v, 0.0));
        let c = &x * &self.p_matrix - &self.p_matrix * &x;
        c.map(|v| Complex64::new(0.0, -1.0) * v)
    }

    /// Printed adjoint combinations as matrices, with n taken from the column.
    pub fn printed_adjoints(&self, sh: &Shape) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dim();
        let lo = self.lower_matrix();
        let up = DMatrix::from_fn(n, n, |i, j| if i == j + 1 { self.raise[i] } else { 0.0 });
        let mut ad = DMatrix::zeros(n, n);
        let mut bd = DMatrix::zeros(n, n);
        for j in 0..n {
            let (wa, wb) = printed_adjoint_weights(sh, &self.f_coeffs[j]);
            for i in 0..n {
                ad[(i, j)] =
                    wa[0] * lo[(i, j)] + wa[1] * up[(i, j)] + if i == j { wa[2] } else { 0.0 };
                bd[(i, j)] =
                    wb[0] * lo[(i, j)] + wb[1] * up[(i, j)] + if i == j { wb[2] } else { 0.0 };
            }
        }
        (ad, bd)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AdjointAudit {
    /// max |printed A-dagger - A^T|
    pub a_dagger_defect: f64,
    pub b_dagger_defect: f64,
    /// max |x0 (A + A^T + B + B^T) - X| on the inner block
    pub x_from_ladders_defect: f64,
}

pub fn adjoint_audit(ls: &LadderSet, sh: &Shape) -> AdjointAudit {
    let (ad, bd) = ls.printed_adjoints(sh);
    let lo = ls.lower_matrix();
    let up = ls.raise_matrix();
    let maxabs = |m: DMatrix<f64>| m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let n = ls.dim() - 1;
    let x48 = (&lo + lo.transpose() + &up + up.transpose()) * ls.x0;
    AdjointAudit {
        a_dagger_defect: maxabs(&ad - lo.transpose()),
        b_dagger_defect: maxabs(&bd - up.transpose()),
        x_from_ladders_defect: maxabs((x48 - &ls.x_matrix).view((0, 0), (n, n)).into_owned()),
    }
}

/// Grid-space lowering operator applied to psi_n: samples of A-tilde psi_n.
pub fn apply_lowering(es: &EigenSystem, n: usize, form: OperatorForm) -> Vec<f64> {
    let sh = es.shape;
    let m = es.m;
    let k = crate::orthopoly::k_lower(&sh, n, m);
    let nf = n as f64;
    let i = n - m;
    es.grid
        .nodes
        .iter()
        .map(|&x| {
            let d = psi_at(&es.spec, &es.sector, x)[i];
            let a = sh.a(x);
            let px = d[1] / a.sqrt();
            let lin = (nf * sh.c[2] + 0.5 * sh.c[2] + 0.5 * sh.a1) * x;
            let cst = match form {
                OperatorForm::Printed => 0.5 * sh.c[1] + sh.cc,
                OperatorForm::Similarity => 0.25 * sh.c[1] + 0.5 * sh.cc,
            };
            a * px - (lin + cst + k) * d[0]
        })
        .collect()
}

/// Grid-space raising operator B-tilde(n) applied to psi_{n-1}.
pub fn apply_raising(es: &EigenSystem, n: usize, form: OperatorForm) -> Vec<f64> {
    let sh = es.shape;
    let m = es.m;
    let k = crate::orthopoly::k_raise(&sh, n, m);
    let nf = n as f64;
    let i = n - 1 - m;
    es.grid
        .nodes
        .iter()
        .map(|&x| {
            let d = psi_at(&es.spec, &es.sector, x)[i];
            let a = sh.a(x);
            let px = d[1] / a.sqrt();
            let lin = (nf * sh.c[2] + 0.5 * sh.a1 - 0.5 * sh.c[2]) * x;
            let cst = match form {
                OperatorForm::Printed => 0.5 * sh.c[1] + sh.cc,
                OperatorForm::Similarity => 0.25 * sh.c[1] + 0.5 * sh.cc,
            };
            -a * px - lin * d[0] + (cst - k) * d[0]
        })
        .collect()
}

/// B-tilde(n) A-tilde(n) psi_n on the grid (similarity form).
pub fn apply_factorized(es: &EigenSystem, n: usize) -> Vec<f64> {
    let sh = es.shape;
    let m = es.m;
    let ka = crate::orthopoly::k_lower(&sh, n, m);
    let kb = crate::orthopoly::k_raise(&sh, n, m);
    let nf = n as f64;
    let i = n - m;
    es.grid
        .nodes
        .iter()
        .map(|&x| {
            let d = psi_at(&es.spec, &es.sector, x)[i];
            let (a, ap) = (sh.a(x), sh.ap(x));
            let px = d[1] / a.sqrt();
            let pxx = (d[2] - 0.5 * ap * px) / a;
            let u = 0.25 * ap + 0.5 * sh.l1(x) + nf * sh.c[2] * x + ka;
            let du = 0.25 * sh.app() + 0.5 * sh.a1 + nf * sh.c[2];
            let f = a * px - u * d[0];
            let fx = ap * px + a * pxx - du * d[0] - u * px;
            let v = 0.25 * ap + 0.5 * sh.l1(x) - (sh.a1 + nf * sh.c[2]) * x - kb;
            -a * fx + v * f
        })
        .collect()
}

/// max |u - v| / max |v| over the samples.
pub fn rel_sup(u: &[f64], v: &[f64]) -> f64 {
    let num = u
        .iter()
        .zip(v)
        .fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
    let den = v.iter().fold(0.0f64, |a, q| a.max(q.abs()));
    num / den.max(f64::MIN_POSITIVE)
}

/// Quadrature matrix elements <psi_i| op |psi_j> for the multiplication by x
/// and for A d/dx + A'/4 (Hermitian) and A d/dx + A'/2 (as printed).
pub fn quadrature_elements(es: &EigenSystem, nmax: usize) -> [DMatrix<f64>; 3] {
    let m = es.m;
    let dim = nmax.min(es.nmax) - m + 1;
    let w = es.xi_weights();
    let mut xs = DMatrix::zeros(dim, dim);
    let mut kh = DMatrix::zeros(dim, dim);
    let mut kp = DMatrix::zeros(dim, dim);
    for (k, &x) in es.grid.nodes.iter().enumerate() {
        let d = psi_at(&es.spec, &es.sector, x);
        let (a, ap) = (es.spec.a(x), es.spec.a_prime(x));
        for i in 0..dim {
            for j in 0..dim {
                let px = d[j][1] / a.sqrt();
                let bra = w[k] * d[i][0];
                xs[(i, j)] += bra * x * d[j][0];
                kh[(i, j)] += bra * (a * px + 0.25 * ap * d[j][0]);
                kp[(i, j)] += bra * (a * px + 0.5 * ap * d[j][0]);
            }
        }
    }
    [xs, kh, kp]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensystem::build_eigensystem_for;
    use crate::master_catalog::{preset, Preset};
    use crate::numerics::build_grid;

    fn es(name: &str, m: usize, nmax: usize) -> EigenSystem {
        let spec = preset(name).unwrap().spec;
        let g = build_grid(&spec, 200).unwrap();
        build_eigensystem_for(&spec, m, nmax, &g).unwrap()
    }

    #[test]
    fn mu_examples() {
        let osc = preset("shifted_oscillator").unwrap().spec;
        for n in 1..6 {
            assert_eq!(mu_value(&osc, n, 0), 1.0);
        }
        let mut leg = Preset::Row7Trigonometric.spec(0.0, 0.0);
        leg.name = "legendre".into();
        // A'' = -2 and (A W'/W)' = 0 for alpha = beta = 0
        for n in 1..6 {
            assert_eq!(mu_value(&leg, n, 0), 2.0 * n as f64 - 1.0);
        }
        let lag = preset("three_dim_oscillator").unwrap().spec;
        assert_eq!(mu_value(&lag, 1, 0), -lag.shape().a1);
    }

    #[test]
    fn factorization_energy_vanishes_at_bottom() {
        for p in Preset::ALL {
            let sh = preset(p.name()).unwrap().spec.shape();
            for m in 0..3 {
                let e = crate::orthopoly::factorization_energy(&sh, m, m);
                assert!(
                    e.abs() < 1e-9 * (1.0 + sh.a1.abs()),
                    "{} m={m}: {e}",
                    p.name()
                );
            }
        }
        // equals the gap to the ground state only when A'' = 0 and A' = 0
        let sh = preset("shifted_oscillator").unwrap().spec.shape();
        for n in 1..6 {
            let e = crate::orthopoly::factorization_energy(&sh, n, 0);
            assert!((e - (sh.energy(n, 0) - sh.energy(0, 0))).abs() < 1e-12);
        }
    }

    #[test]
    fn ladder_actions_on_grid() {
        for name in [
            "shifted_oscillator",
            "three_dim_oscillator",
            "scarf1_trigonometric",
            "gen_poschl_teller",
            "morse",
        ] {
            for m in 0..=1 {
                let e = es(name, m, 10);
                let ls = build_ladder(&e, 10, 1.0, 1.0).unwrap();
                for n in (m + 1)..=(m + 8) {
                    let b = apply_raising(&e, n, OperatorForm::Similarity);
                    let want: Vec<f64> = e.psi(n).iter().map(|v| v * ls.raise[n - m]).collect();
                    assert!(rel_sup(&b, &want) < 1e-8, "{name} m={m} n={n} raise");
                    let a = apply_lowering(&e, n, OperatorForm::Similarity);
                    let want: Vec<f64> = e.psi(n - 1).iter().map(|v| v * ls.lower[n - m]).collect();
                    assert!(rel_sup(&a, &want) < 1e-8, "{name} m={m} n={n} lower");
                    let ba = apply_factorized(&e, n);
                    let want: Vec<f64> = e.psi(n).iter().map(|v| v * ls.eps[n - m - 1]).collect();
                    assert!(rel_sup(&ba, &want) < 1e-7, "{name} m={m} n={n} BA");
                }
            }
        }
    }

    #[test]
    fn printed_constants_break_ladder_action() {
        let e = es("three_dim_oscillator", 0, 6);
        let ls = build_ladder(&e, 6, 1.0, 1.0).unwrap();
        let a = apply_lowering(&e, 3, OperatorForm::Printed);
        let want: Vec<f64> = e.psi(2).iter().map(|v| v * ls.lower[3]).collect();
        assert!(rel_sup(&a, &want) > 1e-3);
    }

    #[test]
    fn amplitudes_follow_monic_norm_ratios() {
        let e = es("gen_poschl_teller", 1, 9);
        let ls = build_ladder(&e, 9, 1.0, 1.0).unwrap();
        for n in 2..=9 {
            let i = n - 1;
            let ratio = (e.ln_basis_norms[i] - e.ln_basis_norms[i - 1]).exp();
            // equal up to the sign of lead(q_{n-1}) / lead(q_n)
            assert!(
                (ls.raise[i].abs() - (ls.mu[i - 1] * ratio).abs()).abs()
                    < 1e-10 * ls.raise[i].abs()
            );
            assert!(
                (ls.lower[i].abs() - (ls.e_over_mu[i - 1] / ratio).abs()).abs()
                    < 1e-10 * ls.lower[i].abs()
            );
        }
    }

    #[test]
    fn hermitian_structure() {
        for p in Preset::ALL {
            let e = es(p.name(), 1, 14);
            let ls = build_ladder(&e, 14, 1.0, 1.0).unwrap();
            assert!((&ls.x_matrix - ls.x_matrix.transpose()).amax() < 1e-12);
            assert!(
                (&ls.kop + ls.kop.transpose()).amax() < 1e-8 * ls.kop.amax(),
                "{}",
                p.name()
            );
            let c = ls.commutator();
            let n = ls.dim() - 1;
            for i in 0..n {
                for j in 0..n {
                    let d = c[(i, j)] - Complex64::new(ls.g_matrix[(i, j)], 0.0);
                    assert!(
                        d.norm() < 1e-8 * ls.g_matrix.amax(),
                        "{} ({i},{j})",
                        p.name()
                    );
                }
            }
        }
    }

    #[test]
    fn oscillator_matrices() {
        let e = es("shifted_oscillator", 0, 12);
        let ls = build_ladder(&e, 12, 0.7, 1.3).unwrap();
        for n in 0..11 {
            let want = 0.7 * ((n + 1) as f64).sqrt();
            assert!((ls.x_matrix[(n, n + 1)].abs() - want).abs() < 1e-12);
            assert!(ls.x_matrix[(n, n)].abs() < 1e-12);
        }
        let n = ls.dim() - 1;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 0.7 * 1.3 } else { 0.0 };
                assert!((ls.g_matrix[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn three_dim_oscillator_g_is_affine_in_h() {
        let e = es("three_dim_oscillator", 1, 12);
        let ls = build_ladder(&e, 12, 1.0, 1.0).unwrap();
        let n = ls.dim() - 1;
        let g = &ls.g_matrix;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert!(g[(i, j)].abs() < 1e-10, "({i},{j}) {}", g[(i, j)]);
                }
            }
        }
        let slope = (g[(1, 1)] - g[(0, 0)]) / (ls.energies[1] - ls.energies[0]);
        for i in 0..n {
            let lin = g[(0, 0)] + slope * (ls.energies[i] - ls.energies[0]);
            assert!((g[(i, i)] - lin).abs() < 1e-10);
        }
    }

    #[test]
    fn quadrature_agrees_with_algebra() {
        for p in Preset::ALL {
            let e = es(p.name(), 0, 12);
            let ls = build_ladder(&e, 12, 1.0, 1.0).unwrap();
            let [xs, kh, _] = quadrature_elements(&e, 12);
            let n = ls.dim() - 2;
            let dx = (&xs - &ls.xhat).view((0, 0), (n, n)).amax();
            let dk = (&kh - &ls.kop).view((0, 0), (n, n)).amax();
            assert!(dx < 1e-6 * ls.xhat.amax(), "{} x {dx:e}", p.name());
            assert!(dk < 1e-6 * ls.kop.amax(), "{} k {dk:e}", p.name());
        }
    }

    #[test]
    fn classical_frequencies() {
        let osc = preset("shifted_oscillator").unwrap().spec;
        for e in [1.0, 3.0, 7.5] {
            let cp = classical_phase_for(&osc, 0, e, 1.0, EtaMode::Fit).unwrap();
            assert!((cp.omega_c - 1.0).abs() < 1e-10);
            assert!(cp.cubic_residual < 1e-10);
        }
        let lag = preset("three_dim_oscillator").unwrap().spec;
        let cp = classical_phase_for(&lag, 1, 4.0, 1.0, EtaMode::Fit).unwrap();
        assert!((cp.omega_c - 1.0).abs() < 1e-10);
        assert!(matches!(
            classical_phase_for(&osc, 0, 1.0, 1.0, EtaMode::Printed),
            Err(Error::NonOscillatory { .. })
        ));
        for p in Preset::ALL {
            let spec = preset(p.name()).unwrap().spec;
            let e0 = spec.shape().energy(2, 1);
            let cp = classical_phase_for(&spec, 1, e0, 1.0, EtaMode::Fit).unwrap();
            assert!(cp.cubic_residual < 1e-9, "{}", p.name());
            assert!(cp.eta1 < 0.0);
        }
    }

    #[test]
    fn orbit_endpoints_and_energy() {
        let osc = preset("shifted_oscillator").unwrap().spec;
        let e = 3.0;
        let cp = classical_phase_for(&osc, 0, e, 1.0, EtaMode::Fit).unwrap();
        let (x, p) = classical_orbit(&cp, 0.0);
        assert_eq!(x, 0.0);
        assert!((p - cp.mass * cp.amplitude * cp.omega_c).abs() < 1e-14);
        let (x, p) = classical_orbit(&cp, std::f64::consts::FRAC_PI_2 / cp.omega_c);
        assert!((x - cp.amplitude).abs() < 1e-12 && p.abs() < 1e-12);

        // Hamilton's equations in xi = x with H = m/2 xi'^2 + V, integrated by RK4
        let es0 = es("shifted_oscillator", 0, 4);
        let v = |x: f64| crate::eigensystem::potential_value(&es0, x).unwrap();
        let dv = |x: f64| (v(x + 1e-5) - v(x - 1e-5)) / 2e-5;
        let m = cp.mass;
        let mut s = [-cp.offset, cp.amplitude * cp.omega_c];
        let h = 1e-3;
        let f = |s: [f64; 2]| [s[1], -dv(s[0]) / m];
        for step in 0..3000 {
            let k1 = f(s);
            let k2 = f([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
            let k3 = f([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
            let k4 = f([s[0] + h * k3[0], s[1] + h * k3[1]]);
            for j in 0..2 {
                s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            let t = (step + 1) as f64 * h;
            let energy = 0.5 * m * s[1] * s[1] + v(s[0]);
            assert!((energy - e).abs() < 1e-6 * e);
            let (xc, _) = classical_orbit(&cp, t);
            assert!((xc - (s[0] + cp.offset)).abs() < 1e-6);
        }
    }

    #[test]
    fn truncation_guard() {
        let e = es("shifted_oscillator", 2, 8);
        assert!(matches!(
            build_ladder(&e, 3, 1.0, 1.0),
            Err(Error::TruncationTooSmall { .. })
        ));
    }
}
