//! Potentials V_m, spectra E(n,m) and normalized wavefunctions on a grid.

use crate::error::{Error, Result};
use crate::master_catalog::{MasterSpec, Shape};
use crate::numerics::Grid;
use crate::orthopoly::{PolySystem, Sector};

pub use crate::master_catalog::coordinate_map;

#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub spec: MasterSpec,
    pub shape: Shape,
    pub m: usize,
    pub nmax: usize,
    pub sector: Sector,
    pub grid: Grid,
    /// xi at the grid nodes
    pub xi: Vec<f64>,
    /// V_m at the grid nodes (gamma_shift included)
    pub potential: Vec<f64>,
    /// E(n,m) + gamma_shift for n = m..=nmax
    pub energies: Vec<f64>,
    /// psi_n^m at the grid nodes, unit norm in xi; row n - m
    pub wavefunctions: Vec<Vec<f64>>,
    /// ln N_n, with A^{1/4} W^{1/2} phi_{n,m} = N_n * lead(q_n) / |lead(q_n)| * psi_n^m
    /// for the monic choice of phi_n
    pub ln_basis_norms: Vec<f64>,
}

fn sign_m(m: usize) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn build_eigensystem(ps: &PolySystem, m: usize, grid: &Grid) -> Result<EigenSystem> {
    if m > ps.max_n {
        return Err(Error::BadQuantumNumbers { n: ps.max_n, m });
    }
    build_eigensystem_for(&ps.spec, m, ps.max_n, grid)
}

pub fn build_eigensystem_for(
    spec: &MasterSpec,
    m: usize,
    nmax: usize,
    grid: &Grid,
) -> Result<EigenSystem> {
    let sector = Sector::new(spec, m, nmax, grid)?;
    let shape = spec.shape();
    if let Some(&x) = grid.nodes.iter().find(|&&x| !(spec.a(x) > 0.0)) {
        return Err(Error::MapNotMonotone { x });
    }
    let nmax = sector.nmax;
    let xi = grid
        .nodes
        .iter()
        .map(|&x| coordinate_map(spec, x))
        .collect::<Result<Vec<_>>>()?;
    let potential = grid
        .nodes
        .iter()
        .map(|&x| potential_at(spec, &shape, m, x))
        .collect();
    let energies = (m..=nmax)
        .map(|n| shape.energy(n, m) + spec.gamma_shift)
        .collect();
    let dim = nmax - m + 1;
    let mut wavefunctions = vec![vec![0.0; grid.len()]; dim];
    for (k, &x) in grid.nodes.iter().enumerate() {
        let vals = psi_at(spec, &sector, x);
        for (i, v) in vals.iter().enumerate() {
            wavefunctions[i][k] = v[0];
        }
    }
    let ln_basis_norms = (m..=nmax)
        .map(|n| sector.ln_nu[n] - sector.ln_lead[n])
        .collect();
    Ok(EigenSystem {
        spec: spec.clone(),
        shape,
        m,
        nmax,
        sector,
        grid: grid.clone(),
        xi,
        potential,
        energies,
        wavefunctions,
        ln_basis_norms,
    })
}

/// (psi, dpsi/dxi, d^2psi/dxi^2) for every n of the sector at x.
pub fn psi_at(spec: &MasterSpec, sector: &Sector, x: f64) -> Vec<[f64; 3]> {
    let sh = &sector.shape;
    let m = sector.m as f64;
    let (a, ap, app) = (sh.a(x), sh.ap(x), sh.app());
    let wl = sh.l1(x) / a;
    let wl_d = (sh.a1 * a - sh.l1(x) * ap) / (a * a);
    let p = 0.25 + 0.5 * m;
    let g = p * a.ln() + 0.5 * spec.weight.ln_w(x);
    let g1 = p * ap / a + 0.5 * wl;
    let g2 = p * (app * a - ap * ap) / (a * a) + 0.5 * wl_d;
    let sa = a.sqrt();
    let (rows, scales) = sector.eval(x);
    let s = sign_m(sector.m);
    rows.iter()
        .zip(&scales)
        .map(|(r, &ls)| {
            let e = s * (g + ls).exp();
            let f = e * r[0];
            let fx = e * (g1 * r[0] + r[1]);
            let fxx = e * ((g2 + g1 * g1) * r[0] + 2.0 * g1 * r[1] + r[2]);
            [f, sa * fx, a * fxx + 0.5 * ap * fx]
        })
        .collect()
}

fn potential_at(spec: &MasterSpec, sh: &Shape, m: usize, x: f64) -> f64 {
    let m = m as f64;
    let (a, ap, l1) = (sh.a(x), sh.ap(x), sh.l1(x));
    -0.5 * sh.a1 - (2.0 * m - 1.0) / 4.0 * sh.app()
        + l1 * l1 / (4.0 * a)
        + 0.5 * m * ap * (l1 / a)
        + (4.0 * m * m - 1.0) / 16.0 * ap * ap / a
        + spec.gamma_shift
}

pub fn potential_value(es: &EigenSystem, x: f64) -> Result<f64> {
    let (a, b) = es.spec.interval;
    if !(x > a && x < b) {
        return Err(Error::OutOfInterval { x });
    }
    Ok(potential_at(&es.spec, &es.shape, es.m, x))
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.nmax - self.m + 1
    }

    pub fn energy(&self, n: usize) -> f64 {
        self.energies[n - self.m]
    }

    pub fn psi(&self, n: usize) -> &[f64] {
        &self.wavefunctions[n - self.m]
    }

    pub fn xi_weights(&self) -> Vec<f64> {
        self.grid.xi_weights(&self.spec)
    }

    /// Gram matrix of the stored wavefunctions by quadrature in xi.
    pub fn gram(&self, upto: usize) -> Vec<Vec<f64>> {
        let w = self.xi_weights();
        let top = upto.min(self.nmax);
        (self.m..=top)
            .map(|i| {
                (self.m..=top)
                    .map(|j| {
                        self.psi(i)
                            .iter()
                            .zip(self.psi(j))
                            .zip(&w)
                            .map(|((a, b), w)| a * b * w)
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// ||(-d^2/dxi^2 + V - E) psi|| / ||E psi|| in L2(xi).
    pub fn schrodinger_residual(&self, n: usize) -> f64 {
        let e = self.energy(n);
        let i = n - self.m;
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, (&x, &w)) in self.grid.nodes.iter().zip(&self.grid.weights).enumerate() {
            let d = psi_at(&self.spec, &self.sector, x)[i];
            let r = -d[2] + (self.potential[k] - e) * d[0];
            let wx = w / self.spec.a(x).sqrt();
            num += wx * r * r;
            den += wx * e * e * d[0] * d[0];
        }
        (num / den).sqrt()
    }

    /// Sign changes of psi_n across the grid, ignoring negligible samples.
    pub fn node_count(&self, n: usize) -> usize {
        let v = self.psi(n);
        let big = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut last = 0.0;
        let mut count = 0;
        for &y in v {
            if y.abs() < 1e-10 * big {
                continue;
            }
            if last != 0.0 && y.signum() != last {
                count += 1;
            }
            last = y.signum();
        }
        count
    }
}
