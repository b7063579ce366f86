//! Grids, quadrature and a scalar root finder.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::master_catalog::MasterSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Finite,
    SemiInfinite,
    Infinite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub map_kind: MapKind,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn integrate_samples(&self, v: &[f64]) -> f64 {
        self.weights.iter().zip(v).map(|(w, f)| w * f).sum()
    }

    /// Weights for integrals in xi: dxi = dx / sqrt(A).
    pub fn xi_weights(&self, spec: &MasterSpec) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w / spec.a(x).sqrt())
            .collect()
    }
}

pub const DEFAULT_NPOINTS: usize = 200;

/// Gauss-Legendre nodes and weights on [-1, 1], exactly symmetric.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

const T_CAP: f64 = 6.0;
const ENVELOPE_DROP: f64 = 60.0;
const DEGREE_BUDGET: f64 = 128.0;

/// Change of variables for an unbounded interval.
#[derive(Clone, Copy, Debug)]
struct DeMap {
    kind: MapKind,
    anchor: f64,
    scale: f64,
    /// +1 for (a, inf), -1 for (-inf, b); unused for the real line
    dir: f64,
}

impl DeMap {
    fn x(&self, t: f64) -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        match self.kind {
            MapKind::Infinite => self.anchor + self.scale * u.sinh(),
            _ => self.anchor + self.dir * self.scale * u.exp(),
        }
    }
    fn dxdt(&self, t: f64) -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let du = FRAC_PI_2 * t.cosh();
        match self.kind {
            MapKind::Infinite => self.scale * u.cosh() * du,
            _ => self.scale * u.exp() * du,
        }
    }
}

fn is_symmetric(spec: &MasterSpec) -> bool {
    let (a, b) = spec.interval;
    if spec.a_coeffs[1] != 0.0 || a != -b {
        return false;
    }
    [0.1, 0.37, 0.8, 1.9, 5.3].iter().all(|&x| {
        let x = if b.is_finite() { x / 6.0 * b } else { x };
        let (l, r) = (spec.weight.ln_w(x), spec.weight.ln_w(-x));
        (l - r).abs() <= 1e-13 * (1.0 + l.abs())
    })
}

/// Exponent s with W ~ |x|^s at an infinite end, when that limit is finite.
fn algebraic_exponent(spec: &MasterSpec, sign: f64) -> Option<f64> {
    let x = sign * 1e8;
    let s = x * spec.weight.dlog(x);
    (s.is_finite() && s.abs() < 1e4).then_some(s)
}

pub fn build_grid(spec: &MasterSpec, npoints: usize) -> Result<Grid> {
    let (a, b) = spec.interval;
    if !(a < b) {
        return Err(Error::IntervalDegenerate { a, b });
    }
    let npoints = npoints.max(16);
    if a.is_finite() && b.is_finite() {
        let (z, w) = gauss_legendre(npoints);
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        return Ok(Grid {
            nodes: z.iter().map(|t| c + h * t).collect(),
            weights: w.iter().map(|v| v * h).collect(),
            map_kind: MapKind::Finite,
        });
    }
    let ln_aw = |x: f64| spec.weight.ln_w(x) + spec.a(x).abs().ln();
    let map = if a.is_finite() || b.is_finite() {
        let (end, dir) = if a.is_finite() { (a, 1.0) } else { (b, -1.0) };
        let peak = (-120..=120)
            .map(|k| 10f64.powf(k as f64 / 20.0))
            .map(|d| (d, ln_aw(end + dir * d)))
            .filter(|(_, v)| v.is_finite())
            .fold(
                (1.0, f64::NEG_INFINITY),
                |acc, c| if c.1 > acc.1 { c } else { acc },
            )
            .0;
        DeMap {
            kind: MapKind::SemiInfinite,
            anchor: end,
            scale: peak,
            dir,
        }
    } else {
        let c = if is_symmetric(spec) {
            0.0
        } else {
            (-4000..=4000)
                .map(|k| k as f64 * 0.005)
                .map(|x| (x, ln_aw(x)))
                .filter(|(_, v)| v.is_finite())
                .fold(
                    (0.0, f64::NEG_INFINITY),
                    |acc, c| if c.1 > acc.1 { c } else { acc },
                )
                .0
        };
        let h = 1e-3;
        let curv = -(ln_aw(c + h) - 2.0 * ln_aw(c) + ln_aw(c - h)) / (h * h);
        let scale = if curv.is_finite() && curv > 0.0 {
            (1.0 / curv.sqrt()).clamp(1e-3, 1e3)
        } else {
            1.0
        };
        DeMap {
            kind: MapKind::Infinite,
            anchor: c,
            scale,
            dir: 1.0,
        }
    };

    let budget = |sign: f64| match algebraic_exponent(spec, sign) {
        Some(s) => (-s - 3.0).clamp(0.0, DEGREE_BUDGET),
        None => DEGREE_BUDGET,
    };
    let (d_lo, d_hi) = match map.kind {
        MapKind::Infinite => (budget(-1.0), budget(1.0)),
        _ => (0.0, budget(map.dir)),
    };
    let inside = |x: f64| x > a && x < b;
    // Union of the ranges that matter for the lowest and the highest degree.
    let envelope = |t: f64, scaled: bool| {
        let x = map.x(t);
        if !inside(x) || !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        let d = match (scaled, t < 0.0) {
            (false, _) => 0.0,
            (true, true) => d_lo,
            (true, false) => d_hi,
        };
        let r = ((x - map.anchor) / map.scale).abs();
        let e = spec.weight.ln_w(x) + d * r.ln_1p() + map.dxdt(t).ln();
        if e.is_nan() {
            f64::NEG_INFINITY
        } else {
            e
        }
    };
    let step = 0.01;
    let ts: Vec<f64> = (0..=((2.0 * T_CAP / step) as usize))
        .map(|i| -T_CAP + i as f64 * step)
        .collect();
    let mut keep = Vec::new();
    for scaled in [false, true] {
        let es: Vec<f64> = ts.iter().map(|&t| envelope(t, scaled)).collect();
        let emax = es.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        keep.extend((0..ts.len()).filter(|&i| es[i] >= emax - ENVELOPE_DROP));
    }
    keep.sort_unstable();
    let (mut t_lo, mut t_hi) = (ts[keep[0]], ts[*keep.last().unwrap()]);
    if map.kind == MapKind::Infinite && map.anchor == 0.0 && is_symmetric(spec) {
        let t = t_lo.abs().max(t_hi.abs());
        t_lo = -t;
        t_hi = t;
    }
    let n1 = (npoints - 1) as f64;
    let h = (t_hi - t_lo) / n1;
    let mut nodes = Vec::with_capacity(npoints);
    let mut weights = Vec::with_capacity(npoints);
    for i in 0..npoints {
        let t = if t_lo == -t_hi {
            t_hi * (2.0 * i as f64 - n1) / n1
        } else {
            t_lo + i as f64 * h
        };
        let x = map.x(t);
        if inside(x) && x.is_finite() {
            nodes.push(x);
            weights.push(h * map.dxdt(t));
        }
    }
    if map.dir < 0.0 {
        nodes.reverse();
        weights.reverse();
    }
    Ok(Grid {
        nodes,
        weights,
        map_kind: map.kind,
    })
}

/// Solves z = f(z) by Newton's method on z - f(z), falling back to plain
/// fixed-point steps when Newton does not reduce the residual.
pub fn solve_fixed_point(f: impl Fn(f64) -> f64, x_init: f64, tol: f64) -> Result<f64> {
    let g = |z: f64| z - f(z);
    let mut z = x_init;
    let mut gz = g(z);
    for _ in 0..100 {
        if gz.abs() < tol {
            return Ok(z);
        }
        let h = 1e-7 * (1.0 + z.abs());
        let dg = (g(z + h) - g(z - h)) / (2.0 * h);
        let newton = z - gz / dg;
        let gn = if newton.is_finite() {
            g(newton)
        } else {
            f64::NAN
        };
        if gn.is_finite() && gn.abs() < gz.abs() {
            z = newton;
            gz = gn;
        } else {
            z = f(z);
            gz = g(z);
        }
    }
    if gz.abs() < tol {
        Ok(z)
    } else {
        Err(Error::NoConvergence { iterations: 100 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::master_catalog::preset;

    #[test]
    fn legendre_exactness() {
        let (x, w) = gauss_legendre(32);
        assert_eq!(x.len(), 32);
        for i in 0..16 {
            assert_eq!(x[i], -x[31 - i]);
        }
        for k in 0..64 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            let want = if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k as f64 + 1.0)
            };
            assert!((got - want).abs() < 1e-14, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn gaussian_integral_64_points() {
        let spec = preset("shifted_oscillator").unwrap().spec;
        let g = build_grid(&spec, 64).unwrap();
        let v = g.integrate(|x| (-0.5 * x * x).exp());
        let want = (2.0 * std::f64::consts::PI).sqrt();
        assert!((v - want).abs() < 1e-12 * want, "{v} vs {want}");
    }

    #[test]
    fn half_line_grid_is_positive() {
        let spec = preset("three_dim_oscillator").unwrap().spec;
        let g = build_grid(&spec, 64).unwrap();
        assert!(g.nodes.iter().all(|&x| x > 0.0));
        assert!(g.weights.iter().all(|&w| w > 0.0));
        assert!(g.nodes.windows(2).all(|p| p[0] < p[1]));
        let v = g.integrate(|x| x * (-x).exp());
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn finite_grid_symmetric() {
        let spec = preset("row7_trigonometric").unwrap().spec;
        let g = build_grid(&spec, 32).unwrap();
        for i in 0..16 {
            assert_eq!(g.nodes[i], -g.nodes[31 - i]);
        }
    }

    #[test]
    fn degenerate_interval() {
        let mut spec = preset("row7_trigonometric").unwrap().spec;
        spec.interval = (1.0, 1.0);
        assert!(matches!(
            build_grid(&spec, 32),
            Err(Error::IntervalDegenerate { .. })
        ));
    }

    #[test]
    fn fixed_point_examples() {
        let z = solve_fixed_point(|_| 0.3 + 0.2, 0.0, 1e-14).unwrap();
        assert!((z - 0.5).abs() < 1e-14);
        let z = solve_fixed_point(|z| 1.0 + 0.5 * z, 1.0, 1e-14).unwrap();
        assert!((z - 2.0).abs() < 1e-13);
        let z = solve_fixed_point(|z| 1.0 + 0.1 * z * z, 1.0, 1e-14).unwrap();
        let want = (1.0 - (1.0f64 - 0.4).sqrt()) / 0.2;
        assert!((z - want).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_reports_failure() {
        assert!(solve_fixed_point(|z| z + 1.0, 0.0, 1e-12).is_err());
    }
}
