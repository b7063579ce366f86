//! Master function / weight specifications, admissibility checks and the
//! catalog of eight named potentials.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Weight families. `ln_w` and `dlog` (= W'/W) are closed forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Weight {
    /// exp(-alpha x^2 / 2 - 2 b x)
    ExpQuadratic { alpha: f64, b: f64 },
    /// x^alpha exp(-beta x)
    PowerExp { alpha: f64, beta: f64 },
    /// x^alpha exp(-beta / x)
    PowerInvExp { alpha: f64, beta: f64 },
    /// (1 + x^2)^alpha exp(beta atan x)
    PowerArctan { alpha: f64, beta: f64 },
    /// (p0 + p1 x)^alpha (q0 + q1 x)^beta
    BinomialPower {
        alpha: f64,
        beta: f64,
        first: [f64; 2],
        second: [f64; 2],
    },
}

impl Weight {
    pub fn ln_w(&self, x: f64) -> f64 {
        match *self {
            Weight::ExpQuadratic { alpha, b } => -0.5 * alpha * x * x - 2.0 * b * x,
            Weight::PowerExp { alpha, beta } => alpha * x.ln() - beta * x,
            Weight::PowerInvExp { alpha, beta } => alpha * x.ln() - beta / x,
            Weight::PowerArctan { alpha, beta } => alpha * (x * x).ln_1p() + beta * x.atan(),
            Weight::BinomialPower {
                alpha,
                beta,
                first,
                second,
            } => pow_ln(first[0] + first[1] * x, alpha) + pow_ln(second[0] + second[1] * x, beta),
        }
    }

    /// W'/W
    pub fn dlog(&self, x: f64) -> f64 {
        match *self {
            Weight::ExpQuadratic { alpha, b } => -alpha * x - 2.0 * b,
            Weight::PowerExp { alpha, beta } => alpha / x - beta,
            Weight::PowerInvExp { alpha, beta } => alpha / x + beta / (x * x),
            Weight::PowerArctan { alpha, beta } => (2.0 * alpha * x + beta) / (1.0 + x * x),
            Weight::BinomialPower {
                alpha,
                beta,
                first,
                second,
            } => {
                alpha * first[1] / (first[0] + first[1] * x)
                    + beta * second[1] / (second[0] + second[1] * x)
            }
        }
    }

    /// ln W(x + d) - ln W(x) without cancellation for small d.
    pub fn ln_ratio(&self, x: f64, d: f64) -> f64 {
        match *self {
            Weight::ExpQuadratic { alpha, b } => -0.5 * alpha * d * (2.0 * x + d) - 2.0 * b * d,
            Weight::PowerExp { alpha, beta } => alpha * (d / x).ln_1p() - beta * d,
            Weight::PowerInvExp { alpha, beta } => {
                alpha * (d / x).ln_1p() + beta * d / (x * (x + d))
            }
            Weight::PowerArctan { alpha, beta } => {
                alpha * (d * (2.0 * x + d) / (1.0 + x * x)).ln_1p()
                    + beta * (d / (1.0 + x * (x + d))).atan()
            }
            Weight::BinomialPower {
                alpha,
                beta,
                first,
                second,
            } => {
                alpha * (first[1] * d / (first[0] + first[1] * x)).ln_1p()
                    + beta * (second[1] * d / (second[0] + second[1] * x)).ln_1p()
            }
        }
    }

    pub fn params(&self) -> (f64, f64) {
        match *self {
            Weight::ExpQuadratic { alpha, b } => (alpha, b),
            Weight::PowerExp { alpha, beta }
            | Weight::PowerInvExp { alpha, beta }
            | Weight::PowerArctan { alpha, beta }
            | Weight::BinomialPower { alpha, beta, .. } => (alpha, beta),
        }
    }

    /// Exact (C, A1) of the line A W'/W = C + A1 x when A has the matching
    /// shape for the family; `None` otherwise.
    fn exact_line(&self, c: [f64; 3]) -> Option<(f64, f64)> {
        let close = |u: f64, v: f64| (u - v).abs() <= 1e-14 * (1.0 + u.abs() + v.abs());
        match *self {
            Weight::ExpQuadratic { alpha, b } if c[1] == 0.0 && c[2] == 0.0 => {
                Some((-2.0 * b * c[0], -alpha * c[0]))
            }
            Weight::PowerExp { alpha, beta } if c[0] == 0.0 && c[2] == 0.0 => {
                Some((alpha * c[1], -beta * c[1]))
            }
            Weight::PowerInvExp { alpha, beta } if c[0] == 0.0 && c[1] == 0.0 => {
                Some((beta * c[2], alpha * c[2]))
            }
            Weight::PowerArctan { alpha, beta } if c[1] == 0.0 && close(c[0], c[2]) => {
                Some((beta * c[0], 2.0 * alpha * c[0]))
            }
            Weight::BinomialPower {
                alpha,
                beta,
                first: p,
                second: q,
            } => {
                let pq2 = p[1] * q[1];
                if pq2 == 0.0 {
                    return None;
                }
                let k = c[2] / pq2;
                let ok =
                    close(c[1], k * (p[0] * q[1] + p[1] * q[0])) && close(c[0], k * p[0] * q[0]);
                ok.then(|| {
                    (
                        k * (alpha * p[1] * q[0] + beta * q[1] * p[0]),
                        k * (alpha + beta) * p[1] * q[1],
                    )
                })
            }
            _ => None,
        }
    }
}

fn pow_ln(base: f64, e: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e * base.ln()
    }
}

mod interval_serde {
    use serde::de::{self, Deserializer};
    use serde::ser::{SerializeTuple, Serializer};
    use serde::Deserialize;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    fn decode<E: de::Error>(r: Raw) -> Result<f64, E> {
        match r {
            Raw::Num(v) => Ok(v),
            Raw::Text(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => other
                    .parse()
                    .map_err(|_| E::custom(format!("bad endpoint '{other}'"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        for e in [v.0, v.1] {
            if e == f64::INFINITY {
                t.serialize_element("inf")?;
            } else if e == f64::NEG_INFINITY {
                t.serialize_element("-inf")?;
            } else {
                t.serialize_element(&e)?;
            }
        }
        t.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(f64, f64), D::Error> {
        let (a, b): (Raw, Raw) = Deserialize::deserialize(d)?;
        Ok((decode(a)?, decode(b)?))
    }
}

fn default_mass() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MasterSpec {
    pub name: String,
    /// (c0, c1, c2) with A(x) = c0 + c1 x + c2 x^2
    pub a_coeffs: [f64; 3],
    pub weight: Weight,
    #[serde(with = "interval_serde")]
    pub interval: (f64, f64),
    #[serde(default)]
    pub gamma_shift: f64,
    /// Classical mass. The quantum kinetic term is -d^2/dxi^2, i.e. mass 1/2.
    #[serde(default = "default_mass")]
    pub mass: f64,
}

impl MasterSpec {
    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn a(&self, x: f64) -> f64 {
        let c = self.a_coeffs;
        c[0] + x * (c[1] + x * c[2])
    }

    pub fn a_prime(&self, x: f64) -> f64 {
        self.a_coeffs[1] + 2.0 * self.a_coeffs[2] * x
    }

    /// The line A W'/W = C + A1 x, exact for presets, fitted through two
    /// interior points otherwise.
    pub fn shape(&self) -> Shape {
        let c = self.a_coeffs;
        let (cc, a1) = self.weight.exact_line(c).unwrap_or_else(|| {
            let p = interior_probes(self.interval.0, self.interval.1, 2);
            let l = |x: f64| self.a(x) * self.weight.dlog(x);
            let a1 = (l(p[1]) - l(p[0])) / (p[1] - p[0]);
            (l(p[0]) - a1 * p[0], a1)
        });
        Shape { c, a1, cc }
    }

    pub fn preset_id(&self) -> Option<Preset> {
        Preset::from_name(&self.name).ok()
    }
}

/// Closed-form polynomial data shared by every formula.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shape {
    /// A coefficients
    pub c: [f64; 3],
    /// (A W'/W)'
    pub a1: f64,
    /// (A W'/W)(0)
    pub cc: f64,
}

impl Shape {
    pub fn a(&self, x: f64) -> f64 {
        self.c[0] + x * (self.c[1] + x * self.c[2])
    }
    pub fn ap(&self, x: f64) -> f64 {
        self.c[1] + 2.0 * self.c[2] * x
    }
    /// A'' (constant)
    pub fn app(&self) -> f64 {
        2.0 * self.c[2]
    }
    pub fn l1(&self, x: f64) -> f64 {
        self.cc + self.a1 * x
    }
    /// E(n,m) = -(n-m+1)(A1 + (n+m) A''/2)
    pub fn energy(&self, n: usize, m: usize) -> f64 {
        let (n, m) = (n as f64, m as f64);
        -(n - m + 1.0) * (self.a1 + 0.5 * (n + m) * self.app())
    }
    pub fn gamma_n(&self, n: usize) -> f64 {
        let n = n as f64;
        -n * (self.app() + self.a1) - 0.5 * n * (n - 1.0) * self.app()
    }
    /// mu_{n,m} = -A''(n-1)/2 - (A1 + n A''/2); independent of m.
    pub fn mu(&self, n: usize) -> f64 {
        let n = n as f64;
        -0.5 * self.app() * (n - 1.0) - (self.a1 + 0.5 * n * self.app())
    }
}

/// `k` increasing interior points suited to the interval shape.
pub fn interior_probes(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| {
            let u = (i as f64 + 1.0) / (k as f64 + 1.0);
            match (a.is_finite(), b.is_finite()) {
                (true, true) => a + (b - a) * u,
                (true, false) => a + 4.0 * u / (1.0 - u) * 0.5,
                (false, true) => b - 4.0 * (1.0 - u) / u * 0.5,
                (false, false) => 2.0 * (std::f64::consts::PI * (u - 0.5)).tan(),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub spec_name: String,
    pub checks: Vec<CheckResult>,
    #[serde(skip)]
    errors: Vec<Error>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.errors.is_empty()
    }
    pub fn errors(&self) -> &[Error] {
        &self.errors
    }
    pub fn into_result(self) -> Result<()> {
        match self.errors.into_iter().next() {
            None => Ok(()),
            Some(e) => Err(e),
        }
    }
    fn push(&mut self, name: &str, outcome: std::result::Result<String, Error>) {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(e) => {
                let d = e.to_string();
                self.errors.push(e);
                (false, d)
            }
        };
        self.checks.push(CheckResult {
            name: name.into(),
            passed,
            detail,
        });
    }
}

pub fn validate(spec: &MasterSpec) -> ValidationReport {
    let mut rep = ValidationReport {
        spec_name: spec.name.clone(),
        checks: vec![],
        errors: vec![],
    };
    let (a, b) = spec.interval;
    if !(a < b) {
        rep.push("interval", Err(Error::IntervalDegenerate { a, b }));
        return rep;
    }
    rep.push("interval", Ok(format!("({a}, {b})")));
    rep.push("positive_a", check_positive_a(spec));
    rep.push("endpoint_vanishing", check_endpoints(spec));
    rep.push("degree", check_degree(spec, &interior_probes(a, b, 5)));
    if let Some(p) = spec.preset_id() {
        rep.push("parameter_range", p.check_params(&spec.weight));
    }
    rep
}

fn check_positive_a(spec: &MasterSpec) -> std::result::Result<String, Error> {
    let (a, b) = spec.interval;
    let mut min = f64::INFINITY;
    for x in interior_probes(a, b, 201) {
        let v = spec.a(x);
        if !(v > 0.0) {
            return Err(Error::NonPositiveA { x, value: v });
        }
        min = min.min(v);
    }
    Ok(format!("min A on probes = {min:e}"))
}

fn check_endpoints(spec: &MasterSpec) -> std::result::Result<String, Error> {
    let (a, b) = spec.interval;
    let ln_aw = |x: f64| spec.a(x).abs().ln() + spec.weight.ln_w(x);
    let mut detail = Vec::new();
    for (label, end, inward) in [("left", a, 1.0), ("right", b, -1.0)] {
        let span = if a.is_finite() && b.is_finite() {
            b - a
        } else {
            1.0
        };
        let vals: Vec<f64> = (1..=6)
            .map(|k| {
                let x = if end.is_finite() {
                    end + inward * span * 10f64.powi(-k)
                } else {
                    -inward * 10f64.powi(k)
                };
                ln_aw(x)
            })
            .collect();
        let ok = vals.iter().all(|v| !v.is_nan()) && vals.windows(2).all(|w| w[1] < w[0]);
        if !ok {
            return Err(Error::WeightNotVanishing {
                endpoint: label.into(),
            });
        }
        detail.push(format!("{label}: ln|AW| {:.3} -> {:.3}", vals[0], vals[5]));
    }
    Ok(detail.join("; "))
}

/// Fits (AW)'/W = A' + A W'/W to a line at `xs` and returns the relative residual.
pub fn degree_residual(spec: &MasterSpec, xs: &[f64]) -> f64 {
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| spec.a_prime(x) + spec.a(x) * spec.weight.dlog(x))
        .collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let line = |x: f64| my + slope * (x - mx);
    let scale = xs
        .iter()
        .map(|&x| line(x).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    xs.iter()
        .zip(&ys)
        .map(|(&x, y)| (y - line(x)).abs())
        .fold(0.0, f64::max)
        / scale
}

fn check_degree(spec: &MasterSpec, xs: &[f64]) -> std::result::Result<String, Error> {
    let r = degree_residual(spec, xs);
    if r.is_finite() && r < 1e-10 {
        Ok(format!("relative residual {r:e}"))
    } else {
        Err(Error::DegreeViolation { residual: r })
    }
}

/// Reference formulas printed in the catalog, kept for cross-checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRef {
    pub x_of_t: &'static str,
    pub mu: &'static str,
    pub energy: &'static str,
    pub omega_c: &'static str,
    pub g: &'static str,
    pub an_ratio: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PresetRecord {
    pub id: Preset,
    pub spec: MasterSpec,
    pub reference: TableRef,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    ShiftedOscillator,
    ThreeDimOscillator,
    Morse,
    Scarf2Hyperbolic,
    Scarf1Trigonometric,
    GenPoschlTeller,
    Row7Trigonometric,
    Natanzon,
}

pub fn preset(name: &str) -> Result<PresetRecord> {
    let id = Preset::from_name(name)?;
    let (a, b) = id.default_params();
    Ok(id.record(a, b))
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::ShiftedOscillator,
        Preset::ThreeDimOscillator,
        Preset::Morse,
        Preset::Scarf2Hyperbolic,
        Preset::Scarf1Trigonometric,
        Preset::GenPoschlTeller,
        Preset::Row7Trigonometric,
        Preset::Natanzon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::ShiftedOscillator => "shifted_oscillator",
            Preset::ThreeDimOscillator => "three_dim_oscillator",
            Preset::Morse => "morse",
            Preset::Scarf2Hyperbolic => "scarf2_hyperbolic",
            Preset::Scarf1Trigonometric => "scarf1_trigonometric",
            Preset::GenPoschlTeller => "gen_poschl_teller",
            Preset::Row7Trigonometric => "row7_trigonometric",
            Preset::Natanzon => "natanzon",
        }
    }

    pub fn from_name(name: &str) -> Result<Preset> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::UnknownPreset(name.to_string()))
    }

    /// (alpha, beta); for the shifted oscillator the second entry is b.
    ///
    /// Morse, Scarf II, generalized Poschl-Teller and Natanzon defaults are
    /// picked so that roughly twenty bound states are normalizable.
    pub fn default_params(self) -> (f64, f64) {
        match self {
            Preset::ShiftedOscillator => (1.0, 0.0),
            Preset::ThreeDimOscillator => (1.0, 1.0),
            Preset::Morse => (-41.0, 1.0),
            Preset::Scarf2Hyperbolic => (-20.25, 0.5),
            Preset::Scarf1Trigonometric => (1.0, 1.0),
            Preset::GenPoschlTeller => (1.0, -50.0),
            Preset::Row7Trigonometric => (1.0, 1.0),
            Preset::Natanzon => (1.0, -50.0),
        }
    }

    pub fn spec(self, alpha: f64, beta: f64) -> MasterSpec {
        let inf = f64::INFINITY;
        let (a_coeffs, weight, interval) = match self {
            Preset::ShiftedOscillator => (
                [1.0, 0.0, 0.0],
                Weight::ExpQuadratic { alpha, b: beta },
                (-inf, inf),
            ),
            Preset::ThreeDimOscillator => (
                [0.0, 1.0, 0.0],
                Weight::PowerExp { alpha, beta },
                (0.0, inf),
            ),
            Preset::Morse => (
                [0.0, 0.0, 1.0],
                Weight::PowerInvExp { alpha, beta },
                (0.0, inf),
            ),
            Preset::Scarf2Hyperbolic => (
                [1.0, 0.0, 1.0],
                Weight::PowerArctan { alpha, beta },
                (-inf, inf),
            ),
            Preset::Scarf1Trigonometric => (
                [0.0, 1.0, -1.0],
                Weight::BinomialPower {
                    alpha,
                    beta,
                    first: [0.0, 1.0],
                    second: [1.0, -1.0],
                },
                (0.0, 1.0),
            ),
            Preset::GenPoschlTeller => (
                [-1.0, 0.0, 1.0],
                Weight::BinomialPower {
                    alpha,
                    beta,
                    first: [-1.0, 1.0],
                    second: [1.0, 1.0],
                },
                (1.0, inf),
            ),
            Preset::Row7Trigonometric => (
                [1.0, 0.0, -1.0],
                Weight::BinomialPower {
                    alpha,
                    beta,
                    first: [1.0, -1.0],
                    second: [1.0, 1.0],
                },
                (-1.0, 1.0),
            ),
            Preset::Natanzon => (
                [-1.0, 0.0, 4.0],
                Weight::BinomialPower {
                    alpha,
                    beta,
                    first: [-1.0, 2.0],
                    second: [1.0, 2.0],
                },
                (0.5, inf),
            ),
        };
        MasterSpec {
            name: self.name().to_string(),
            a_coeffs,
            weight,
            interval,
            gamma_shift: 0.0,
            mass: default_mass(),
        }
    }

    pub fn record(self, alpha: f64, beta: f64) -> PresetRecord {
        PresetRecord {
            id: self,
            spec: self.spec(alpha, beta),
            reference: self.reference(),
        }
    }

    pub fn reference(self) -> TableRef {
        match self {
            Preset::ShiftedOscillator => TableRef {
                x_of_t: "x = t - 2b/alpha",
                mu: "(n-m)/n sqrt(n)",
                energy: "alpha(n-m+1)",
                omega_c: "alpha",
                g: "x0 p0",
                an_ratio: "(k0/alpha)^n / sqrt(Gamma(n+1))",
            },
            Preset::ThreeDimOscillator => TableRef {
                x_of_t: "x = t^2/4",
                mu: "-(n-m) sqrt((n+alpha)/n)",
                energy: "beta(n-m+1)",
                omega_c: "beta",
                g: "x0 p0 (alpha+m-1/2)/beta (1 + 2H/((alpha+m-1) beta))",
                an_ratio: "(-k0)^n / sqrt(Gamma(n+1) Gamma(n+alpha+1))",
            },
            Preset::Morse => TableRef {
                x_of_t: "x = e^t",
                mu: "-(n+m)(n+alpha)/(2n+alpha) sqrt((n+alpha)/n)",
                energy: "-(alpha+n+m)(n-m+1)",
                omega_c: "2 sqrt(alpha^2/4 + (4m^2-1)/8 - E)",
                g: "x0 p0 e^{2t}",
                an_ratio: "(2k0)^n Gamma(n+alpha/2+1) sqrt(Gamma(n+alpha+1)/Gamma(n+1))",
            },
            Preset::Scarf2Hyperbolic => TableRef {
                x_of_t: "x = sinh t",
                mu: "(n-m)(n+2alpha)/(2n+2alpha) sqrt((2m-1)/2)",
                energy: "-(2alpha+n+m)(n-m+1)",
                omega_c: "2 sqrt(s1+s2), s1 = alpha^2+(4m^2-1)/8, s2 = (2m-1)(alpha-1/2)-E",
                g: "x0 p0 cosh^2 t",
                an_ratio: "(2k0)^n Gamma(n+2alpha+1)/(Gamma(n+alpha+1) Gamma(n+m+2alpha))",
            },
            Preset::Scarf1Trigonometric => TableRef {
                x_of_t: "x = (1 + sin t)/2",
                mu: "-n(n+a+b)/(2n+a+b) sqrt((n+a)(n+b)(2n+a+b-1)/(n(n+a+b)(2n+a+b+1)))",
                energy: "(alpha+beta+n+m)(n-m+1)",
                omega_c: "2 sqrt(s1+s2+s3), s1=(a+b)^2/4, s2=(m-1/2)(a+b-1), s3=E-(4m^2-1)/8",
                g: "x0 p0 cos^2 t",
                an_ratio: "(-2k0)^n Gamma(n+(a+b)/2) sqrt(Gamma(n+(a+b-1)/2)/Gamma(n+(a+b+1)/2)) / sqrt(Gamma(n+1)Gamma(n+a+1)Gamma(n+b+1)Gamma(n+a+b+1))",
            },
            Preset::GenPoschlTeller => TableRef {
                x_of_t: "x = cosh t",
                mu: "2n(n+a+b)/(2n+a+b) sqrt((n+a)(n+b)(2n+a+b-1)/(n(n+a+b)(2n+a+b+1)))",
                energy: "-(alpha+beta+n+m)(n-m+1)",
                omega_c: "2 sqrt(s1+s2+s3), s1=(a+b)^2/4, s2=(4m^2-1)/8-E, s3=(2m-1)(a+b-1)/2",
                g: "x0 p0 sinh^2 t",
                an_ratio: "Gamma(n+(a+b)/2) sqrt(Gamma(n+(a+b-1)/2)/Gamma(n+(a+b+1)/2)) / sqrt(Gamma(n+1)Gamma(n+a+1)Gamma(n+b+1)Gamma(n+a+b+1))",
            },
            Preset::Row7Trigonometric => TableRef {
                x_of_t: "x = cos t",
                mu: "2n(n+a+b)/(2n+a+b) sqrt((n+a)(n+b)(2n+a+b-1)/(n(n+a+b)(2n+a+b+1)))",
                energy: "(alpha+beta+n+m)(n-m+1)",
                omega_c: "2 sqrt(s1+s2+s3), s1=(a+b)^2/4, s2=E-(4m^2-1)/8, s3=(2m-1)(a+b-1)/2",
                g: "x0 p0 sin^2 t",
                an_ratio: "(2k0)^n Gamma(n+(a+b)/2) sqrt(Gamma(n+(a+b-1)/2)/Gamma(n+(a+b+1)/2)) / sqrt(Gamma(n+1)Gamma(n+a+1)Gamma(n+b+1)Gamma(n+a+b+1))",
            },
            Preset::Natanzon => TableRef {
                x_of_t: "x = cosh(2t)/2",
                mu: "2n(n+a+b)/(2n+a+b) sqrt((n+a)(n+b)(2n+a+b-1)/(n(n+a+b)(2n+a+b+1)))",
                energy: "-4(alpha+beta+n+m)(n-m+1)",
                omega_c: "4 sqrt(s1+s2+s3), s1=(a+b)^2, s2=(4m^2-1)/8-E, s3=2(2m-1)(a+b-1)",
                g: "x0 p0 sinh^2(2t)",
                an_ratio: "(k0/4)^n Gamma(n+(a+b)/2) sqrt(Gamma(n+(a+b-1)/2)/Gamma(n+(a+b+1)/2)) / sqrt(Gamma(n+1)Gamma(n+a+1)Gamma(n+b+1)Gamma(n+a+b+1))",
            },
        }
    }

    fn check_params(self, w: &Weight) -> std::result::Result<String, Error> {
        let family_ok = matches!(
            (self, w),
            (Preset::ShiftedOscillator, Weight::ExpQuadratic { .. })
                | (Preset::ThreeDimOscillator, Weight::PowerExp { .. })
                | (Preset::Morse, Weight::PowerInvExp { .. })
                | (Preset::Scarf2Hyperbolic, Weight::PowerArctan { .. })
                | (Preset::Scarf1Trigonometric, Weight::BinomialPower { .. })
                | (Preset::GenPoschlTeller, Weight::BinomialPower { .. })
                | (Preset::Row7Trigonometric, Weight::BinomialPower { .. })
                | (Preset::Natanzon, Weight::BinomialPower { .. })
        );
        if !family_ok {
            return Err(Error::ParameterRange(format!(
                "{} needs its own weight family",
                self.name()
            )));
        }
        let (a, b) = w.params();
        let (ok, rule) = match self {
            Preset::ShiftedOscillator => (a > 0.0, "alpha > 0"),
            Preset::ThreeDimOscillator => (a > -1.0 && b > 0.0, "alpha > -1, beta > 0"),
            Preset::Morse => (a < -2.0 && b > 0.0, "alpha < -2, beta > 0"),
            Preset::Scarf2Hyperbolic => (a < -1.0, "alpha < -1"),
            Preset::Scarf1Trigonometric | Preset::Row7Trigonometric => {
                (a > -1.0 && b > -1.0, "alpha > -1, beta > -1")
            }
            Preset::GenPoschlTeller | Preset::Natanzon => {
                (a > -1.0 && a + b < -1.0, "alpha > -1, alpha + beta < -1")
            }
        };
        if ok {
            Ok(format!("{rule}: alpha = {a}, beta = {b}"))
        } else {
            Err(Error::ParameterRange(format!(
                "{}: need {rule}, got alpha = {a}, beta = {b}",
                self.name()
            )))
        }
    }

    /// Closed-form coordinate t(x) inverting the catalog's x(t).
    pub fn xi(self, w: &Weight, x: f64) -> f64 {
        let (a, b) = w.params();
        match self {
            Preset::ShiftedOscillator => x + 2.0 * b / a,
            Preset::ThreeDimOscillator => 2.0 * x.sqrt(),
            Preset::Morse => x.ln(),
            Preset::Scarf2Hyperbolic => x.asinh(),
            Preset::Scarf1Trigonometric => (2.0 * x - 1.0).asin(),
            Preset::GenPoschlTeller => x.acosh(),
            Preset::Row7Trigonometric => x.acos(),
            Preset::Natanzon => 0.5 * (2.0 * x).acosh(),
        }
    }

    pub fn table_energy(self, w: &Weight, n: usize, m: usize) -> f64 {
        let (a, b) = w.params();
        let (n, m) = (n as f64, m as f64);
        let k = n - m + 1.0;
        match self {
            Preset::ShiftedOscillator => a * k,
            Preset::ThreeDimOscillator => b * k,
            Preset::Morse => -(a + n + m) * k,
            Preset::Scarf2Hyperbolic => -(2.0 * a + n + m) * k,
            Preset::Scarf1Trigonometric | Preset::Row7Trigonometric => (a + b + n + m) * k,
            Preset::GenPoschlTeller => -(a + b + n + m) * k,
            Preset::Natanzon => -4.0 * (a + b + n + m) * k,
        }
    }

    pub fn table_mu(self, w: &Weight, n: usize, m: usize) -> f64 {
        let (a, b) = w.params();
        let (n, m) = (n as f64, m as f64);
        let jac = ((n + a) * (n + b) * (2.0 * n + a + b - 1.0)
            / (n * (n + a + b) * (2.0 * n + a + b + 1.0)))
            .sqrt();
        match self {
            Preset::ShiftedOscillator => (n - m) / n * n.sqrt(),
            Preset::ThreeDimOscillator => -(n - m) * ((n + a) / n).sqrt(),
            Preset::Morse => -(n + m) * (n + a) / (2.0 * n + a) * ((n + a) / n).sqrt(),
            Preset::Scarf2Hyperbolic => {
                (n - m) * (n + 2.0 * a) / (2.0 * n + 2.0 * a) * ((2.0 * m - 1.0) / 2.0).sqrt()
            }
            Preset::Scarf1Trigonometric => -n * (n + a + b) / (2.0 * n + a + b) * jac,
            Preset::GenPoschlTeller | Preset::Row7Trigonometric | Preset::Natanzon => {
                2.0 * n * (n + a + b) / (2.0 * n + a + b) * jac
            }
        }
    }

    pub fn table_omega_c(self, w: &Weight, e: f64, m: usize) -> f64 {
        let (a, b) = w.params();
        let m = m as f64;
        let q = (4.0 * m * m - 1.0) / 8.0;
        match self {
            Preset::ShiftedOscillator => a,
            Preset::ThreeDimOscillator => b,
            Preset::Morse => 2.0 * (a * a / 4.0 + q - e).sqrt(),
            Preset::Scarf2Hyperbolic => 2.0 * (a * a + q + (2.0 * m - 1.0) * (a - 0.5) - e).sqrt(),
            Preset::Scarf1Trigonometric => {
                2.0 * ((a + b).powi(2) / 4.0 + (m - 0.5) * (a + b - 1.0) - q + e).sqrt()
            }
            Preset::GenPoschlTeller => {
                2.0 * ((a + b).powi(2) / 4.0 + q - e + (2.0 * m - 1.0) / 2.0 * (a + b - 1.0)).sqrt()
            }
            Preset::Row7Trigonometric => {
                2.0 * ((a + b).powi(2) / 4.0 + e - q + (2.0 * m - 1.0) / 2.0 * (a + b - 1.0)).sqrt()
            }
            Preset::Natanzon => {
                4.0 * ((a + b).powi(2) + q - e + 2.0 * (2.0 * m - 1.0) * (a + b - 1.0)).sqrt()
            }
        }
    }

    /// G of the catalog divided by x0 p0, as a function of x (and E for the
    /// three-dimensional oscillator).
    pub fn table_g(self, w: &Weight, x: f64, e: f64, m: usize) -> f64 {
        let (a, b) = w.params();
        let m = m as f64;
        match self {
            Preset::ShiftedOscillator => 1.0,
            Preset::ThreeDimOscillator => (a + m - 0.5) / b * (1.0 + 2.0 * e / ((a + m - 1.0) * b)),
            Preset::Morse => x * x,
            Preset::Scarf2Hyperbolic => 1.0 + x * x,
            Preset::Scarf1Trigonometric => 1.0 - (2.0 * x - 1.0).powi(2),
            Preset::GenPoschlTeller => x * x - 1.0,
            Preset::Row7Trigonometric => 1.0 - x * x,
            Preset::Natanzon => 4.0 * x * x - 1.0,
        }
    }

    /// Catalog a_n/a_0 for the two-term coherent state, evaluated as printed.
    pub fn table_an_ratio(self, w: &Weight, n: usize, k0: f64, m: usize) -> f64 {
        let f = |n: usize| self.table_an_raw(w, n, k0, m);
        f(n) / f(0)
    }

    fn table_an_raw(self, w: &Weight, n: usize, k0: f64, m: usize) -> f64 {
        let (a, b) = w.params();
        let nf = n as f64;
        let g = gamma;
        let jac = || {
            g(nf + (a + b) / 2.0)
                * (g(nf + (a + b - 1.0) / 2.0) / g(nf + (a + b + 1.0) / 2.0)).sqrt()
                / (g(nf + 1.0) * g(nf + a + 1.0) * g(nf + b + 1.0) * g(nf + a + b + 1.0)).sqrt()
        };
        match self {
            Preset::ShiftedOscillator => (k0 / a).powi(n as i32) / g(nf + 1.0).sqrt(),
            Preset::ThreeDimOscillator => {
                (-k0).powi(n as i32) / (g(nf + 1.0) * g(nf + a + 1.0)).sqrt()
            }
            Preset::Morse => {
                (2.0 * k0).powi(n as i32)
                    * g(nf + a / 2.0 + 1.0)
                    * (g(nf + a + 1.0) / g(nf + 1.0)).sqrt()
            }
            Preset::Scarf2Hyperbolic => {
                (2.0 * k0).powi(n as i32) * g(nf + 2.0 * a + 1.0)
                    / (g(nf + a + 1.0) * g(nf + m as f64 + 2.0 * a))
            }
            Preset::Scarf1Trigonometric => (-2.0 * k0).powi(n as i32) * jac(),
            Preset::GenPoschlTeller => jac(),
            Preset::Row7Trigonometric => (2.0 * k0).powi(n as i32) * jac(),
            Preset::Natanzon => (k0 / 4.0).powi(n as i32) * jac(),
        }
    }
}

/// Coordinate xi(x) with dxi = dx / sqrt(A). Catalog presets use the
/// closed forms of their x(t) maps; custom specs are pinned to xi = 0 at
/// the interval's reference point.
pub fn coordinate_map(spec: &MasterSpec, x: f64) -> Result<f64> {
    let (a, b) = spec.interval;
    if !(x > a && x < b) {
        return Err(Error::OutOfInterval { x });
    }
    if let Some(p) = spec.preset_id() {
        if p.check_params(&spec.weight).is_ok() && p.spec(0.0, 0.0).a_coeffs == spec.a_coeffs {
            return Ok(p.xi(&spec.weight, x));
        }
    }
    let r = reference_point(a, b);
    Ok(xi_antiderivative(spec.a_coeffs, x) - xi_antiderivative(spec.a_coeffs, r))
}

fn reference_point(a: f64, b: f64) -> f64 {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => 0.5 * (a + b),
        (true, false) => a + 1.0,
        (false, true) => b - 1.0,
        (false, false) => 0.0,
    }
}

/// An antiderivative of 1/sqrt(A), valid where A > 0.
pub fn xi_antiderivative(c: [f64; 3], x: f64) -> f64 {
    let [c0, c1, c2] = c;
    let a = c0 + x * (c1 + x * c2);
    if c2 == 0.0 {
        if c1 == 0.0 {
            x / c0.sqrt()
        } else {
            2.0 * a.sqrt() / c1
        }
    } else if c2 > 0.0 {
        let s = c2.sqrt();
        (2.0 * s * a.sqrt() + 2.0 * c2 * x + c1).abs().ln() / s
    } else {
        let k = -c2;
        let xc = c1 / (2.0 * k);
        let r = (xc * xc + c0 / k).sqrt();
        ((x - xc) / r).clamp(-1.0, 1.0).asin() / k.sqrt()
    }
}
