//! Dense real polynomials stored in a shifted and scaled monomial basis.
//!
//! Coefficients refer to powers of `y = (x - center) / scale`. Picking the
//! frame from the interval keeps coefficient growth in check on finite
//! intervals; everything else is ordinary coefficient arithmetic.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub center: f64,
    pub scale: f64,
}

impl Frame {
    pub const IDENTITY: Frame = Frame {
        center: 0.0,
        scale: 1.0,
    };

    pub fn for_interval(a: f64, b: f64) -> Frame {
        match (a.is_finite(), b.is_finite()) {
            (true, true) => Frame {
                center: 0.5 * (a + b),
                scale: 0.5 * (b - a),
            },
            (true, false) => Frame {
                center: a,
                scale: 1.0,
            },
            (false, true) => Frame {
                center: b,
                scale: 1.0,
            },
            (false, false) => Frame::IDENTITY,
        }
    }

    #[inline]
    pub fn to_y(&self, x: f64) -> f64 {
        (x - self.center) / self.scale
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    frame: Frame,
    c: Vec<f64>,
}

impl Poly {
    pub fn zero(frame: Frame) -> Self {
        Poly {
            frame,
            c: vec![0.0],
        }
    }

    pub fn constant(frame: Frame, v: f64) -> Self {
        Poly { frame, c: vec![v] }
    }

    /// The identity map `x` expressed in the frame.
    pub fn x(frame: Frame) -> Self {
        Poly {
            frame,
            c: vec![frame.center, frame.scale],
        }
    }

    /// Builds from coefficients of plain powers of x.
    pub fn from_x_coeffs(frame: Frame, coeffs: &[f64]) -> Self {
        let xp = Poly::x(frame);
        let mut p = Poly::zero(frame);
        for &a in coeffs.iter().rev() {
            p = p.mul(&xp).add(&Poly::constant(frame, a));
        }
        p.trim()
    }

    pub fn from_y_coeffs(frame: Frame, c: Vec<f64>) -> Self {
        let c = if c.is_empty() { vec![0.0] } else { c };
        Poly { frame, c }.trim()
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn y_coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    fn trim(mut self) -> Self {
        while self.c.len() > 1 && *self.c.last().unwrap() == 0.0 {
            self.c.pop();
        }
        self
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.c.len().max(o.c.len());
        let mut c = vec![0.0; n];
        for (i, v) in self.c.iter().enumerate() {
            c[i] += v;
        }
        for (i, v) in o.c.iter().enumerate() {
            c[i] += v;
        }
        Poly {
            frame: self.frame,
            c,
        }
        .trim()
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly {
            frame: self.frame,
            c: self.c.iter().map(|v| v * s).collect(),
        }
        .trim()
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut c = vec![0.0; self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly {
            frame: self.frame,
            c,
        }
        .trim()
    }

    /// d/dx (not d/dy).
    pub fn deriv(&self) -> Poly {
        if self.c.len() == 1 {
            return Poly::zero(self.frame);
        }
        let s = 1.0 / self.frame.scale;
        let c = self
            .c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, v)| k as f64 * v * s)
            .collect();
        Poly {
            frame: self.frame,
            c,
        }
        .trim()
    }

    pub fn deriv_n(&self, k: usize) -> Poly {
        (0..k).fold(self.clone(), |p, _| p.deriv())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let y = self.frame.to_y(x);
        self.c.iter().rev().fold(0.0, |acc, v| acc * y + v)
    }

    /// Returns `(sign, ln|p(x)|)`; safe for large arguments.
    pub fn eval_log(&self, x: f64) -> (f64, f64) {
        let y = self.frame.to_y(x);
        let d = self.degree();
        if y.abs() <= 1.0 || d == 0 {
            let v = self.eval(x);
            return (v.signum(), v.abs().ln());
        }
        let u = 1.0 / y;
        let s = self.c.iter().fold(0.0, |acc, v| acc * u + v);
        let sign = if d % 2 == 1 && y < 0.0 {
            -s.signum()
        } else {
            s.signum()
        };
        (sign, s.abs().ln() + d as f64 * y.abs().ln())
    }

    /// Coefficient of x^deg.
    pub fn leading_x(&self) -> f64 {
        let d = self.degree();
        self.c[d] / self.frame.scale.powi(d as i32)
    }

    /// Coefficients in plain powers of x.
    pub fn to_x_coeffs(&self) -> Vec<f64> {
        let f = self.frame;
        let y = Poly {
            frame: Frame::IDENTITY,
            c: vec![-f.center / f.scale, 1.0 / f.scale],
        };
        let mut p = Poly::zero(Frame::IDENTITY);
        for &a in self.c.iter().rev() {
            p = p.mul(&y).add(&Poly::constant(Frame::IDENTITY, a));
        }
        let mut out = p.c;
        out.resize(self.c.len(), 0.0);
        out
    }
}
