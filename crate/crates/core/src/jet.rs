//! Second-order forward-mode derivatives in the two midplane coordinates.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to `(x1, x2)`. Catalog metrics and director fields are written once
//! as ordinary arithmetic on jets, which yields exact first and second
//! derivatives for the curvature pipeline.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; 2],
    pub dd: [[f64; 2]; 2],
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet { v, d: [0.0; 2], dd: [[0.0; 2]; 2] }
    }

    /// The coordinate function `x_{axis}` evaluated at `value`.
    pub fn var(value: f64, axis: usize) -> Self {
        let mut d = [0.0; 2];
        d[axis] = 1.0;
        Jet { v: value, d, dd: [[0.0; 2]; 2] }
    }

    /// Both coordinate jets at a point.
    pub fn coords(x1: f64, x2: f64) -> (Jet, Jet) {
        (Jet::var(x1, 0), Jet::var(x2, 1))
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    #[inline]
    pub fn chain(self, f: f64, f1: f64, f2: f64) -> Jet {
        let mut out = Jet::constant(f);
        for a in 0..2 {
            out.d[a] = f1 * self.d[a];
            for b in 0..2 {
                out.dd[a][b] = f2 * self.d[a] * self.d[b] + f1 * self.dd[a][b];
            }
        }
        out
    }

    pub fn sin(self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Jet {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Jet {
        let x = self.v;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn sqrt(self) -> Jet {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn powf(self, p: f64) -> Jet {
        let x = self.v;
        self.chain(x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
    }

    pub fn powi(self, n: i32) -> Jet {
        let x = self.v;
        let nf = n as f64;
        self.chain(x.powi(n), nf * x.powi(n - 1), nf * (nf - 1.0) * x.powi(n - 2))
    }

    pub fn recip(self) -> Jet {
        let x = self.v;
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    /// `atan2(self, x)`, the polar angle of the point `(x, self)`.
    pub fn atan2(self, x: Jet) -> Jet {
        // d atan2(y, x) = (x dy - y dx) / r^2
        let y = self;
        let r2 = x * x + y * y;
        let mut out = Jet::constant(y.v.atan2(x.v));
        let inv = 1.0 / r2.v;
        for a in 0..2 {
            out.d[a] = (x.v * y.d[a] - y.v * x.d[a]) * inv;
        }
        for a in 0..2 {
            for b in 0..2 {
                // derivative of (x y_a - y x_a) / r2 along b
                let n_b = x.d[b] * y.d[a] + x.v * y.dd[a][b] - y.d[b] * x.d[a] - y.v * x.dd[a][b];
                let n = x.v * y.d[a] - y.v * x.d[a];
                out.dd[a][b] = n_b * inv - n * r2.d[b] * inv * inv;
            }
        }
        out
    }

    pub fn laplacian(&self) -> f64 {
        self.dd[0][0] + self.dd[1][1]
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut r = self;
        r.v += o.v;
        for a in 0..2 {
            r.d[a] += o.d[a];
            for b in 0..2 {
                r.dd[a][b] += o.dd[a][b];
            }
        }
        r
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut r = Jet::constant(self.v * o.v);
        for a in 0..2 {
            r.d[a] = self.d[a] * o.v + self.v * o.d[a];
            for b in 0..2 {
                r.dd[a][b] = self.dd[a][b] * o.v
                    + self.d[a] * o.d[b]
                    + self.d[b] * o.d[a]
                    + self.v * o.dd[a][b];
            }
        }
        r
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, o: f64) -> Jet {
        let mut r = self;
        r.v += o;
        r
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, o: f64) -> Jet {
        self + (-o)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        let mut r = self;
        r.v *= s;
        for a in 0..2 {
            r.d[a] *= s;
            for b in 0..2 {
                r.dd[a][b] *= s;
            }
        }
        r
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, s: f64) -> Jet {
        self * (1.0 / s)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        o + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        -o + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        o * self
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        o.recip() * self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(Jet, Jet) -> Jet, x1: f64, x2: f64) {
        let (a, b) = Jet::coords(x1, x2);
        let j = f(a, b);
        let h = 1e-5;
        let val = |p: f64, q: f64| f(Jet::constant(p), Jet::constant(q)).v;
        let gx = (val(x1 + h, x2) - val(x1 - h, x2)) / (2.0 * h);
        let gy = (val(x1, x2 + h) - val(x1, x2 - h)) / (2.0 * h);
        assert!((j.d[0] - gx).abs() < 1e-7 * (1.0 + gx.abs()), "{} vs {}", j.d[0], gx);
        assert!((j.d[1] - gy).abs() < 1e-7 * (1.0 + gy.abs()));
        let dfd = |p: f64, q: f64, ax: usize| {
            let (a, b) = Jet::coords(p, q);
            f(a, b).d[ax]
        };
        for ax in 0..2 {
            let hxx = (dfd(x1 + h, x2, ax) - dfd(x1 - h, x2, ax)) / (2.0 * h);
            let hxy = (dfd(x1, x2 + h, ax) - dfd(x1, x2 - h, ax)) / (2.0 * h);
            assert!((j.dd[ax][0] - hxx).abs() < 1e-6 * (1.0 + hxx.abs()));
            assert!((j.dd[ax][1] - hxy).abs() < 1e-6 * (1.0 + hxy.abs()));
        }
    }

    #[test]
    fn elementary_functions_match_finite_differences() {
        fd_check(|a, b| a * b * b + a.sin() * b.exp(), 0.3, 0.7);
        fd_check(|a, b| (a * a + b * b + 1.0).sqrt() / (1.0 + a), 0.4, -0.2);
        fd_check(|a, b| b.atan2(a), 0.8, 0.6);
        fd_check(|a, b| (a * b).cos().powf(2.5) + (2.0 + a).ln(), 0.8, 0.6);
        fd_check(|a, b| (a - b).powi(3) * b.recip(), 1.3, 0.6);
    }

    #[test]
    fn hessian_is_symmetric() {
        let (a, b) = Jet::coords(0.9, 1.1);
        let j = (a * b).sin() * b.atan2(a) + a.exp() / b;
        assert!((j.dd[0][1] - j.dd[1][0]).abs() < 1e-14);
    }
}
