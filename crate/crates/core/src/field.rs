//! Scalar fields on the midplane used to parameterize catalog metrics and
//! director patterns. They serialize to small JSON objects such as
//! `{"quadratic": [1, 0, 0, 1, 0, 0]}`.

use serde::{Deserialize, Serialize};

use crate::jet::Jet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarSpec {
    Constant(f64),
    /// `[c, c1, c2, c11, c12, c22]`: `c + c1 x1 + c2 x2 + c11 x1^2 + c12 x1 x2 + c22 x2^2`.
    Quadratic([f64; 6]),
    /// `[a, k1, k2]`: `a exp(k1 x1 + k2 x2)`.
    ExpLinear([f64; 3]),
    /// `[amp, k1, k2, phase]`: `amp sin(k1 x1 + k2 x2 + phase)`.
    Sine([f64; 4]),
    /// Polar angle of `x'` about the origin plus a constant offset.
    PolarAngle(f64),
    Sum(Vec<ScalarSpec>),
    Product(Vec<ScalarSpec>),
}

impl ScalarSpec {
    pub fn eval_jet(&self, x1: Jet, x2: Jet) -> Jet {
        match self {
            ScalarSpec::Constant(c) => Jet::constant(*c),
            ScalarSpec::Quadratic([c, c1, c2, c11, c12, c22]) => {
                x1 * *c1 + x2 * *c2 + x1 * x1 * *c11 + x1 * x2 * *c12 + x2 * x2 * *c22 + *c
            }
            ScalarSpec::ExpLinear([a, k1, k2]) => (x1 * *k1 + x2 * *k2).exp() * *a,
            ScalarSpec::Sine([amp, k1, k2, ph]) => (x1 * *k1 + x2 * *k2 + *ph).sin() * *amp,
            ScalarSpec::PolarAngle(psi) => x2.atan2(x1) + *psi,
            ScalarSpec::Sum(terms) => terms
                .iter()
                .fold(Jet::constant(0.0), |acc, t| acc + t.eval_jet(x1, x2)),
            ScalarSpec::Product(terms) => terms
                .iter()
                .fold(Jet::constant(1.0), |acc, t| acc * t.eval_jet(x1, x2)),
        }
    }

    pub fn jet_at(&self, x1: f64, x2: f64) -> Jet {
        let (a, b) = Jet::coords(x1, x2);
        self.eval_jet(a, b)
    }

    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        self.eval_jet(Jet::constant(x1), Jet::constant(x2)).v
    }

    /// True when the field has a singularity at the origin.
    pub fn singular_at_origin(&self) -> bool {
        match self {
            ScalarSpec::PolarAngle(_) => true,
            ScalarSpec::Sum(t) | ScalarSpec::Product(t) => t.iter().any(|s| s.singular_at_origin()),
            _ => false,
        }
    }

    pub fn quadratic(c: f64, c1: f64, c2: f64, c11: f64, c12: f64, c22: f64) -> Self {
        ScalarSpec::Quadratic([c, c1, c2, c11, c12, c22])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_derivatives() {
        let f = ScalarSpec::quadratic(1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let j = f.jet_at(0.5, 0.3);
        assert_eq!(j.v, 1.25);
        assert_eq!(j.d, [1.0, 0.0]);
        assert_eq!(j.dd, [[2.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn json_round_trip() {
        let f = ScalarSpec::Sum(vec![
            ScalarSpec::PolarAngle(0.7),
            ScalarSpec::Sine([0.1, 2.0, 1.0, 0.3]),
        ]);
        let s = serde_json::to_string(&f).unwrap();
        let back: ScalarSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
        assert!(f.singular_at_origin());
        let e: ScalarSpec = serde_json::from_str(r#"{"exp_linear":[1,1,0]}"#).unwrap();
        assert!((e.value(1.0, 5.0) - 1f64.exp()).abs() < 1e-15);
    }
}
