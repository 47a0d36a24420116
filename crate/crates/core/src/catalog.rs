//! Builtin example metrics.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::field::ScalarSpec;
use crate::jet::Jet;
use crate::metric::{Grid2, JetMatrix, MetricField, Rect};
use crate::nematic::DirectorField;

/// Domain used by the catalog when the caller does not supply one.
pub fn default_domain(name: &str) -> Rect {
    match name {
        "ex64" => Rect { x1: [1.2, 2.2], x2: [0.1, 1.1] },
        "nematic" => Rect { x1: [0.5, 1.5], x2: [0.5, 1.5] },
        _ => Rect::UNIT,
    }
}

pub const NAMES: &[&str] = &["identity", "ex61", "ex62", "ex63", "ex63ii", "ex63iii", "ex64", "nematic"];

fn zero() -> Jet {
    Jet::constant(0.0)
}

fn one() -> Jet {
    Jet::constant(1.0)
}

pub fn identity(domain: Rect) -> MetricField {
    MetricField::analytic("identity", domain, |_, _| {
        let (o, z) = (one(), zero());
        [[o, z, z], [z, o, z], [z, z, o]]
    })
}

/// `diag(1, 1, λ)`.
pub fn ex61(lambda: ScalarSpec, domain: Rect) -> Result<MetricField> {
    let m = MetricField::analytic("ex61", domain, move |x1, x2| {
        let (o, z) = (one(), zero());
        [[o, z, z], [z, o, z], [z, z, lambda.eval_jet(x1, x2)]]
    });
    probe(m)
}

/// `λ Id`.
pub fn ex62(lambda: ScalarSpec, domain: Rect) -> Result<MetricField> {
    let m = MetricField::analytic("ex62", domain, move |x1, x2| {
        let l = lambda.eval_jet(x1, x2);
        let z = zero();
        [[l, z, z], [z, l, z], [z, z, l]]
    });
    probe(m)
}

/// Identity in-plane block with off-diagonal `(λ1, λ2)` and `G33 = λ3`.
pub fn ex63(l1: ScalarSpec, l2: ScalarSpec, l3: ScalarSpec, domain: Rect) -> Result<MetricField> {
    let m = MetricField::analytic("ex63", domain, move |x1, x2| {
        let (o, z) = (one(), zero());
        let a = l1.eval_jet(x1, x2);
        let b = l2.eval_jet(x1, x2);
        [[o, z, a], [z, o, b], [a, b, l3.eval_jet(x1, x2)]]
    });
    probe(m)
}

/// `λ1 = 0`, `λ3 = λ2^2 + 1`.
pub fn ex63ii(l2: ScalarSpec, domain: Rect) -> Result<MetricField> {
    let m = MetricField::analytic("ex63ii", domain, move |x1, x2| {
        let (o, z) = (one(), zero());
        let b = l2.eval_jet(x1, x2);
        [[o, z, z], [z, o, b], [z, b, b * b + 1.0]]
    });
    probe(m)
}

/// `λ2 = -x2`, metric of a cylinder-compatible zero-bending example.
pub fn ex63iii(domain: Rect) -> Result<MetricField> {
    let m = MetricField::analytic("ex63iii", domain, |_x1, x2| {
        let (o, z) = (one(), zero());
        let b = -x2;
        [[o, z, z], [z, o, b], [z, b, x2 * x2 + 1.0]]
    });
    probe(m)
}

/// Vector `b` completing the paraboloid frame of [`ex64`].
pub fn ex64_b(x1: Jet, x2: Jet) -> [Jet; 3] {
    [x1.powi(3) * (-1.0 / 3.0), x2.powi(3) * (1.0 / 3.0), (x1 * x1 - x2 * x2) * 0.5]
}

/// `G = QᵀQ` with `Q = [∂1y, ∂2y, b]` and `y` the paraboloid `(x1, x2, |x'|^2 / 2)`.
pub fn ex64(domain: Rect) -> Result<MetricField> {
    let m = MetricField::analytic("ex64", domain, |x1, x2| {
        let b = ex64_b(x1, x2);
        let g11 = x1 * x1 + 1.0;
        let g12 = x1 * x2;
        let g22 = x2 * x2 + 1.0;
        let g13 = b[0] + x1 * b[2];
        let g23 = b[1] + x2 * b[2];
        let g33 = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
        [[g11, g12, g13], [g12, g22, g23], [g13, g23, g33]]
    });
    probe(m)
}

pub fn nematic(director: &DirectorField, domain: Rect) -> Result<MetricField> {
    director.validate_domain(&domain)?;
    let d = director.clone();
    let m = MetricField::analytic("nematic", domain, move |x1, x2| d.metric_jet(x1, x2));
    probe(m)
}

/// Checks SPD on a probe grid so bad parameters fail at construction time.
fn probe(m: MetricField) -> Result<MetricField> {
    let grid = Grid2::square(m.domain, 9)?;
    m.validate_on(&grid)?;
    Ok(m)
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct LambdaParams {
    lambda: Option<ScalarSpec>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Ex63Params {
    lambda1: Option<ScalarSpec>,
    lambda2: Option<ScalarSpec>,
    lambda3: Option<ScalarSpec>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Lambda2Params {
    lambda2: Option<ScalarSpec>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

pub fn ex61_default_lambda() -> ScalarSpec {
    ScalarSpec::quadratic(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

pub fn ex62_default_lambda() -> ScalarSpec {
    ScalarSpec::ExpLinear([1.0, 1.0, 0.0])
}

pub fn ex63ii_default_lambda2() -> ScalarSpec {
    ScalarSpec::quadratic(0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

fn parse<T: for<'de> Deserialize<'de>>(name: &str, params: &Value) -> Result<T> {
    let v = if params.is_null() { Value::Object(Default::default()) } else { params.clone() };
    serde_json::from_value(v).map_err(|e| Error::validation(format!("params for '{name}': {e}")))
}

/// Builds a catalog metric from its name and JSON parameters.
pub fn build(name: &str, params: &Value, domain: Option<Rect>) -> Result<MetricField> {
    let domain = domain.unwrap_or_else(|| default_domain(name));
    domain.validate()?;
    match name {
        "identity" => {
            parse::<NoParams>(name, params)?;
            Ok(identity(domain))
        }
        "ex61" => {
            let p: LambdaParams = parse(name, params)?;
            ex61(p.lambda.unwrap_or_else(ex61_default_lambda), domain)
        }
        "ex62" => {
            let p: LambdaParams = parse(name, params)?;
            ex62(p.lambda.unwrap_or_else(ex62_default_lambda), domain)
        }
        "ex63" => {
            let p: Ex63Params = parse(name, params)?;
            ex63(
                p.lambda1.unwrap_or(ScalarSpec::Constant(0.0)),
                p.lambda2.unwrap_or(ScalarSpec::Constant(0.0)),
                p.lambda3.unwrap_or(ScalarSpec::Constant(1.0)),
                domain,
            )
        }
        "ex63ii" => {
            let p: Lambda2Params = parse(name, params)?;
            ex63ii(p.lambda2.unwrap_or_else(ex63ii_default_lambda2), domain)
        }
        "ex63iii" => {
            parse::<NoParams>(name, params)?;
            ex63iii(domain)
        }
        "ex64" => {
            parse::<NoParams>(name, params)?;
            ex64(domain)
        }
        "nematic" => {
            let d: DirectorField = parse(name, params)?;
            d.validate()?;
            nematic(&d, domain)
        }
        other => Err(Error::validation(format!(
            "unknown catalog metric '{other}' (expected one of {})",
            NAMES.join(", ")
        ))),
    }
}

/// `λ` field of a catalog metric built from `ex61`/`ex62` parameters.
pub fn lambda_param(name: &str, params: &Value) -> Result<ScalarSpec> {
    let p: LambdaParams = parse(name, params)?;
    Ok(match name {
        "ex61" => p.lambda.unwrap_or_else(ex61_default_lambda),
        "ex62" => p.lambda.unwrap_or_else(ex62_default_lambda),
        _ => return Err(Error::validation(format!("metric '{name}' has no scalar λ parameter"))),
    })
}

/// Gram matrix `QᵀQ` of three columns given as jets.
pub fn gram(cols: [[Jet; 3]; 3]) -> JetMatrix {
    let mut g = [[zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = cols[i][0] * cols[j][0] + cols[i][1] * cols[j][1] + cols[i][2] * cols[j][2];
        }
    }
    g
}
