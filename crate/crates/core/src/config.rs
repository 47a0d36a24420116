//! Run configurations for the command-line tool. Every struct rejects unknown keys.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bending::{MinimizeOptions, Seed};
use crate::catalog;
use crate::diffgeo::Thresholds;
use crate::effective::IsotropicModuli;
use crate::error::{Error, Result};
use crate::metric::{Grid2, MetricField, Rect, SampledMetric};
use crate::nematic::DirectorField;
use crate::scaling::{DensityKind, QuadOrders};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogMetric {
    pub catalog: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Rect>,
}

/// Row-major 3×3 samples on the nodes of `grid` (node index `j·nx + i`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledMetricSpec {
    pub samples: Vec<[[f64; 3]; 3]>,
    pub grid: GridSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Catalog(CatalogMetric),
    Sampled(SampledMetricSpec),
}

impl MetricSpec {
    pub fn catalog(name: &str) -> Self {
        MetricSpec::Catalog(CatalogMetric { catalog: name.to_string(), params: Value::Null, domain: None })
    }

    pub fn catalog_name(&self) -> Option<&str> {
        match self {
            MetricSpec::Catalog(c) => Some(&c.catalog),
            MetricSpec::Sampled(_) => None,
        }
    }

    pub fn build(&self) -> Result<MetricField> {
        match self {
            MetricSpec::Catalog(c) => catalog::build(&c.catalog, &c.params, c.domain),
            MetricSpec::Sampled(s) => {
                let domain = s.grid.domain.ok_or_else(|| Error::validation("sampled metric grid needs a domain"))?;
                let grid = s.grid.resolve(domain, 0)?;
                let samples = s
                    .samples
                    .iter()
                    .map(|m| [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]])
                    .collect();
                Ok(MetricField::sampled("sampled", SampledMetric::new(grid, samples)?))
            }
        }
    }
}

/// Grid request; missing counts fall back to `n`, then to the caller's default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Rect>,
}

impl GridSpec {
    pub fn resolve(&self, default_domain: Rect, default_n: usize) -> Result<Grid2> {
        let rect = self.domain.unwrap_or(default_domain);
        let pick = |v: Option<usize>| v.or(self.n).unwrap_or(default_n);
        Grid2::new(rect, pick(self.nx), pick(self.ny))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub metric: MetricSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Q2Config {
    pub metric: MetricSpec,
    pub point: [f64; 2],
    /// Row-major in-plane strain.
    pub f: [[f64; 2]; 2],
    #[serde(default)]
    pub moduli: IsotropicModuli,
    /// Optional anisotropic form in the orthonormal symmetric basis; overrides `moduli`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic_form: Option<[[f64; 6]; 6]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BendConfig {
    pub metric: MetricSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub moduli: IsotropicModuli,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_shape: Option<Seed>,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Evaluate the seed without optimizing.
    #[serde(default)]
    pub evaluate_only: bool,
}

/// Partial [`MinimizeOptions`]; absent fields keep their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refresh: Option<usize>,
}

impl OptimizerConfig {
    pub fn resolve(&self) -> MinimizeOptions {
        let d = MinimizeOptions::default();
        MinimizeOptions {
            schedule: self.schedule.clone().unwrap_or(d.schedule),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            gtol: self.gtol.unwrap_or(d.gtol),
            memory: self.memory.unwrap_or(d.memory),
            refresh: self.refresh.unwrap_or(d.refresh),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ansatz {
    Koko,
    Ciag,
    Kirchhoff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub metric: MetricSpec,
    pub ansatz: Ansatz,
    #[serde(default)]
    pub density: DensityKind,
    #[serde(default)]
    pub moduli: IsotropicModuli,
    /// Thicknesses, strictly decreasing; defaults to `2^-3 … 2^-8`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<QuadOrders>,
    /// Midplane grid of the Kirchhoff recovery.
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_shape: Option<Seed>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NematicConfig {
    #[serde(default = "default_director")]
    pub director: DirectorField,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub moduli: IsotropicModuli,
}

fn default_director() -> DirectorField {
    serde_json::from_value(Value::Object(Default::default())).expect("default director parameters are valid")
}

/// Suggested immersion seed for a catalog metric.
pub fn suggested_seed(metric: &MetricSpec) -> Seed {
    match metric.catalog_name() {
        Some("ex63iii") => Seed::Cylinder,
        Some("ex64") => Seed::Paraboloid,
        _ => Seed::Flat,
    }
}

/// Deserializes a config value, mapping failures to validation errors.
pub fn parse<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::validation(format!("invalid config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse::<ClassifyConfig>(json!({"metric": {"catalog": "ex61"}, "gird": {}})).is_err());
        assert!(parse::<ClassifyConfig>(json!({"metric": {"catalog": "ex61", "parms": {}}})).is_err());
        assert!(parse::<ClassifyConfig>(json!({"metric": {"catalog": "ex61"}})).is_ok());
    }

    #[test]
    fn sampled_metric_round_trip() {
        let grid = json!({"nx": 5, "ny": 5, "domain": {"x1": [0.0, 1.0], "x2": [0.0, 1.0]}});
        let eye = json!([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]);
        let cfg = json!({"metric": {"samples": vec![eye; 25], "grid": grid}});
        let c: ClassifyConfig = parse(cfg).unwrap();
        let m = c.metric.build().unwrap();
        assert_eq!(m.g(crate::metric::Point2::new(0.3, 0.6))[(2, 2)], 2.0);
        let back: ClassifyConfig = parse(serde_json::to_value(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn nematic_defaults() {
        let c: NematicConfig = parse(json!({})).unwrap();
        assert_eq!(c.director.r, DirectorField::DEFAULT_R);
        assert!((c.director.delta + 0.5).abs() < 1e-15);
    }
}
