//! Command-line front end: argument parsing, config assembly, dispatch and output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::{Matrix2, Matrix6};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::bending::{minimize_bending, BendingProblem, Immersion};
use crate::config::{self, Ansatz, BendConfig, ClassifyConfig, NematicConfig, Q2Config, ScaleConfig};
use crate::diffgeo::CurvatureField;
use crate::effective::{q2_isotropic_closed, EffectiveDensityContext, QuadraticForm3};
use crate::error::{Error, Result};
use crate::metric::Point2;
use crate::nematic::nematic_classify;
use crate::scaling::{
    dyadic_thicknesses, fit_scaling, sweep, CiagRecovery, Deformation3, DensityW, KirchhoffRecovery, KokoRecovery,
    QuadOrders,
};
use crate::{catalog, metric::Grid2};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "prestrain", version, about = "Curvature, bending and energy-scaling analysis of prestrained plates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config for the subcommand; inline flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for the JSON report and CSV tables.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "PRESTRAIN_THREADS")]
    pub threads: Option<usize>,
    /// Seed for the noise added to immersion seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct MetricArgs {
    /// Catalog metric name.
    #[arg(long)]
    pub catalog: Option<String>,
    /// Catalog parameters as a JSON object.
    #[arg(long)]
    pub params: Option<String>,
    /// Grid nodes per axis.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Curvature invariants and regime classification.
    Classify {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long)]
        rel: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Effective 2D quadratic form at one point.
    Q2 {
        #[command(flatten)]
        metric: MetricArgs,
        /// `x1,x2`
        #[arg(long, value_delimiter = ',')]
        point: Option<Vec<f64>>,
        /// `f11,f12,f21,f22`
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        f: Option<Vec<f64>>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Evaluate and minimize the bending functional.
    Bend {
        #[command(flatten)]
        metric: MetricArgs,
        /// flat, cylinder or paraboloid.
        #[arg(long)]
        seed_shape: Option<String>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Comma-separated penalty parameters.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<f64>>,
        #[arg(long)]
        evaluate_only: bool,
    },
    /// Thin-plate energy of a recovery sequence and its scaling exponent.
    Scale {
        #[command(flatten)]
        metric: MetricArgs,
        /// koko, ciag or kirchhoff.
        #[arg(long)]
        ansatz: Option<String>,
        /// GREEN_QUADRATIC or DIST_SQ_SO3.
        #[arg(long)]
        density: Option<String>,
        /// Comma-separated thicknesses.
        #[arg(long, value_delimiter = ',')]
        h: Option<Vec<f64>>,
    },
    /// Flatness test and effective forms for nematic director metrics.
    Nematic {
        /// radial, azimuthal or spiral.
        #[arg(long)]
        pattern: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        psi: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify { .. } => "classify",
            Command::Q2 { .. } => "q2",
            Command::Bend { .. } => "bend",
            Command::Scale { .. } => "scale",
            Command::Nematic { .. } => "nematic",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub subcommand: String,
    pub inputs_hash: String,
    pub results: Value,
    pub wall_time_s: f64,
    pub version: String,
}

impl RunReport {
    /// Parses a report and checks its schema fields.
    pub fn from_json(s: &str) -> Result<Self> {
        let r: RunReport = serde_json::from_str(s)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(format!("unsupported schema version {}", r.schema_version)));
        }
        if !["classify", "q2", "bend", "scale", "nematic"].contains(&r.subcommand.as_str()) {
            return Err(Error::validation(format!("unknown subcommand '{}'", r.subcommand)));
        }
        if r.inputs_hash.len() != 64 || !r.inputs_hash.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(Error::validation("inputs_hash is not a sha256 hex digest"));
        }
        if !r.results.is_object() || !(r.wall_time_s >= 0.0) {
            return Err(Error::validation("malformed results or wall time"));
        }
        Ok(r)
    }
}

/// A finished run: the report plus named CSV tables.
#[derive(Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub tables: Vec<(String, String)>,
}

fn set(obj: &mut Value, path: &[&str], v: Value) {
    let mut cur = obj;
    for key in &path[..path.len() - 1] {
        let map = cur.as_object_mut().expect("config nodes are objects");
        cur = map.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
        if !cur.is_object() {
            *cur = Value::Object(Map::new());
        }
    }
    cur.as_object_mut()
        .expect("config nodes are objects")
        .insert(path[path.len() - 1].to_string(), v);
}

fn apply_metric_args(cfg: &mut Value, m: &MetricArgs) -> Result<()> {
    if let Some(name) = &m.catalog {
        let keep = cfg.get("metric").and_then(|v| v.get("catalog")).and_then(Value::as_str) == Some(name.as_str());
        if !keep {
            set(cfg, &["metric"], json!({ "catalog": name }));
        }
    }
    if let Some(p) = &m.params {
        let v: Value = serde_json::from_str(p).map_err(|e| Error::validation(format!("--params is not JSON: {e}")))?;
        set(cfg, &["metric", "params"], v);
    }
    if let Some(n) = m.n {
        set(cfg, &["grid", "n"], json!(n));
    }
    Ok(())
}

/// Merges the config file (if any) with inline flags.
pub fn assemble_config(cli: &Cli) -> Result<Value> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::validation(format!("cannot read config {}: {e}", path.display())))?;
            let v: Value =
                serde_json::from_str(&text).map_err(|e| Error::validation(format!("config is not valid JSON: {e}")))?;
            if !v.is_object() {
                return Err(Error::validation("config must be a JSON object"));
            }
            v
        }
        None => Value::Object(Map::new()),
    };
    match &cli.command {
        Command::Classify { metric, rel, tau } => {
            apply_metric_args(&mut cfg, metric)?;
            if let Some(r) = rel {
                set(&mut cfg, &["thresholds", "rel"], json!(r));
            }
            if let Some(t) = tau {
                set(&mut cfg, &["thresholds", "tau"], json!(t));
            }
        }
        Command::Q2 { metric, point, f, mu, lambda } => {
            apply_metric_args(&mut cfg, metric)?;
            if let Some(p) = point {
                set(&mut cfg, &["point"], json!(p));
            }
            if let Some(f) = f {
                if f.len() != 4 {
                    return Err(Error::validation("--f needs four entries f11,f12,f21,f22"));
                }
                set(&mut cfg, &["f"], json!([[f[0], f[1]], [f[2], f[3]]]));
            }
            if let Some(m) = mu {
                set(&mut cfg, &["moduli", "mu"], json!(m));
            }
            if let Some(l) = lambda {
                set(&mut cfg, &["moduli", "lambda"], json!(l));
            }
            if cfg.get("moduli").is_some() {
                let m = cfg["moduli"].as_object_mut().expect("object");
                m.entry("mu").or_insert(json!(1.0));
                m.entry("lambda").or_insert(json!(1.0));
            }
        }
        Command::Bend { metric, seed_shape, noise, max_iter, schedule, evaluate_only } => {
            apply_metric_args(&mut cfg, metric)?;
            if let Some(s) = seed_shape {
                set(&mut cfg, &["seed_shape"], json!(s));
            }
            if let Some(a) = noise {
                set(&mut cfg, &["noise"], json!(a));
            }
            if let Some(m) = max_iter {
                set(&mut cfg, &["optimizer", "max_iter"], json!(m));
            }
            if let Some(s) = schedule {
                set(&mut cfg, &["optimizer", "schedule"], json!(s));
            }
            if *evaluate_only {
                set(&mut cfg, &["evaluate_only"], json!(true));
            }
            if let Some(s) = cli.seed {
                set(&mut cfg, &["rng_seed"], json!(s));
            }
        }
        Command::Scale { metric, ansatz, density, h } => {
            apply_metric_args(&mut cfg, metric)?;
            if let Some(a) = ansatz {
                set(&mut cfg, &["ansatz"], json!(a));
            }
            if let Some(d) = density {
                set(&mut cfg, &["density"], json!(d));
            }
            if let Some(h) = h {
                set(&mut cfg, &["h"], json!(h));
            }
        }
        Command::Nematic { pattern, psi, r, nu, delta, n } => {
            match (pattern.as_deref(), psi) {
                (Some("spiral"), p) => set(&mut cfg, &["director", "pattern"], json!({ "spiral": { "psi": p.unwrap_or(0.7) } })),
                (Some(other), None) => set(&mut cfg, &["director", "pattern"], json!(other)),
                (None, Some(p)) => set(&mut cfg, &["director", "pattern"], json!({ "spiral": { "psi": p } })),
                (Some(other), Some(_)) => {
                    return Err(Error::validation(format!("--psi only applies to the spiral pattern, not '{other}'")))
                }
                (None, None) => {}
            }
            if let Some(r) = r {
                set(&mut cfg, &["director", "r"], json!(r));
            }
            if let Some(v) = nu {
                set(&mut cfg, &["director", "nu"], json!(v));
            }
            if let Some(d) = delta {
                set(&mut cfg, &["director", "delta"], json!(d));
            }
            if let Some(n) = n {
                set(&mut cfg, &["grid", "n"], json!(n));
            }
        }
    }
    Ok(cfg)
}

fn hash_inputs<T: Serialize>(name: &str, cfg: &T) -> Result<String> {
    let canonical = serde_json::to_string(&json!({ "subcommand": name, "config": cfg }))?;
    Ok(Sha256::digest(canonical.as_bytes()).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.into_iter().map(real).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

fn run_classify(cfg: &ClassifyConfig) -> Result<(Value, Vec<(String, String)>)> {
    let m = cfg.metric.build()?;
    let grid = cfg.grid.resolve(m.domain, 65)?;
    let field = CurvatureField::compute(&m, &grid)?;
    let verdict = field.classify(&cfg.thresholds);
    let rows = field.nodes.iter().map(|r| vec![r.p.x1, r.p.x2, r.triple[0], r.triple[1], r.triple[2], r.scalar, r.kappa2d]);
    let table = csv(&["x1", "x2", "R3_112", "R3_221", "R_1212", "S", "kappa"], rows);
    Ok((json!({ "metric": m.label, "grid": grid_json(&grid), "verdict": verdict }), vec![("classify_nodes.csv".into(), table)]))
}

fn grid_json(g: &Grid2) -> Value {
    json!({ "nx": g.nx, "ny": g.ny, "domain": g.rect })
}

fn run_q2(cfg: &Q2Config) -> Result<(Value, Vec<(String, String)>)> {
    let m = cfg.metric.build()?;
    let p = Point2::new(cfg.point[0], cfg.point[1]);
    if !m.domain.contains(p) {
        return Err(Error::validation(format!("point ({}, {}) lies outside the metric domain", p.x1, p.x2)));
    }
    let g = m.g(p);
    let f = Matrix2::new(cfg.f[0][0], cfg.f[0][1], cfg.f[1][0], cfg.f[1][1]);
    if !f.iter().all(|v| v.is_finite()) {
        return Err(Error::validation("F must be finite"));
    }
    let qf = match &cfg.quadratic_form {
        Some(rows) => QuadraticForm3::general(Matrix6::from_fn(|i, j| rows[i][j]))?,
        None => QuadraticForm3::isotropic(cfg.moduli.mu, cfg.moduli.lambda)?,
    };
    let ctx = EffectiveDensityContext::new(&g, &qf)?;
    let c0 = ctx.minimizer_c0(&f);
    let (c_direct, q_direct) = ctx.minimize_directly(&f)?;
    let mut res = json!({
        "metric": m.label,
        "point": cfg.point,
        "q2_general": ctx.q2_general(&f),
        "q2_oracle": q_direct,
        "c0": [c0.x, c0.y, c0.z],
        "c_oracle": [c_direct.x, c_direct.y, c_direct.z],
        "stationarity_residual": ctx.stationarity_residual(&f, &c0),
    });
    if let Some(moduli) = qf.moduli() {
        let closed = q2_isotropic_closed(&g, &moduli, &f)?;
        res["closed_forms"] = json!({ "via_d": closed.via_d, "via_minor": closed.via_minor, "via_c": closed.via_c });
    }
    Ok((res, vec![]))
}

fn run_bend(cfg: &BendConfig) -> Result<(Value, Vec<(String, String)>)> {
    if !(cfg.noise.is_finite() && cfg.noise >= 0.0) {
        return Err(Error::validation("noise must be a non-negative number"));
    }
    let m = cfg.metric.build()?;
    let grid = cfg.grid.resolve(m.domain, 33)?;
    let qf = QuadraticForm3::isotropic(cfg.moduli.mu, cfg.moduli.lambda)?;
    let opts = cfg.optimizer.resolve();
    opts.validate()?;
    let problem = BendingProblem::new(&m, &qf, &grid)?;
    let shape = cfg.seed_shape.unwrap_or_else(|| config::suggested_seed(&cfg.metric));
    let y0 = Immersion::seeded(grid, shape).with_noise(cfg.noise, cfg.rng_seed);
    let initial = problem.energy(&y0)?;
    let (imm, fin, stages) = if cfg.evaluate_only {
        (y0, initial.clone(), vec![])
    } else {
        let r = minimize_bending(&problem, &y0, &opts)?;
        (r.immersion, r.result, r.stages)
    };
    let rows = (0..grid.len()).map(|k| {
        let p = grid.point(k);
        let y = imm.y[k];
        vec![p.x1, p.x2, y.x, y.y, y.z]
    });
    let table = csv(&["x1", "x2", "y1", "y2", "y3"], rows);
    let res = json!({
        "metric": m.label,
        "grid": grid_json(&grid),
        "seed_shape": shape,
        "initial": initial,
        "final": fin,
        "stages": stages,
        "optimizer": opts,
    });
    Ok((res, vec![("immersion.csv".into(), table)]))
}

fn run_scale(cfg: &ScaleConfig) -> Result<(Value, Vec<(String, String)>)> {
    let m = cfg.metric.build()?;
    let w = DensityW::new(cfg.density, cfg.moduli)?;
    let hs = cfg.h.clone().unwrap_or_else(|| dyadic_thicknesses(3, 8));
    if hs.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::validation("thicknesses must be positive"));
    }
    let lambda_for = |expected: &str| -> Result<crate::field::ScalarSpec> {
        match &cfg.metric {
            config::MetricSpec::Catalog(c) if c.catalog == expected => catalog::lambda_param(expected, &c.params),
            _ => Err(Error::validation(format!(
                "ansatz '{}' needs the catalog metric '{expected}'",
                serde_json::to_value(cfg.ansatz)?.as_str().unwrap_or_default()
            ))),
        }
    };
    let (u, quad): (Box<dyn Deformation3>, QuadOrders) = match cfg.ansatz {
        Ansatz::Koko => (Box::new(KokoRecovery::new(lambda_for("ex61")?, &m.domain)?), cfg.quad.unwrap_or_default()),
        Ansatz::Ciag => (Box::new(CiagRecovery::new(lambda_for("ex62")?, &m.domain)?), cfg.quad.unwrap_or_default()),
        Ansatz::Kirchhoff => {
            let grid = cfg.grid.resolve(m.domain, 65)?;
            if grid.rect != m.domain {
                return Err(Error::validation("the Kirchhoff recovery grid must cover the metric domain"));
            }
            let shape = cfg.seed_shape.unwrap_or_else(|| config::suggested_seed(&cfg.metric));
            let imm = Immersion::seeded(grid, shape);
            let quad = cfg.quad.unwrap_or(QuadOrders { cells: grid.nx.max(grid.ny) - 1, q1: 3, q3: 6 });
            (Box::new(KirchhoffRecovery::new(&m, &w.quadratic_form(), &imm)?), quad)
        }
    };
    let samples = sweep(&m, &w, u.as_ref(), &hs, &quad)?;
    let report = fit_scaling(&samples)?;
    let rows = samples.iter().map(|&(h, e)| vec![h, e, e / (h * h), e / h.powi(4)]);
    let table = csv(&["h", "E_h", "E_h/h^2", "E_h/h^4"], rows);
    let res = json!({
        "metric": m.label,
        "ansatz": cfg.ansatz,
        "density": cfg.density,
        "quad": quad,
        "report": report,
    });
    Ok((res, vec![("scaling.csv".into(), table)]))
}

fn run_nematic(cfg: &NematicConfig) -> Result<(Value, Vec<(String, String)>)> {
    let df = &cfg.director;
    let domain = cfg.grid.domain.unwrap_or_else(|| catalog::default_domain("nematic"));
    let m = catalog::nematic(df, domain)?;
    let grid = cfg.grid.resolve(domain, 33)?;
    let (verdict, nodes) = nematic_classify(df, &m, &grid, &cfg.thresholds)?;
    let centre = Point2::new(0.5 * (domain.x1[0] + domain.x1[1]), 0.5 * (domain.x2[0] + domain.x2[1]));
    let q2 = crate::nematic::nematic_q2(df, &cfg.moduli, centre, &Matrix2::identity())?;
    let rows = nodes.iter().map(|n| vec![n.p.x1, n.p.x2, n.curl, n.kappa, n.triple[0], n.triple[1], n.triple[2]]);
    let table = csv(&["x1", "x2", "curl_t_curl", "kappa", "R3_112", "R3_221", "R_1212"], rows);
    let res = json!({
        "director": df,
        "grid": grid_json(&grid),
        "verdict": verdict,
        "q2_identity_at_centre": q2,
    });
    Ok((res, vec![("nematic_nodes.csv".into(), table)]))
}

/// Subcommand by name with no inline flags.
pub fn command_named(name: &str) -> Result<Command> {
    Cli::try_parse_from(["prestrain", name])
        .map(|c| c.command)
        .map_err(|_| Error::validation(format!("unknown subcommand '{name}'")))
}

/// Parses the merged config for the subcommand and runs it.
pub fn execute(command: &Command, cfg: Value) -> Result<RunOutput> {
    let start = Instant::now();
    let name = command.name();
    let (hash, (results, tables)) = match command {
        Command::Classify { .. } => {
            let c: ClassifyConfig = config::parse(cfg)?;
            (hash_inputs(name, &c)?, run_classify(&c)?)
        }
        Command::Q2 { .. } => {
            let c: Q2Config = config::parse(cfg)?;
            (hash_inputs(name, &c)?, run_q2(&c)?)
        }
        Command::Bend { .. } => {
            let c: BendConfig = config::parse(cfg)?;
            (hash_inputs(name, &c)?, run_bend(&c)?)
        }
        Command::Scale { .. } => {
            let c: ScaleConfig = config::parse(cfg)?;
            (hash_inputs(name, &c)?, run_scale(&c)?)
        }
        Command::Nematic { .. } => {
            let c: NematicConfig = config::parse(cfg)?;
            (hash_inputs(name, &c)?, run_nematic(&c)?)
        }
    };
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        subcommand: name.to_string(),
        inputs_hash: hash,
        results,
        wall_time_s: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(RunOutput { report, tables })
}

/// Writes `<subcommand>.json` and the CSV tables into `dir`.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&out.report)?;
    std::fs::write(dir.join(format!("{}.json", out.report.subcommand)), json + "\n")?;
    for (name, body) in &out.tables {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

/// Full entry point; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = (|| -> Result<RunOutput> {
        let cfg = assemble_config(&cli)?;
        let threads = cli.threads.unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::validation(format!("cannot build thread pool: {e}")))?;
        let out = pool.install(|| execute(&cli.command, cfg))?;
        if let Some(dir) = &cli.out_dir {
            write_outputs(dir, &out)?;
        }
        Ok(out)
    })();
    match result {
        Ok(out) => {
            match serde_json::to_string_pretty(&out.report) {
                Ok(s) => println!("{s}"),
                Err(e) => {
                    eprintln!("error: {e}");
                    return 1;
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
