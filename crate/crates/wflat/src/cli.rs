//! Command definitions, validation, and dispatch.
//!
//! Exit-code contract (applied in `main`): 0 on success, 1 on usage errors,
//! 2 on computation errors with the error name in the message.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use wflat_core::coefficients::{
    alpha_dist, alpha_p, b_beta_inf, beta_inf, beta_p, AlphaConfig, CoefficientReport,
};
use wflat_core::generators::{gen_cantor, gen_density_cube, gen_graph, perturb_weights, GraphSpec};
use wflat_core::geometry::{Ball, Cube, DyadicCube, PlaneSearch};
use wflat_core::math;
use wflat_core::measure::ScalarField;
use wflat_core::multiscale::{
    assemble_report, carleson_scan, evaluate_cube, localization_ratio, scan_cubes, CubeRecord,
    ScanConfig,
};
use wflat_core::transport::{knothe_map, wasserstein};

use crate::io;

/// How a run failed: bad invocation (exit 1) vs failed computation (exit 2).
pub enum Failure {
    Usage(String),
    Compute(anyhow::Error),
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn compute<T>(r: Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Compute)
}

/// The resolved options of a run, embedded in every report for provenance.
#[derive(Serialize, Clone, Default)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lip: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub res: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generation: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub high: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

#[derive(Parser)]
#[command(
    name = "wflat",
    version,
    about = "Flatness coefficients of discrete measures: generators, exact transport, multiscale scans"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Generate a measure and write it as CSV (or JSON for .json outputs)
    Gen {
        #[command(subcommand)]
        family: GenFamily,
    },
    /// Exact W_p between two measures; writes the optimal plan as JSON
    Transport(TransportArgs),
    /// One flatness coefficient of a measure over one ball
    Coeff(CoeffArgs),
    /// Dyadic multiscale scan with normalized square-sum report
    Scan(ScanArgs),
    /// Seeded bump-localization ratio trials on generated pairs
    Localize(LocalizeArgs),
    /// Monotone cell coupling on a cube and its displacement constant
    Knothe(KnotheArgs),
}

#[derive(Subcommand)]
pub enum GenFamily {
    /// Lipschitz graph measure over a grid (profiles: flat, wave, tent)
    Graph {
        /// Parameter dimension (only 1 is supported)
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Ambient dimension (only 2 is supported)
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Lipschitz constant of the profile
        #[arg(long, default_value_t = 0.0)]
        lip: f64,
        /// Profile shape: flat, wave, or tent
        #[arg(long, default_value = "wave")]
        profile: String,
        /// Atoms per axis
        #[arg(long)]
        res: usize,
        /// Override the parameter domain origin (comma-separated)
        #[arg(long)]
        origin: Option<String>,
        /// Override the parameter domain side length
        #[arg(long)]
        side: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Four-corner Cantor measure in the unit square
    Cantor {
        /// Construction depth (at most 8)
        #[arg(long)]
        generation: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Grid measure on a cube with seeded cell densities in [low, high]
    Density {
        /// Cube origin, comma-separated
        #[arg(long, default_value = "0,0")]
        origin: String,
        /// Cube side length
        #[arg(long, default_value_t = 1.0)]
        side: f64,
        /// Lower density bound
        #[arg(long, default_value_t = 0.5)]
        low: f64,
        /// Upper density bound
        #[arg(long, default_value_t = 2.0)]
        high: f64,
        /// Cells per axis
        #[arg(long)]
        res: usize,
        /// RNG seed (required: runs must be reproducible)
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
pub struct TransportArgs {
    /// Cost exponent (1 or 2)
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Source measure (CSV or JSON)
    source: PathBuf,
    /// Target measure (CSV or JSON)
    target: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoeffKindArg {
    Alpha,
    Beta,
    BetaInf,
    BBetaInf,
    AlphaDist,
}

#[derive(clap::Args)]
pub struct CoeffArgs {
    /// Which coefficient to evaluate
    #[arg(value_enum)]
    kind: CoeffKindArg,
    /// Input measure (CSV or JSON)
    input: PathBuf,
    /// Cost exponent (1 or 2); ignored by the sup kinds
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Ball center, comma-separated
    #[arg(long)]
    center: String,
    /// Ball radius
    #[arg(long)]
    radius: f64,
    /// Dimension of the approximating planes
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Plane sampling spacing (default r/200 for lines, r/64 per axis else)
    #[arg(long)]
    spacing: Option<f64>,
    /// Plane search budget: seeded, lean, or exhaustive (default per kind)
    #[arg(long)]
    search: Option<String>,
    /// Compare probability-normalized measures in alpha
    #[arg(long, default_value_t = false)]
    normalized: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct ScanArgs {
    /// Input measure (CSV or JSON)
    input: PathBuf,
    /// Cost exponent for alpha (1 or 2)
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Inclusive relative depth range, as lo:hi
    #[arg(long)]
    depth: String,
    /// Scan root cube origin (default: all zeros)
    #[arg(long)]
    origin: Option<String>,
    /// Scan root cube side length
    #[arg(long, default_value_t = 1.0)]
    side: f64,
    /// Dimension of the approximating planes
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Plane sampling spacing as a fraction of each ball radius
    #[arg(long, default_value_t = 1.0 / 64.0)]
    spacing_ratio: f64,
    /// Worker threads (output is identical for any value)
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// JSONL report path (default: stdout)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Optional CSV mirror of the per-cube lines
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct LocalizeArgs {
    /// Cost exponent (1 or 2)
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Number of seeded trials
    #[arg(long)]
    trials: usize,
    /// RNG seed (required: runs must be reproducible)
    #[arg(long)]
    seed: u64,
    /// Cells per axis of the generated measures
    #[arg(long, default_value_t = 10)]
    res: usize,
    /// Lower density bound
    #[arg(long, default_value_t = 0.5)]
    low: f64,
    /// Upper density bound
    #[arg(long, default_value_t = 2.0)]
    high: f64,
    /// Cube origin, comma-separated
    #[arg(long, default_value = "0,0")]
    origin: String,
    /// Cube side length
    #[arg(long, default_value_t = 1.0)]
    side: f64,
    /// Bump ball center (default: cube center)
    #[arg(long)]
    center: Option<String>,
    /// Bump ball radius (default: 0.35 x side)
    #[arg(long)]
    radius: Option<f64>,
    /// Relative weight perturbation for the paired trials
    #[arg(long, default_value_t = 0.3)]
    perturb: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct KnotheArgs {
    /// Cells per axis of the source grid measure
    #[arg(long, default_value_t = 8)]
    res: usize,
    /// Cube origin, comma-separated
    #[arg(long, default_value = "0,0")]
    origin: String,
    /// Cube side length
    #[arg(long, default_value_t = 1.0)]
    side: f64,
    /// Lower density bound of the source
    #[arg(long, default_value_t = 0.5)]
    low: f64,
    /// Upper density bound of the source
    #[arg(long, default_value_t = 2.0)]
    high: f64,
    /// Sup bound of the multiplier h (must be below 1)
    #[arg(long, default_value_t = 0.2)]
    hmax: f64,
    /// RNG seed (required: runs must be reproducible)
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Gen { family } => run_gen(family),
        Cmd::Transport(args) => run_transport(args),
        Cmd::Coeff(args) => run_coeff(args),
        Cmd::Scan(args) => run_scan(args),
        Cmd::Localize(args) => run_localize(args),
        Cmd::Knothe(args) => run_knothe(args),
    }
}

fn parse_floats(what: &str, s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|_| usage(format!("{what}: expected comma-separated numbers, got '{s}'")))
}

fn parse_depth(s: &str) -> Result<(u32, u32), Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || usage(format!("--depth: expected lo:hi, got '{s}'"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo: u32 = parts[0].parse().map_err(|_| bad())?;
    let hi: u32 = parts[1].parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(usage(format!("--depth: lo must not exceed hi, got '{s}'")));
    }
    Ok((lo, hi))
}

fn check_p(p: f64) -> Result<(), Failure> {
    if p == 1.0 || p == 2.0 {
        Ok(())
    } else {
        Err(usage(format!("--p must be 1 or 2, got {p}")))
    }
}

fn sink(out: Option<&PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match out {
        Some(path) => {
            let file = compute(
                File::create(path).with_context(|| format!("create {}", path.display())),
            )?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn path_str(p: Option<&PathBuf>) -> Option<String> {
    p.map(|p| p.display().to_string())
}

fn run_gen(family: GenFamily) -> Result<(), Failure> {
    match family {
        GenFamily::Graph { n, d, lip, profile, res, origin, side, output } => {
            if n != 1 || d != 2 {
                return Err(usage("gen graph supports --n 1 --d 2 only"));
            }
            if res < 2 {
                return Err(usage("gen graph needs --res of at least 2"));
            }
            if lip < 0.0 {
                return Err(usage("--lip must be nonnegative"));
            }
            let mut spec = match profile.as_str() {
                "flat" => GraphSpec::flat(res),
                "wave" => GraphSpec::wave(lip, res),
                "tent" => GraphSpec::tent(lip, res),
                other => {
                    return Err(usage(format!(
                        "unknown profile '{other}' (expected flat, wave, or tent)"
                    )))
                }
            };
            let origin_vec = match &origin {
                Some(s) => {
                    let o = parse_floats("--origin", s)?;
                    if o.len() != n {
                        return Err(usage(format!("--origin needs {n} coordinates")));
                    }
                    Some(o)
                }
                None => None,
            };
            if origin_vec.is_some() || side.is_some() {
                let o = origin_vec.clone().unwrap_or_else(|| spec.domain.origin().to_vec());
                let s = side.unwrap_or_else(|| spec.domain.side());
                if s <= 0.0 {
                    return Err(usage("--side must be positive"));
                }
                spec.domain = Cube::new(o, s);
            }
            let sample = compute(gen_graph(&spec).context("graph generation"))?;
            let out = sink(output.as_ref())?;
            compute(io::write_measure_out(out, output.as_ref(), &sample.measure))?;
            Ok(())
        }
        GenFamily::Cantor { generation, output } => {
            if generation > 8 {
                return Err(usage("--generation must be at most 8"));
            }
            let m = compute(gen_cantor(generation).context("cantor generation"))?;
            let out = sink(output.as_ref())?;
            compute(io::write_measure_out(out, output.as_ref(), &m))?;
            Ok(())
        }
        GenFamily::Density { origin, side, low, high, res, seed, output } => {
            let o = parse_floats("--origin", &origin)?;
            if side <= 0.0 {
                return Err(usage("--side must be positive"));
            }
            if !(0.0 < low && low <= high) {
                return Err(usage("need 0 < --low <= --high"));
            }
            if res < 1 {
                return Err(usage("--res must be at least 1"));
            }
            let cube = Cube::new(o, side);
            let m = gen_density_cube(&cube, (low, high), res, seed);
            let out = sink(output.as_ref())?;
            compute(io::write_measure_out(out, output.as_ref(), &m))?;
            Ok(())
        }
    }
}

fn run_transport(args: TransportArgs) -> Result<(), Failure> {
    check_p(args.p)?;
    let a = compute(io::read_measure(&args.source))?;
    let b = compute(io::read_measure(&args.target))?;
    if a.dim() != b.dim() {
        return Err(usage(format!(
            "measures have different dimensions ({} vs {})",
            a.dim(),
            b.dim()
        )));
    }
    let config = RunConfig {
        command: "transport".into(),
        inputs: vec![args.source.display().to_string(), args.target.display().to_string()],
        output: path_str(args.output.as_ref()),
        p: Some(args.p),
        ..Default::default()
    };
    let plan = compute(wasserstein(args.p, &a, &b).context("transport"))?;
    let out = sink(args.output.as_ref())?;
    compute(io::write_plan(out, &plan, &config))?;
    Ok(())
}

fn search_preset(name: Option<&str>, default: &str) -> Result<(PlaneSearch, String), Failure> {
    let chosen = name.unwrap_or(default);
    let search = match chosen {
        "seeded" => PlaneSearch::seeded(),
        "lean" => PlaneSearch::lean(),
        "exhaustive" => PlaneSearch::exhaustive(),
        other => {
            return Err(usage(format!(
                "unknown search budget '{other}' (expected seeded, lean, or exhaustive)"
            )))
        }
    };
    Ok((search, chosen.to_string()))
}

fn run_coeff(args: CoeffArgs) -> Result<(), Failure> {
    check_p(args.p)?;
    let m = compute(io::read_measure(&args.input))?;
    let center = parse_floats("--center", &args.center)?;
    if center.len() != m.dim() {
        return Err(usage(format!(
            "--center has {} coordinates but the measure lives in dimension {}",
            center.len(),
            m.dim()
        )));
    }
    if !(args.radius > 0.0) {
        return Err(usage("--radius must be positive"));
    }
    if args.n < 1 || args.n >= m.dim() {
        return Err(usage(format!(
            "--n must satisfy 1 <= n < {} for this measure",
            m.dim()
        )));
    }
    if let Some(s) = args.spacing {
        if !(s > 0.0) {
            return Err(usage("--spacing must be positive"));
        }
    }
    let kind_name = match args.kind {
        CoeffKindArg::Alpha => "alpha",
        CoeffKindArg::Beta => "beta",
        CoeffKindArg::BetaInf => "beta-inf",
        CoeffKindArg::BBetaInf => "b-beta-inf",
        CoeffKindArg::AlphaDist => "alpha-dist",
    };
    let default_budget = match args.kind {
        CoeffKindArg::Alpha | CoeffKindArg::AlphaDist => "seeded",
        CoeffKindArg::Beta => "lean",
        CoeffKindArg::BetaInf | CoeffKindArg::BBetaInf => "exhaustive",
    };
    let (search, search_name) = search_preset(args.search.as_deref(), default_budget)?;
    let ball = Ball::new(center.clone(), args.radius);

    let report: CoefficientReport = {
        let r: Result<CoefficientReport, _> = match args.kind {
            CoeffKindArg::Alpha => {
                let cfg = AlphaConfig {
                    n: args.n,
                    search: search.clone(),
                    spacing: args.spacing,
                    normalized: args.normalized,
                };
                alpha_p(args.p, &m, &ball, &cfg)
            }
            CoeffKindArg::AlphaDist => {
                let cfg = AlphaConfig {
                    n: args.n,
                    search: search.clone(),
                    spacing: args.spacing,
                    normalized: false,
                };
                alpha_dist(&m, &ball, &cfg)
            }
            CoeffKindArg::Beta => beta_p(args.p, &m, &ball, args.n, &search),
            CoeffKindArg::BetaInf => beta_inf(&m, &ball, args.n, &search),
            CoeffKindArg::BBetaInf => {
                let scale = args.spacing.unwrap_or(args.radius / 64.0);
                b_beta_inf(&m, &ball, args.n, scale, &search)
            }
        };
        compute(r.map_err(anyhow::Error::from).context("coefficient evaluation"))?
    };

    let config = RunConfig {
        command: "coeff".into(),
        inputs: vec![args.input.display().to_string()],
        output: path_str(args.output.as_ref()),
        p: Some(args.p),
        n: Some(args.n),
        kind: Some(kind_name.to_string()),
        center: Some(center),
        radius: Some(args.radius),
        spacing: args.spacing,
        search: Some(search_name),
        normalized: Some(args.normalized),
        ..Default::default()
    };
    let out = sink(args.output.as_ref())?;
    compute(io::write_coefficient(out, &report, &config))?;
    Ok(())
}

fn run_scan(args: ScanArgs) -> Result<(), Failure> {
    check_p(args.p)?;
    let m = compute(io::read_measure(&args.input))?;
    let (lo, hi) = parse_depth(&args.depth)?;
    let origin = match &args.origin {
        Some(s) => parse_floats("--origin", s)?,
        None => vec![0.0; m.dim()],
    };
    if origin.len() != m.dim() {
        return Err(usage(format!(
            "--origin has {} coordinates but the measure lives in dimension {}",
            origin.len(),
            m.dim()
        )));
    }
    if !(args.side > 0.0) {
        return Err(usage("--side must be positive"));
    }
    if args.n < 1 || args.n >= m.dim() {
        return Err(usage(format!(
            "--n must satisfy 1 <= n < {} for this measure",
            m.dim()
        )));
    }
    if !(args.spacing_ratio > 0.0) {
        return Err(usage("--spacing-ratio must be positive"));
    }
    if args.jobs < 1 {
        return Err(usage("--jobs must be at least 1"));
    }
    let root_cube = Cube::new(origin.clone(), args.side);
    let root = DyadicCube::root(&root_cube);
    let mut cfg = ScanConfig::new(args.n);
    cfg.p = args.p;
    cfg.spacing_ratio = args.spacing_ratio;

    let report = if args.jobs == 1 {
        carleson_scan(&m, &root, lo, hi, &cfg)
    } else {
        // Records are evaluated in parallel but assembled in lattice order,
        // so the bytes do not depend on the job count.
        let pool = compute(
            rayon::ThreadPoolBuilder::new()
                .num_threads(args.jobs)
                .build()
                .context("worker pool"),
        )?;
        let cubes = scan_cubes(&m, &root, lo, hi);
        let records: Vec<CubeRecord> = pool.install(|| {
            cubes
                .par_iter()
                .map(|(cube, atoms)| evaluate_cube(&m, cube, atoms, &cfg))
                .collect()
        });
        assemble_report(args.p, lo, hi, records)
    };

    let config = RunConfig {
        command: "scan".into(),
        inputs: vec![args.input.display().to_string()],
        output: path_str(args.output.as_ref()),
        p: Some(args.p),
        n: Some(args.n),
        origin: Some(origin),
        side: Some(args.side),
        spacing_ratio: Some(args.spacing_ratio),
        depth: Some(format!("{lo}:{hi}")),
        jobs: Some(args.jobs),
        ..Default::default()
    };
    let out = sink(args.output.as_ref())?;
    compute(io::write_scan_jsonl(out, &report, &config))?;
    if let Some(csv_path) = &args.csv {
        let file = compute(
            File::create(csv_path).with_context(|| format!("create {}", csv_path.display())),
        )?;
        compute(io::write_scan_csv(BufWriter::new(file), &report))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LocalizeTrialDto {
    w: f64,
    localized: f64,
    a: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct LocalizeDto<'a> {
    p: f64,
    trials: usize,
    seed: u64,
    c_loc: f64,
    infinite: usize,
    records: Vec<LocalizeTrialDto>,
    config: &'a RunConfig,
}

fn run_localize(args: LocalizeArgs) -> Result<(), Failure> {
    check_p(args.p)?;
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if args.res < 1 {
        return Err(usage("--res must be at least 1"));
    }
    if !(0.0 < args.low && args.low <= args.high) {
        return Err(usage("need 0 < --low <= --high"));
    }
    if !(0.0..1.0).contains(&args.perturb) {
        return Err(usage("--perturb must lie in [0, 1)"));
    }
    let origin = parse_floats("--origin", &args.origin)?;
    if !(args.side > 0.0) {
        return Err(usage("--side must be positive"));
    }
    let cube = Cube::new(origin.clone(), args.side);
    let center = match &args.center {
        Some(s) => {
            let c = parse_floats("--center", s)?;
            if c.len() != cube.dim() {
                return Err(usage(format!("--center needs {} coordinates", cube.dim())));
            }
            c
        }
        None => cube.center(),
    };
    let radius = args.radius.unwrap_or(0.35 * args.side);
    if !(radius > 0.0) {
        return Err(usage("--radius must be positive"));
    }
    let ball = Ball::new(center.clone(), radius);

    let mut records = Vec::with_capacity(args.trials);
    let mut c_loc: f64 = 0.0;
    let mut infinite = 0usize;
    for t in 0..args.trials {
        let t64 = t as u64;
        let mu = gen_density_cube(
            &cube,
            (args.low, args.high),
            args.res,
            args.seed.wrapping_add(2 * t64),
        );
        // Alternate between an independent redraw and a weight perturbation,
        // so both regimes appear in every report.
        let nu = if t % 2 == 0 {
            perturb_weights(&mu, args.perturb, args.seed.wrapping_add(2 * t64 + 1))
        } else {
            gen_density_cube(
                &cube,
                (args.low, args.high),
                args.res,
                args.seed.wrapping_add(2 * t64 + 1),
            )
        };
        let rec = compute(
            localization_ratio(args.p, &mu, &nu, &ball)
                .map_err(anyhow::Error::from)
                .with_context(|| format!("trial {t}")),
        )?;
        if rec.ratio.is_finite() {
            c_loc = c_loc.max(rec.ratio);
        } else {
            infinite += 1;
        }
        records.push(LocalizeTrialDto {
            w: rec.w2,
            localized: rec.localized_w2,
            a: rec.a,
            ratio: rec.ratio,
        });
    }

    let config = RunConfig {
        command: "localize".into(),
        output: path_str(args.output.as_ref()),
        p: Some(args.p),
        origin: Some(origin),
        side: Some(args.side),
        low: Some(args.low),
        high: Some(args.high),
        res: Some(args.res),
        center: Some(center),
        radius: Some(radius),
        seed: Some(args.seed),
        trials: Some(args.trials),
        perturb: Some(args.perturb),
        ..Default::default()
    };
    let dto = LocalizeDto {
        p: args.p,
        trials: args.trials,
        seed: args.seed,
        c_loc,
        infinite,
        records,
        config: &config,
    };
    let mut out = sink(args.output.as_ref())?;
    compute(
        serde_json::to_writer_pretty(&mut out, &dto)
            .map_err(anyhow::Error::from)
            .and_then(|()| writeln!(out).map_err(anyhow::Error::from)),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct KnotheDto<'a> {
    res: usize,
    side: f64,
    hmax: f64,
    /// Realized sup of the centered multiplier on the grid.
    hsup: f64,
    seed: u64,
    marginal_error: f64,
    max_displacement: f64,
    constant: f64,
    config: &'a RunConfig,
}

fn run_knothe(args: KnotheArgs) -> Result<(), Failure> {
    if args.res < 1 {
        return Err(usage("--res must be at least 1"));
    }
    if !(0.0 < args.low && args.low <= args.high) {
        return Err(usage("need 0 < --low <= --high"));
    }
    if !(0.0..1.0).contains(&args.hmax) {
        return Err(usage("--hmax must lie in [0, 1) so masses stay positive"));
    }
    let origin = parse_floats("--origin", &args.origin)?;
    if !(args.side > 0.0) {
        return Err(usage("--side must be positive"));
    }
    let cube = Cube::new(origin.clone(), args.side);
    let sigma0 = gen_density_cube(&cube, (args.low, args.high), args.res, args.seed);

    // A deterministic multiplier derived from the seed: one cosine wave in
    // the first coordinate, with seed-chosen frequency and phase, centered so
    // it integrates to zero against the source and rescaled so the sup stays
    // within the requested bound.
    let waves = 1.0 + (args.seed % 3) as f64;
    let phase = ((args.seed >> 2) % 8) as f64 / 8.0;
    let (o0, s0, hmax) = (cube.origin()[0], cube.side(), args.hmax);
    let raw = move |x: &[f64]| {
        let t = (x[0] - o0) / s0;
        hmax * math::cos(2.0 * core::f64::consts::PI * (waves * t + phase))
    };
    let mean = sigma0.iter().map(|(x, w)| w * raw(x)).sum::<f64>() / sigma0.total_mass();
    let rescale = hmax / (hmax + mean.abs()).max(f64::MIN_POSITIVE);
    let h = ScalarField::new(move |x: &[f64]| (raw(x) - mean) * rescale);
    let hsup = sigma0
        .iter()
        .map(|(x, _)| ((raw(x) - mean) * rescale).abs())
        .fold(0.0f64, f64::max);

    let km = compute(
        knothe_map(&cube, &sigma0, &h)
            .map_err(anyhow::Error::from)
            .context("coupling construction"),
    )?;
    let pushed = km.pushforward_cell_masses();
    let target = km.target_cell_masses();
    let marginal_error = pushed
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let max_displacement = sigma0
        .iter()
        .map(|(x, _)| math::dist(x, &km.apply(x)))
        .fold(0.0f64, f64::max);
    let constant = if hsup > 0.0 { max_displacement / (args.side * hsup) } else { 0.0 };

    let config = RunConfig {
        command: "knothe".into(),
        output: path_str(args.output.as_ref()),
        origin: Some(origin),
        side: Some(args.side),
        low: Some(args.low),
        high: Some(args.high),
        res: Some(args.res),
        seed: Some(args.seed),
        hmax: Some(args.hmax),
        ..Default::default()
    };
    let dto = KnotheDto {
        res: args.res,
        side: args.side,
        hmax: args.hmax,
        hsup,
        seed: args.seed,
        marginal_error,
        max_displacement,
        constant,
        config: &config,
    };
    let mut out = sink(args.output.as_ref())?;
    compute(
        serde_json::to_writer_pretty(&mut out, &dto)
            .map_err(anyhow::Error::from)
            .and_then(|()| writeln!(out).map_err(anyhow::Error::from)),
    )?;
    Ok(())
}
