//! File formats: CSV measures, JSON measures/plans/planes/reports, and the
//! JSONL scan export with its CSV mirror.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use wflat_core::coefficients::{CoefficientKind, CoefficientReport};
use wflat_core::geometry::AffinePlane;
use wflat_core::measure::DiscreteMeasure;
use wflat_core::multiscale::ScanReport;
use wflat_core::transport::TransportPlan;

use crate::cli::RunConfig;

/// JSON measure body: `{"dim": d, "points": [[...]], "weights": [...]}`.
#[derive(Serialize, Deserialize)]
pub struct MeasureDto {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Plane body: `{"base": [...], "frame": [[...]]}`.
#[derive(Serialize, Deserialize)]
pub struct PlaneDto {
    pub base: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
}

impl From<&AffinePlane> for PlaneDto {
    fn from(plane: &AffinePlane) -> Self {
        Self { base: plane.base().to_vec(), frame: plane.frame().to_vec() }
    }
}

/// Reads a measure from `.json` (measure DTO) or CSV (`x0,...,x{d-1},w`).
pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let file = File::open(path).with_context(|| format!("open {}", path.display()))?;
        let dto: MeasureDto = serde_json::from_reader(BufReader::new(file))
            .with_context(|| format!("parse {}", path.display()))?;
        let m = DiscreteMeasure::new(dto.dim, &dto.points, &dto.weights)
            .with_context(|| format!("validate {}", path.display()))?;
        return Ok(m);
    }
    read_measure_csv(path)
}

fn read_measure_csv(path: &Path) -> Result<DiscreteMeasure> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("open {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        bail!("{}: need at least one coordinate column and a weight column", path.display());
    }
    let dim = headers.len() - 1;
    for (i, name) in headers.iter().enumerate() {
        let expected = if i < dim { format!("x{i}") } else { "w".to_string() };
        if name != expected {
            bail!("{}: column {i} is '{name}', expected '{expected}'", path.display());
        }
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != dim + 1 {
            bail!("{}: row {} has {} fields, expected {}", path.display(), row + 2, record.len(), dim + 1);
        }
        let mut x = Vec::with_capacity(dim);
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .with_context(|| format!("{}: row {} column {col}", path.display(), row + 2))?;
            if col < dim {
                x.push(v);
            } else {
                weights.push(v);
            }
        }
        points.push(x);
    }
    let m = DiscreteMeasure::new(dim, &points, &weights)
        .with_context(|| format!("validate {}", path.display()))?;
    Ok(m)
}

/// Writes a measure as CSV (`x0,...,x{d-1},w`), or as the JSON measure body
/// when the destination path ends in `.json`. Stdout gets CSV.
pub fn write_measure_out(
    mut w: Box<dyn Write>,
    path: Option<&std::path::PathBuf>,
    m: &DiscreteMeasure,
) -> Result<()> {
    let json = path.is_some_and(|p| p.extension().and_then(|e| e.to_str()) == Some("json"));
    if json {
        write_measure_json(&mut w, m)?;
    } else {
        write_measure_csv(&mut w, m)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_measure_csv<W: Write>(w: W, m: &DiscreteMeasure) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..m.dim()).map(|i| format!("x{i}")).collect();
    header.push("w".to_string());
    csv.write_record(&header)?;
    for (x, weight) in m.iter() {
        let mut row: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
        row.push(format!("{weight}"));
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_measure_json<W: Write>(mut w: W, m: &DiscreteMeasure) -> Result<()> {
    let dto = MeasureDto {
        dim: m.dim(),
        points: m.iter().map(|(x, _)| x.to_vec()).collect(),
        weights: m.weights().to_vec(),
    };
    serde_json::to_writer_pretty(&mut w, &dto)?;
    writeln!(w)?;
    Ok(())
}

/// Plan report: `{"p": 2.0, "cost": c, "pairs": [[i,j,m],...], ...}`.
#[derive(Serialize)]
struct PlanDto<'a> {
    p: f64,
    cost: f64,
    pairs: &'a [(usize, usize, f64)],
    source_mass: f64,
    target_mass: f64,
    config: &'a RunConfig,
}

pub fn write_plan<W: Write>(mut w: W, plan: &TransportPlan, config: &RunConfig) -> Result<()> {
    let dto = PlanDto {
        p: plan.p,
        cost: plan.cost,
        pairs: &plan.pairs,
        source_mass: plan.source_mass,
        target_mass: plan.target_mass,
        config,
    };
    serde_json::to_writer_pretty(&mut w, &dto)?;
    writeln!(w)?;
    Ok(())
}

fn kind_name(kind: CoefficientKind) -> &'static str {
    match kind {
        CoefficientKind::Alpha => "alpha_p",
        CoefficientKind::AlphaDist => "alpha_dist",
        CoefficientKind::Beta => "beta_p",
        CoefficientKind::BetaInf => "beta_inf",
        CoefficientKind::BilateralBetaInf => "b_beta_inf",
    }
}

/// Coefficient report:
/// `{"kind":"alpha_p","p":2,"center":[...],"radius":r,"value":v,"plane":{...},
///   "c_bl":c,"spacing":s,...}`. The `p` key is omitted for the sup kinds.
#[derive(Serialize)]
struct CoeffDto<'a> {
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    center: &'a [f64],
    radius: f64,
    value: f64,
    plane: PlaneDto,
    c_bl: f64,
    transport_cost: f64,
    spacing: f64,
    config: &'a RunConfig,
}

pub fn write_coefficient<W: Write>(
    mut w: W,
    report: &CoefficientReport,
    config: &RunConfig,
) -> Result<()> {
    let dto = CoeffDto {
        kind: kind_name(report.kind),
        p: if report.p.is_finite() { Some(report.p) } else { None },
        center: &report.ball.center,
        radius: report.ball.radius,
        value: report.value,
        plane: PlaneDto::from(&report.witness_plane),
        c_bl: report.normalization,
        transport_cost: report.transport_cost,
        spacing: report.spacing,
        config,
    };
    serde_json::to_writer_pretty(&mut w, &dto)?;
    writeln!(w)?;
    Ok(())
}

/// Top-of-scan sums (one per cube at the shallowest scanned depth).
#[derive(Serialize)]
struct ScanRootDto {
    id: String,
    s: f64,
}

#[derive(Serialize)]
struct ScanSummaryDto<'a> {
    p: f64,
    depth: String,
    cubes: usize,
    evaluated: usize,
    skipped: usize,
    roots: Vec<ScanRootDto>,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct ScanSummaryLine<'a> {
    summary: ScanSummaryDto<'a>,
}

fn num(v: f64) -> String {
    serde_json::to_string(&v).expect("finite float")
}

/// One JSON line per evaluated cube —
/// `{"id":"j:k0,k1","alpha2":v,"beta2":w,"mass":m}` — then a summary object
/// carrying counts, the sums rooted at the shallowest depth, and the run
/// configuration.
pub fn write_scan_jsonl<W: Write>(mut w: W, report: &ScanReport, config: &RunConfig) -> Result<()> {
    let akey = alpha_key(report.p);
    for rec in &report.records {
        if rec.skipped {
            continue;
        }
        writeln!(
            w,
            "{{\"id\":{},\"{}\":{},\"beta2\":{},\"mass\":{}}}",
            serde_json::to_string(&rec.cube.id())?,
            akey,
            num(rec.alpha),
            num(rec.beta2),
            num(rec.mass),
        )?;
    }
    let roots = report
        .records
        .iter()
        .zip(&report.sums)
        .filter(|(r, _)| r.cube.level() == report.depth_lo)
        .map(|(r, &s)| ScanRootDto { id: r.cube.id(), s })
        .collect();
    let summary = ScanSummaryLine {
        summary: ScanSummaryDto {
            p: report.p,
            depth: format!("{}:{}", report.depth_lo, report.depth_hi),
            cubes: report.records.len(),
            evaluated: report.records.len() - report.skipped,
            skipped: report.skipped,
            roots,
            config,
        },
    };
    serde_json::to_writer(&mut w, &summary)?;
    writeln!(w)?;
    Ok(())
}

fn alpha_key(p: f64) -> String {
    if p == p.trunc() && p.is_finite() {
        format!("alpha{}", p as i64)
    } else {
        format!("alpha{p}")
    }
}

/// CSV mirror of the JSONL lines: same columns, same rows.
pub fn write_scan_csv<W: Write>(w: W, report: &ScanReport) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["id", &alpha_key(report.p), "beta2", "mass"])?;
    for rec in &report.records {
        if rec.skipped {
            continue;
        }
        csv.write_record([
            rec.cube.id(),
            format!("{}", rec.alpha),
            format!("{}", rec.beta2),
            format!("{}", rec.mass),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
