//! Analysis reports, figure tables and the file formats that carry them.
//!
//! Matrices are plain CSV, one row per line. Systems and reports are JSON.
//! All node indices in files are 1-based. Floats are written in the
//! shortest form that parses back to the same value.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balancer::{BalanceTrace, StudyRow, TrialOutcome};
use crate::error::{Error, Result};
use crate::graph::has_cycle;
use crate::magnitude::{magnitude_matrix, FirSystem, MagnitudeMatrix};
use crate::nu_exact::{nu_2x2, nu_best, NuMethod};
use crate::nubar::{balanced_solution, nubar_exact};
use crate::spectral::{default_max_iter, nu_lower_bound_with, spectral_radius, LowerBoundOptions};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest `n` for which traces include one column per node.
pub const TRACE_D_COLUMNS_MAX_N: usize = 16;

/// Relative slack used when comparing bounds and flagging diagonal maximality.
const DIAG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuLower {
    pub bound: f64,
    /// 1-based.
    pub indices: Vec<usize>,
    /// False when the subset came from the greedy search.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuExact {
    pub value: f64,
    pub method: NuMethod,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ratios {
    /// Absent when the lower bound is zero.
    pub nubar_over_nu_lower: Option<f64>,
    /// Absent when ν̄ is zero.
    pub mu_over_nubar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    /// The optimally scaled matrix has its largest entry on the diagonal.
    pub diagonally_maximal: bool,
    /// The support graph, self-loops included, has no cycle.
    pub acyclic: bool,
    pub balanced: bool,
}

/// Everything known about one magnitude matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessReport {
    pub schema: u32,
    pub n: usize,
    pub mu: f64,
    pub nubar: f64,
    pub nubar_scaling: Vec<f64>,
    pub nubar_certified: bool,
    /// 1-based maximizing cycle.
    pub nubar_witness_cycle: Vec<usize>,
    pub nu_lower: NuLower,
    pub nu_exact: Option<NuExact>,
    pub ratios: Ratios,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyzeOptions {
    /// Defaults to `min(n, 12)`.
    pub subset_max: Option<usize>,
    pub tol: f64,
    /// Run the brute-force ν oracle when no closed form applies (`n ≤ 4`).
    pub oracle: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            subset_max: None,
            tol: 1e-9,
            oracle: false,
        }
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

fn max_diagonal(m: &MagnitudeMatrix) -> f64 {
    (0..m.n()).map(|i| m.get(i, i)).fold(0.0, f64::max)
}

/// Diagonal entries are unchanged by similarity and the optimally scaled
/// matrix peaks at ν̄, so the optimum is diagonally maximal exactly when a
/// self-loop reaches ν̄.
fn optimum_diagonally_maximal(m: &MagnitudeMatrix, nubar: f64) -> bool {
    max_diagonal(m) >= nubar * (1.0 - DIAG_TOL)
}

/// Computes μ, ν̄ with its balanced scaling, the subset lower bound on ν and,
/// where available, ν itself.
pub fn analyze(m: &MagnitudeMatrix, opts: &AnalyzeOptions) -> Result<RobustnessReport> {
    let n = m.n();
    let subset_max = opts.subset_max.unwrap_or(n.min(12));
    let mu = spectral_radius(m, opts.tol, default_max_iter(n))?;
    if !mu.converged {
        log::warn!("spectral radius did not reach tolerance {}", opts.tol);
    }
    let lower = nu_lower_bound_with(
        m,
        &LowerBoundOptions {
            tol: opts.tol,
            ..LowerBoundOptions::new(subset_max)
        },
    )?;
    let nb = balanced_solution(m);
    let exact = nu_best(m, opts.oracle)?;
    if opts.oracle && n > crate::nu_exact::ORACLE_MAX_N {
        log::warn!("--oracle ignored for n = {n}");
    }
    Ok(RobustnessReport {
        schema: SCHEMA_VERSION,
        n,
        mu: mu.rho,
        nubar: nb.value,
        nubar_scaling: nb.scaling.as_slice().to_vec(),
        nubar_certified: nb.certified,
        nubar_witness_cycle: nb.witness_cycle.iter().map(|i| i + 1).collect(),
        nu_lower: NuLower {
            bound: lower.bound,
            indices: lower.indices.iter().map(|i| i + 1).collect(),
            exhaustive: lower.exhaustive,
        },
        nu_exact: exact.map(|r| NuExact {
            value: r.value,
            method: r.method,
            witness: r.witness_delta,
        }),
        ratios: Ratios {
            nubar_over_nu_lower: ratio(nb.value, lower.bound),
            mu_over_nubar: ratio(mu.rho, nb.value),
        },
        diagnostics: Diagnostics {
            diagonally_maximal: optimum_diagonally_maximal(m, nb.value),
            acyclic: !has_cycle(m),
            balanced: nb.balanced,
        },
    })
}

/// One point of the symmetric family `[[x, w], [w, y]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2x2Record {
    pub x: f64,
    pub w: f64,
    pub y: f64,
    pub mu: f64,
    pub nu: f64,
    pub nubar: f64,
    pub ratio_mu_nu: f64,
    pub ratio_nubar_nu: f64,
    /// Not part of the CSV table.
    #[serde(skip)]
    pub diagonally_maximal: bool,
}

impl Grid2x2Record {
    pub fn compute(x: f64, w: f64, y: f64) -> Result<Self> {
        let m = MagnitudeMatrix::from_rows(&[vec![x, w], vec![w, y]])?;
        let mu = spectral_radius(&m, 1e-13, 100_000)?.rho;
        let nu = nu_2x2(&m)?.value;
        let nubar = nubar_exact(&m).value;
        // all three vanish together; the ratios are then taken as 1
        let r = |num: f64| if nu > 0.0 { num / nu } else { 1.0 };
        Ok(Grid2x2Record {
            x,
            w,
            y,
            mu,
            nu,
            nubar,
            ratio_mu_nu: r(mu),
            ratio_nubar_nu: r(nubar),
            diagonally_maximal: optimum_diagonally_maximal(&m, nubar),
        })
    }
}

/// `steps³` records on an evenly spaced grid over `[0, 1]³`, ordered with `y`
/// varying fastest.
pub fn grid2x2(steps: usize) -> Result<Vec<Grid2x2Record>> {
    if steps < 2 {
        return Err(Error::validation("grid needs at least 2 steps per axis"));
    }
    let val = |k: usize| k as f64 / (steps - 1) as f64;
    let nested: Result<Vec<Vec<Grid2x2Record>>> = (0..steps)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::with_capacity(steps * steps);
            for j in 0..steps {
                for k in 0..steps {
                    out.push(Grid2x2Record::compute(val(i), val(j), val(k))?);
                }
            }
            Ok(out)
        })
        .collect();
    Ok(nested?.into_iter().flatten().collect())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => Error::Serialize(format!("{}: {kind:?}", path.display())),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Reads a square matrix from CSV. Blank lines and lines starting with `#`
/// are skipped.
pub fn read_matrix(path: &Path) -> Result<MagnitudeMatrix> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| {
                    parse_err(
                        path,
                        format!("line {line}, column {}: '{field}' is not a number", c + 1),
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, "no matrix rows found"));
    }
    let n = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(parse_err(
            path,
            format!(
                "row {} has {} entries; a {n}-row matrix must be square",
                i + 1,
                r.len()
            ),
        ));
    }
    MagnitudeMatrix::from_rows(&rows).map_err(|e| match e {
        Error::Validation(msg) => parse_err(path, msg),
        other => other,
    })
}

pub fn write_matrix(m: &MagnitudeMatrix, path: &Path) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    for row in m.rows() {
        wtr.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    wtr.flush().map_err(io_err(path))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    n: usize,
    entries: Vec<SystemEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemEntry {
    row: usize,
    col: usize,
    impulse: Vec<f64>,
}

/// Reads an FIR system from JSON:
/// `{"n": 2, "entries": [{"row": 1, "col": 2, "impulse": [0, 1]}]}`.
pub fn read_system(path: &Path) -> Result<FirSystem> {
    let file = File::open(path).map_err(io_err(path))?;
    let raw: SystemFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| parse_err(path, e.to_string()))?;
    let mut sys = FirSystem::new(raw.n).map_err(|e| parse_err(path, e.to_string()))?;
    for (k, e) in raw.entries.into_iter().enumerate() {
        if e.row == 0 || e.col == 0 {
            return Err(parse_err(
                path,
                format!("entry {}: indices are 1-based", k + 1),
            ));
        }
        sys.set(e.row - 1, e.col - 1, e.impulse)
            .map_err(|err| parse_err(path, format!("entry {}: {err}", k + 1)))?;
    }
    Ok(sys)
}

/// Loads a magnitude matrix from a `.json` system description or a CSV matrix.
pub fn read_input(path: &Path) -> Result<MagnitudeMatrix> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        Ok(magnitude_matrix(&read_system(path)?))
    } else {
        read_matrix(path)
    }
}

pub fn report_to_string(report: &RobustnessReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Serialize(e.to_string()))
}

pub fn write_report(report: &RobustnessReport, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", report_to_string(report)?).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_report(path: &Path) -> Result<RobustnessReport> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let report: RobustnessReport =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    if report.schema != SCHEMA_VERSION {
        return Err(parse_err(
            path,
            format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                report.schema
            ),
        ));
    }
    Ok(report)
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(create(path)?);
    for r in rows {
        wtr.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    wtr.flush().map_err(io_err(path))
}

pub fn write_grid(records: &[Grid2x2Record], path: &Path) -> Result<()> {
    write_rows(records, path)
}

pub fn read_grid(path: &Path) -> Result<Vec<Grid2x2Record>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| parse_err(path, e.to_string())))
        .collect()
}

/// A gnuplot script that plots `ν̄/ν` and `μ/ν` from a grid CSV, one panel
/// per value of `w`. The script is only written, never run.
pub fn write_grid_plot_script(csv_name: &str, path: &Path) -> Result<()> {
    let script = format!(
        "# ratios over the [[x, w], [w, y]] family\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'x'\n\
         set ylabel 'y'\n\
         set view map\n\
         set multiplot layout 1,2\n\
         set title 'nubar / nu'\n\
         splot '{csv_name}' using 1:3:8 with points palette pointtype 5\n\
         set title 'mu / nu'\n\
         splot '{csv_name}' using 1:3:7 with points palette pointtype 5\n\
         unset multiplot\n"
    );
    std::fs::write(path, script).map_err(io_err(path))
}

pub fn write_study(rows: &[StudyRow], path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        n: usize,
        theta: f64,
        tol: f64,
        max_iters: usize,
        median_iters: f64,
        failures: usize,
    }
    let rows: Vec<Row> = rows
        .iter()
        .map(|r| Row {
            n: r.n,
            theta: r.theta,
            tol: r.tol,
            max_iters: r.max_iters,
            median_iters: r.median_iters,
            failures: r.failures,
        })
        .collect();
    write_rows(&rows, path)
}

/// Trials that missed convergence or the ν̄ target, one line each.
pub fn write_counterexamples(outcomes: &[&TrialOutcome], path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(create(path)?);
    let header = [
        "n",
        "theta",
        "trial",
        "seed",
        "converged",
        "final_objective",
        "nubar",
        "relative_gap",
    ];
    wtr.write_record(header).map_err(|e| csv_err(path, e))?;
    for o in outcomes {
        wtr.write_record([
            o.n.to_string(),
            o.theta.to_string(),
            o.trial.to_string(),
            o.seed.to_string(),
            o.converged.to_string(),
            format!("{:?}", o.final_objective),
            format!("{:?}", o.nubar),
            format!("{:?}", o.relative_gap()),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    wtr.flush().map_err(io_err(path))
}

/// Writes `t,objective,rel_change`, plus `d1..dn` when `n ≤ 16`. The row
/// `t = 0` holds the starting point with an empty change.
pub fn write_trace(trace: &BalanceTrace, path: &Path) -> Result<()> {
    let n = trace.final_scaling.len();
    let with_d = n <= TRACE_D_COLUMNS_MAX_N;
    let mut wtr = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["t".to_string(), "objective".into(), "rel_change".into()];
    if with_d {
        header.extend((1..=n).map(|k| format!("d{k}")));
    }
    wtr.write_record(&header).map_err(|e| csv_err(path, e))?;
    let mut start = vec![
        "0".to_string(),
        format!("{:?}", trace.initial_objective),
        String::new(),
    ];
    if with_d {
        start.extend(std::iter::repeat_n("1.0".to_string(), n));
    }
    wtr.write_record(&start).map_err(|e| csv_err(path, e))?;
    for r in &trace.iterations {
        let mut rec = vec![
            r.t.to_string(),
            format!("{:?}", r.objective),
            format!("{:?}", r.rel_change),
        ];
        if with_d {
            rec.extend(r.d.iter().map(|v| format!("{v:?}")));
        }
        wtr.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    wtr.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_report() {
        let r = analyze(
            &MagnitudeMatrix::identity(3).unwrap(),
            &AnalyzeOptions::default(),
        )
        .unwrap();
        assert!((r.mu - 1.0).abs() < 1e-9);
        assert_eq!(r.nubar, 1.0);
        assert_eq!(r.nu_lower.bound, 1.0);
        assert!(r.diagnostics.diagonally_maximal);
        assert!(!r.diagnostics.acyclic);
        assert_eq!(r.schema, 1);
    }

    #[test]
    fn ring_report() {
        let r = analyze(
            &MagnitudeMatrix::unit_ring(4).unwrap(),
            &AnalyzeOptions::default(),
        )
        .unwrap();
        assert!((r.mu - 1.0).abs() < 1e-8);
        assert!((r.nubar - 1.0).abs() < 1e-12);
        assert!((r.nu_lower.bound - 0.25).abs() < 1e-9);
        assert_eq!(r.nu_lower.indices, vec![1, 2, 3, 4]);
        assert_eq!(r.nu_exact.as_ref().unwrap().method, NuMethod::Ring);
        assert_eq!(r.nubar_witness_cycle, vec![1, 2, 3, 4]);
    }

    #[test]
    fn acyclic_report_has_no_ratios() {
        let m = MagnitudeMatrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let r = analyze(&m, &AnalyzeOptions::default()).unwrap();
        assert_eq!(r.nubar, 0.0);
        assert_eq!(r.ratios.mu_over_nubar, None);
        assert!(r.diagnostics.acyclic);
    }

    #[test]
    fn grid_corners() {
        let g = Grid2x2Record::compute(1.0, 1.0, 1.0).unwrap();
        assert!((g.mu - 2.0).abs() < 1e-12);
        assert_eq!((g.nu, g.nubar), (1.0, 1.0));
        assert!(g.diagonally_maximal);
        let g = Grid2x2Record::compute(0.0, 1.0, 0.0).unwrap();
        assert!((g.mu - 1.0).abs() < 1e-12);
        assert_eq!((g.nu, g.nubar), (0.5, 1.0));
        assert!(!g.diagonally_maximal);
        let g = Grid2x2Record::compute(0.0, 0.0, 0.0).unwrap();
        assert_eq!((g.ratio_mu_nu, g.ratio_nubar_nu), (1.0, 1.0));
        assert_eq!(grid2x2(3).unwrap().len(), 27);
        assert!(grid2x2(1).is_err());
    }
}
