//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or report failure, 2 spec or usage error,
//! 3 numerical failure, 4 verification failure.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::equilibria::{analyze_all, find_equilibria, EquilibriaError, EquilibriumRecord, EquilibriumSet};
use crate::exceptional::{
    classify_exceptional, intzero_integral, intzero_scale, ExceptionalClass, ExceptionalError, ExceptionalVerdict,
};
use crate::integrate::integrate_variational;
use crate::levelsets::{level_set_report, LevelSetError, LevelSetReport};
use crate::perturb::{bifurcation_sweep, perturbation_scan, ParameterFamily, ParameterKind, PerturbError, SweepResult};
use crate::poly::Poly;
use crate::problem::{parse_spec, ProblemError, ProblemSpec};
use crate::report::{format_float, spec_hash, CsvRow, Format, ReportError, ReportWriter};
use crate::spectrum::{HyperbolicityClass, SpectrumReport};
use crate::verify::{reference_hash, run_suite, CheckResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Solve,
    Spectrum,
    Levelsums,
    Exceptional,
    Perturb,
    Sweep,
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Spectrum => "spectrum",
            Command::Levelsums => "levelsums",
            Command::Exceptional => "exceptional",
            Command::Perturb => "perturb",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "hypereq",
    version,
    about = "Equilibria and hyperbolicity of Neumann reaction-diffusion problems"
)]
pub struct Args {
    /// Pipeline stage to run.
    #[arg(long, value_enum)]
    cmd: Command,
    /// Problem spec file (key=value lines). Not needed for verify.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Number of regular levels per profile for levelsums.
    #[arg(long, default_value_t = 64)]
    q_grid: usize,
    /// Increasing ε values for perturb, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1e-4,3e-4,1e-3,3e-3,1e-2")]
    eps_list: Vec<f64>,
    /// Sweep range as LO:HI:N.
    #[arg(long)]
    lambda_range: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Coefficients of the perturbation direction g, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,1")]
    g_coeffs: Vec<f64>,
    /// Sweep parameter: `scale-f` or `f-coeff:K`.
    #[arg(long, default_value = "scale-f")]
    family: String,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Problem(ProblemError),
    Numerical(String),
    Report(ReportError),
    VerifyFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Report(_) => 1,
            CliError::Usage(_) | CliError::Problem(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::VerifyFailed(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Problem(e) => write!(f, "spec error: {e}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Report(e) => write!(f, "report error: {e}"),
            CliError::VerifyFailed(n) => write!(f, "{n} verification check(s) failed"),
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        CliError::Problem(e)
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Report(e)
    }
}

impl From<EquilibriaError> for CliError {
    fn from(e: EquilibriaError) -> Self {
        match e {
            EquilibriaError::ZeroPolynomial => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<ExceptionalError> for CliError {
    fn from(e: ExceptionalError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<LevelSetError> for CliError {
    fn from(e: LevelSetError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<PerturbError> for CliError {
    fn from(e: PerturbError) -> Self {
        match e {
            PerturbError::Problem(p) => CliError::Problem(p),
            PerturbError::Equilibria(_) | PerturbError::Spectrum(_) => CliError::Numerical(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match args.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&args)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} threads: {e}"))),
        },
        None => dispatch(&args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hypereq: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(args: &Args) -> Result<(), CliError> {
    let format = match args.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
    };
    if args.cmd == Command::Verify {
        return verify(&args.out, format);
    }
    let path = args
        .spec
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("--spec is required for {}", args.cmd.name())))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let spec = parse_spec(&text)?;
    let mut out = Output {
        writer: ReportWriter::new(&args.out, spec_hash(&spec), args.cmd.name(), *spec.tol())?,
        format,
    };
    match args.cmd {
        Command::Solve => solve(&spec, &mut out)?,
        Command::Spectrum => spectra(&spec, &mut out)?,
        Command::Levelsums => levelsums(&spec, args.q_grid, &mut out)?,
        Command::Exceptional => exceptional(&spec, &mut out)?,
        Command::Perturb => perturb(&spec, &Poly::new(args.g_coeffs.clone()), &args.eps_list, &mut out)?,
        Command::Sweep => {
            let range = args
                .lambda_range
                .as_deref()
                .ok_or_else(|| CliError::Usage("sweep needs --lambda-range LO:HI:N".into()))?;
            sweep(&spec, &args.family, range, &mut out)?
        }
        Command::Verify => unreachable!("handled above"),
    }
    out.writer.finish()?;
    Ok(())
}

struct Output {
    writer: ReportWriter,
    format: Format,
}

impl Output {
    /// Writes `<stem>.json` holding `data`, or `<stem>.csv` holding `rows`.
    fn emit<T: Serialize, R: CsvRow>(
        &mut self,
        stem: &str,
        data: &T,
        count: usize,
        rows: &[R],
    ) -> Result<(), CliError> {
        let name = match self.format {
            Format::Json => {
                let name = format!("{stem}.json");
                self.writer.write_json(&name, data, count)?;
                name
            }
            Format::Csv => {
                let name = format!("{stem}.csv");
                self.writer.write_csv(&name, rows)?;
                name
            }
        };
        println!("wrote {name}");
        Ok(())
    }
}

fn solved(spec: &ProblemSpec) -> Result<EquilibriumSet, CliError> {
    let mut set = find_equilibria(spec)?;
    analyze_all(spec, &mut set)?;
    for w in &set.warnings {
        eprintln!("warning: {w:?}");
    }
    println!(
        "{} equilibria ({} nonconstant)",
        set.records.len(),
        set.nonconstant_count()
    );
    Ok(set)
}

fn class_name<T: Serialize>(c: &T) -> String {
    serde_json::to_value(c)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn opt_cell<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRow {
    pub u0: f64,
    pub is_constant: bool,
    pub multiplicity: Option<usize>,
    pub miss: f64,
    pub miss_slope: f64,
    pub min_abs: Option<f64>,
    pub morse_index: Option<usize>,
    pub hyperbolic: Option<HyperbolicityClass>,
    pub critical_points: Option<usize>,
    pub tangency_unresolved: bool,
}

impl From<&EquilibriumRecord> for EquilibriumRow {
    fn from(r: &EquilibriumRecord) -> Self {
        EquilibriumRow {
            u0: r.u0,
            is_constant: r.is_constant,
            multiplicity: r.multiplicity,
            miss: r.miss,
            miss_slope: r.miss_slope,
            min_abs: r.spectrum.as_ref().map(|s| s.min_abs),
            morse_index: r.spectrum.as_ref().map(SpectrumReport::morse_index),
            hyperbolic: r.flags.hyperbolic,
            critical_points: r.critical_points.as_ref().map(|c| c.points.len()),
            tangency_unresolved: r.flags.tangency_unresolved,
        }
    }
}

impl CsvRow for EquilibriumRow {
    fn header() -> &'static [&'static str] {
        &[
            "u0",
            "is_constant",
            "multiplicity",
            "miss",
            "miss_slope",
            "min_abs",
            "morse_index",
            "hyperbolic",
            "critical_points",
            "tangency_unresolved",
        ]
    }

    fn cells(&self) -> Vec<String> {
        vec![
            format_float(self.u0),
            self.is_constant.to_string(),
            opt_cell(self.multiplicity, |m| m.to_string()),
            format_float(self.miss),
            format_float(self.miss_slope),
            opt_cell(self.min_abs, format_float),
            opt_cell(self.morse_index, |m| m.to_string()),
            opt_cell(self.hyperbolic, |h| class_name(&h)),
            opt_cell(self.critical_points, |c| c.to_string()),
            self.tangency_unresolved.to_string(),
        ]
    }
}

fn solve(spec: &ProblemSpec, out: &mut Output) -> Result<(), CliError> {
    let set = solved(spec)?;
    let rows: Vec<EquilibriumRow> = set.records.iter().map(EquilibriumRow::from).collect();
    out.emit("equilibria", &set, set.records.len(), &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub u0: f64,
    pub is_constant: bool,
    pub spectrum: SpectrumReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub u0: f64,
    pub index: usize,
    pub eigenvalue: f64,
    pub error_estimate: f64,
}

impl CsvRow for EigenRow {
    fn header() -> &'static [&'static str] {
        &["u0", "index", "eigenvalue", "error_estimate"]
    }

    fn cells(&self) -> Vec<String> {
        vec![
            format_float(self.u0),
            self.index.to_string(),
            format_float(self.eigenvalue),
            format_float(self.error_estimate),
        ]
    }
}

fn spectra(spec: &ProblemSpec, out: &mut Output) -> Result<(), CliError> {
    let set = solved(spec)?;
    let entries: Vec<SpectrumEntry> = set
        .records
        .iter()
        .filter_map(|r| {
            r.spectrum.clone().map(|spectrum| SpectrumEntry {
                u0: r.u0,
                is_constant: r.is_constant,
                spectrum,
            })
        })
        .collect();
    let rows: Vec<EigenRow> = entries
        .iter()
        .flat_map(|e| {
            e.spectrum
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(index, &eigenvalue)| EigenRow {
                    u0: e.u0,
                    index,
                    eigenvalue,
                    error_estimate: e.spectrum.error_estimate,
                })
        })
        .collect();
    out.emit("spectra", &entries, entries.len(), &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSumEntry {
    /// `u(0)` of the profile.
    pub u0: f64,
    pub report: LevelSetReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSumRow {
    pub u0: f64,
    pub q: f64,
    pub regular_count: usize,
    pub critical_count: usize,
    pub regular_sum: f64,
    pub signed_sum: f64,
    pub critical_sum: f64,
}

impl From<&LevelSumEntry> for LevelSumRow {
    fn from(e: &LevelSumEntry) -> Self {
        LevelSumRow {
            u0: e.u0,
            q: e.report.q,
            regular_count: e.report.regular_points.len(),
            critical_count: e.report.critical_points.len(),
            regular_sum: e.report.regular_sum,
            signed_sum: e.report.signed_sum,
            critical_sum: e.report.critical_sum,
        }
    }
}

impl CsvRow for LevelSumRow {
    fn header() -> &'static [&'static str] {
        &[
            "u0",
            "q",
            "regular_count",
            "critical_count",
            "regular_sum",
            "signed_sum",
            "critical_sum",
        ]
    }

    fn cells(&self) -> Vec<String> {
        vec![
            format_float(self.u0),
            format_float(self.q),
            self.regular_count.to_string(),
            self.critical_count.to_string(),
            format_float(self.regular_sum),
            format_float(self.signed_sum),
            format_float(self.critical_sum),
        ]
    }
}

/// Level sums with `φ = v` on every nonconstant profile: `n_levels` cell
/// centres across its range plus each critical value. Levels too close to a
/// critical value are skipped.
fn levelsums(spec: &ProblemSpec, n_levels: usize, out: &mut Output) -> Result<(), CliError> {
    if n_levels == 0 {
        return Err(CliError::Usage("--q-grid must be positive".into()));
    }
    let set = solved(spec)?;
    let mut entries = Vec::new();
    for r in set.records.iter().filter(|r| !r.is_constant) {
        let v = integrate_variational(spec, &r.profile).map_err(|e| CliError::Numerical(e.to_string()))?;
        let phi = |x: f64| v.value(x);
        let crit = r
            .critical_points
            .as_ref()
            .map(|c| c.points.as_slice())
            .unwrap_or_default();
        let (lo, hi) = crit.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c.value), hi.max(c.value))
        });
        let mut levels: Vec<f64> = (0..n_levels)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n_levels as f64)
            .chain(crit.iter().map(|c| c.value))
            .collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        for q in levels {
            match level_set_report(&r.profile, phi, q, spec.tol()) {
                Ok(report) => entries.push(LevelSumEntry { u0: r.u0, report }),
                Err(LevelSetError::LevelTooCloseToCritical { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    let rows: Vec<LevelSumRow> = entries.iter().map(LevelSumRow::from).collect();
    out.emit("levelsums", &entries, entries.len(), &rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntzeroPair {
    pub p: f64,
    pub pbar: f64,
    pub integral: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub u0: f64,
    pub verdict: ExceptionalVerdict,
    pub intzero: Vec<IntzeroPair>,
}

impl CsvRow for VerdictEntry {
    fn header() -> &'static [&'static str] {
        &[
            "u0",
            "condition1",
            "condition2",
            "condition3",
            "overall",
            "max_intzero_ratio",
        ]
    }

    fn cells(&self) -> Vec<String> {
        let ratio = self
            .intzero
            .iter()
            .map(|p| p.integral.abs() / p.scale.max(f64::MIN_POSITIVE))
            .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
        vec![
            format_float(self.u0),
            class_name(&self.verdict.condition1),
            opt_cell(self.verdict.condition2, |c| class_name(&c)),
            opt_cell(self.verdict.condition3, |c| class_name(&c)),
            class_name(&self.verdict.overall),
            opt_cell(ratio, format_float),
        ]
    }
}

fn exceptional(spec: &ProblemSpec, out: &mut Output) -> Result<(), CliError> {
    let set = solved(spec)?;
    let mut entries = Vec::new();
    for r in set.records.iter().filter(|r| !r.is_constant) {
        let verdict = classify_exceptional(spec, r)?;
        let intzero = verdict
            .witnesses
            .iter()
            .map(|&(p, pbar)| IntzeroPair {
                p,
                pbar,
                integral: intzero_integral(spec.a(), &r.profile, p, pbar),
                scale: intzero_scale(spec.a(), &r.profile, p, pbar),
            })
            .collect();
        if verdict.overall == ExceptionalClass::Exceptional {
            println!("exceptional equilibrium at u0 = {}", r.u0);
        }
        entries.push(VerdictEntry {
            u0: r.u0,
            verdict,
            intzero,
        });
    }
    out.emit("verdicts", &entries, entries.len(), &entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub parameter: f64,
    pub equilibrium_count: usize,
    pub nonconstant_count: usize,
    pub continuation_lost: bool,
    /// Empty when no equilibrium was recorded at this parameter.
    pub u0: Option<f64>,
    pub is_constant: Option<bool>,
    pub min_abs: Option<f64>,
    pub hyperbolic: Option<HyperbolicityClass>,
    pub morse_index: Option<usize>,
}

impl CsvRow for BranchRow {
    fn header() -> &'static [&'static str] {
        &[
            "parameter",
            "equilibrium_count",
            "nonconstant_count",
            "continuation_lost",
            "u0",
            "is_constant",
            "min_abs",
            "hyperbolic",
            "morse_index",
        ]
    }

    fn cells(&self) -> Vec<String> {
        vec![
            format_float(self.parameter),
            self.equilibrium_count.to_string(),
            self.nonconstant_count.to_string(),
            self.continuation_lost.to_string(),
            opt_cell(self.u0, format_float),
            opt_cell(self.is_constant, |b| b.to_string()),
            opt_cell(self.min_abs, format_float),
            opt_cell(self.hyperbolic, |h| class_name(&h)),
            opt_cell(self.morse_index, |m| m.to_string()),
        ]
    }
}

fn branch_rows(result: &SweepResult) -> Vec<BranchRow> {
    let mut rows = Vec::new();
    for r in &result.rows {
        let base = BranchRow {
            parameter: r.parameter,
            equilibrium_count: r.equilibrium_count,
            nonconstant_count: r.nonconstant_count,
            continuation_lost: r.continuation_lost,
            u0: None,
            is_constant: None,
            min_abs: None,
            hyperbolic: None,
            morse_index: None,
        };
        if r.equilibria.is_empty() {
            rows.push(base.clone());
        }
        for p in &r.equilibria {
            rows.push(BranchRow {
                u0: Some(p.u0),
                is_constant: Some(p.is_constant),
                min_abs: Some(p.min_abs),
                hyperbolic: Some(p.hyperbolic),
                morse_index: Some(p.morse_index),
                ..base.clone()
            });
        }
    }
    rows
}

fn perturb(spec: &ProblemSpec, g: &Poly, eps_list: &[f64], out: &mut Output) -> Result<(), CliError> {
    let set = solved(spec)?;
    let targets: Vec<&EquilibriumRecord> = set
        .records
        .iter()
        .filter(|r| r.flags.hyperbolic != Some(HyperbolicityClass::Hyperbolic))
        .collect();
    if targets.is_empty() {
        println!("every equilibrium is hyperbolic; nothing to perturb");
        return Ok(());
    }
    let mut results = Vec::new();
    for r in targets {
        results.push(perturbation_scan(spec, r, g, eps_list)?);
    }
    let rows: Vec<BranchRow> = results.iter().flat_map(branch_rows).collect();
    out.emit("perturb", &results, results.len(), &rows)
}

fn parse_family(s: &str) -> Result<ParameterKind, CliError> {
    if s == "scale-f" {
        return Ok(ParameterKind::ScaleF);
    }
    s.strip_prefix("f-coeff:")
        .and_then(|k| k.parse().ok())
        .map(ParameterKind::FCoeff)
        .ok_or_else(|| CliError::Usage(format!("bad --family `{s}` (expected scale-f or f-coeff:K)")))
}

fn parse_range(s: &str) -> Result<(f64, f64, usize), CliError> {
    let bad = || CliError::Usage(format!("bad --lambda-range `{s}` (expected LO:HI:N)"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parts[0].trim().parse().map_err(|_| bad())?;
    let hi = parts[1].trim().parse().map_err(|_| bad())?;
    let n = parts[2].trim().parse().map_err(|_| bad())?;
    Ok((lo, hi, n))
}

fn sweep(spec: &ProblemSpec, family: &str, range: &str, out: &mut Output) -> Result<(), CliError> {
    let kind = parse_family(family)?;
    let (lo, hi, n) = parse_range(range)?;
    let fam = ParameterFamily::new(spec.clone(), kind)?;
    let result = bifurcation_sweep(&fam, (lo, hi), n)?;
    for c in &result.crossings {
        println!(
            "crossing on u0 = {} at parameter {} (Morse index {} -> {})",
            c.u0,
            c.midpoint(),
            c.morse_lo,
            c.morse_hi
        );
    }
    let rows = branch_rows(&result);
    out.emit("sweep", &result, result.rows.len(), &rows)
}

impl CsvRow for CheckResult {
    fn header() -> &'static [&'static str] {
        &["name", "passed", "value", "tolerance", "detail"]
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.name.clone(),
            self.passed.to_string(),
            format_float(self.value),
            format_float(self.tolerance),
            format!("\"{}\"", self.detail.replace('"', "'")),
        ]
    }
}

fn verify(dir: &Path, format: Format) -> Result<(), CliError> {
    let report = run_suite();
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!(
            "{status} {}: {:e} (tolerance {:e}) {}",
            c.name, c.value, c.tolerance, c.detail
        );
    }
    let mut out = Output {
        writer: ReportWriter::new(dir, reference_hash(), Command::Verify.name(), Default::default())?,
        format,
    };
    out.emit("verify_report", &report, report.checks.len(), &report.checks)?;
    out.writer.finish()?;
    match report.failures() {
        0 => Ok(()),
        n => Err(CliError::VerifyFailed(n)),
    }
}
