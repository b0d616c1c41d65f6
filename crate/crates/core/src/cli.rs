//! Batch front end behind the `mmwdse` binary.
//!
//! Every mode writes one summary CSV into `--out` (plus per-design
//! breakdown CSVs for the report modes). `--plot` renders an SVG next to
//! the summary by reading the CSV back.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::{min_tx_power, scenario_noise, DropSet, PreparedDesign, SearchOptions, SweepPoint};
use crate::hardware::{design_for, power_enob, total_area, total_power, Breakdown, ComponentLibrary};
use crate::link_budget::{dbm_to_relative, sinr_target, snr_pre_beamforming, Scenario};
use crate::plot::{Chart, Series};
use crate::precoding::{Architecture, ArrayDesign};
use crate::quantization::{required_enob, NoiseModel};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "MMWDSE_THREADS";

/// Baseband efficiencies swept by `dsp-sensitivity` when `--fom` is absent, mW/GOPS.
pub const DEFAULT_FOM_MW_PER_GOPS: [f64; 4] = [1.0 / 13.0, 0.32, 1.0, 3.2];

pub const MAX_DAC_BITS: u32 = 14;
pub const MAX_PS_BITS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Minimum transmit power per design.
    MinPower,
    /// SE against DAC and phase-shifter resolution at the minimum power.
    SeVsBits,
    /// Power breakdown of every design at its minimum power.
    PowerReport,
    /// IC area breakdown of every design.
    AreaReport,
    /// Derived link-budget rows.
    LinkBudget,
    /// Best design per architecture as baseband efficiency varies.
    DspSensitivity,
}

impl Mode {
    fn stem(self) -> &'static str {
        match self {
            Mode::MinPower => "min_power",
            Mode::SeVsBits => "se_vs_bits",
            Mode::PowerReport => "power_report",
            Mode::AreaReport => "area_report",
            Mode::LinkBudget => "link_budget",
            Mode::DspSensitivity => "dsp_sensitivity",
        }
    }
}

/// Design-space sweeps for mmWave transmitter arrays.
#[derive(Debug, Parser)]
#[command(name = "mmwdse", version)]
pub struct Args {
    /// Scenario file or shipped scenario name.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Component library file; defaults are built in.
    #[arg(long)]
    pub components: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "min-power")]
    pub mode: Mode,
    #[arg(long, value_delimiter = ',', default_value = "da,sa,fh")]
    pub arch: Vec<Architecture>,
    /// Antenna counts.
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256")]
    pub n: Vec<usize>,
    /// Stream counts; defaults to the scenario's allowed counts.
    #[arg(long, value_delimiter = ',')]
    pub u: Vec<usize>,
    /// Monte Carlo drops per (N, U).
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also render an SVG plot of the summary CSV.
    #[arg(long)]
    pub plot: bool,
    /// Baseband efficiencies for dsp-sensitivity, mW/GOPS.
    #[arg(long, value_delimiter = ',')]
    pub fom: Vec<f64>,
}

/// A fully resolved sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub scenarios: Vec<Scenario>,
    pub library: ComponentLibrary,
    pub mode: Mode,
    pub architectures: Vec<Architecture>,
    pub n: Vec<usize>,
    /// Empty means the scenario's allowed stream counts.
    pub u: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub plot: bool,
    pub fom_mw_per_gops: Vec<f64>,
    pub search: SearchOptions,
}

fn config(path: impl Into<PathBuf>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl SweepSpec {
    pub fn from_args(args: &Args) -> Result<Self> {
        let scenarios = match &args.scenario {
            Some(s) => vec![Scenario::resolve(s)?],
            None if args.mode == Mode::LinkBudget => Scenario::builtins(),
            None => return Err(config("--scenario", "a scenario is required for this mode")),
        };
        let library = match &args.components {
            Some(p) => ComponentLibrary::load(p)?,
            None => ComponentLibrary::default(),
        };
        let spec = Self {
            scenarios,
            library,
            mode: args.mode,
            architectures: args.arch.clone(),
            n: args.n.clone(),
            u: args.u.clone(),
            trials: args.trials,
            seed: args.seed,
            out: args.out.clone(),
            plot: args.plot,
            fom_mw_per_gops: if args.fom.is_empty() { DEFAULT_FOM_MW_PER_GOPS.to_vec() } else { args.fom.clone() },
            search: SearchOptions::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |flag: &str, msg: &str| Err(config(flag, msg));
        if self.architectures.is_empty() {
            return bad("--arch", "no architectures given");
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return bad("--n", "antenna counts must be a nonempty list of positive integers");
        }
        if self.u.contains(&0) {
            return bad("--u", "stream counts must be positive");
        }
        if self.trials == 0 {
            return bad("--trials", "at least one trial is required");
        }
        if self.fom_mw_per_gops.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return bad("--fom", "efficiencies must be positive");
        }
        if self.scenarios.is_empty() {
            return bad("--scenario", "no scenario");
        }
        Ok(())
    }

    fn streams(&self, scenario: &Scenario) -> Vec<usize> {
        if self.u.is_empty() {
            scenario.budget.allowed_stream_counts.clone()
        } else {
            self.u.clone()
        }
    }
}

/// Files written by one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// Designs that could not reach the SE target inside the power bracket.
    pub not_achievable: usize,
}

/// Process exit code for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

/// Parses arguments, applies the thread cap and runs. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = thread_cap().and_then(|threads| {
        let spec = SweepSpec::from_args(&args)?;
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            pool = pool.num_threads(t);
        }
        let pool = pool.build().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pool.install(|| run(&spec))
    });
    match result {
        Ok(report) => {
            for f in &report.files {
                println!("{}", f.display());
            }
            if report.not_achievable > 0 {
                eprintln!("{} design(s) cannot reach the SE target; flagged in the CSV", report.not_achievable);
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(config(THREADS_ENV, format!("expected a positive integer, got {v:?}"))),
        },
    }
}

/// Runs one sweep and writes its outputs.
pub fn run(spec: &SweepSpec) -> Result<RunReport> {
    spec.validate()?;
    std::fs::create_dir_all(&spec.out)?;
    let mut report = RunReport::default();
    let summary = spec.out.join(format!("{}.csv", spec.mode.stem()));
    match spec.mode {
        Mode::LinkBudget => write_rows(&summary, LinkRow::HEADER, &link_rows(spec))?,
        Mode::AreaReport => {
            let rows = area_rows(spec, &mut report)?;
            write_rows(&summary, AreaRow::HEADER, &rows)?;
        }
        Mode::MinPower => {
            let solved = solve_grid(spec)?;
            let rows: Vec<MinPowerRow> = solved.iter().map(|s| MinPowerRow::new(s, spec)).collect();
            report.not_achievable = solved.iter().filter(|s| s.point.is_none()).count();
            write_rows(&summary, MinPowerRow::HEADER, &rows)?;
        }
        Mode::SeVsBits => {
            let solved = solve_grid(spec)?;
            report.not_achievable = solved.iter().filter(|s| s.point.is_none()).count();
            let rows = se_vs_bits_rows(spec, &solved)?;
            write_rows(&summary, BitsRow::HEADER, &rows)?;
        }
        Mode::PowerReport => {
            let solved = solve_grid(spec)?;
            report.not_achievable = solved.iter().filter(|s| s.point.is_none()).count();
            let rows = power_rows(spec, &solved, &mut report)?;
            write_rows(&summary, PowerRow::HEADER, &rows)?;
        }
        Mode::DspSensitivity => {
            let solved = solve_grid(spec)?;
            report.not_achievable = solved.iter().filter(|s| s.point.is_none()).count();
            let rows = dsp_rows(spec, &solved)?;
            write_rows(&summary, DspRow::HEADER, &rows)?;
        }
    }
    report.files.push(summary.clone());
    if spec.plot {
        if let Some(chart) = chart_for(spec.mode, &summary)? {
            let svg = summary.with_extension("svg");
            write_atomic(&svg, chart.to_svg().as_bytes())?;
            report.files.push(svg);
        }
    }
    Ok(report)
}

/// One design and its search outcome.
#[derive(Debug, Clone)]
pub struct Solved {
    pub design: ArrayDesign,
    /// `None` when the target is out of reach.
    pub point: Option<SweepPoint>,
    /// SE at the top of the bracket when out of reach.
    pub best_se: f64,
    pub trials: usize,
}

fn scenario(spec: &SweepSpec) -> &Scenario {
    &spec.scenarios[0]
}

/// Minimum power for every valid (N, U, architecture), in that nesting order.
pub fn solve_grid(spec: &SweepSpec) -> Result<Vec<Solved>> {
    let sc = scenario(spec);
    let noise = scenario_noise(sc);
    let target = sc.budget.se_target_bps_hz;
    let mut out = Vec::new();
    for &n in &spec.n {
        for u in spec.streams(sc) {
            let designs: Vec<ArrayDesign> = spec
                .architectures
                .iter()
                .filter_map(|&a| match design_for(a, n, u, &spec.library) {
                    Ok(d) => Some(d),
                    Err(e) => {
                        log::warn!("skipping {a} N={n} U={u}: {e}");
                        None
                    }
                })
                .collect();
            if designs.is_empty() {
                continue;
            }
            let drops = DropSet::generate(sc, n, u, spec.trials, spec.seed)?;
            for d in designs {
                let solved = match min_tx_power(&d, &drops, target, &noise, &spec.search) {
                    Ok(p) => Solved {
                        design: p.design,
                        best_se: p.achieved_se,
                        point: Some(p),
                        trials: drops.trials(),
                    },
                    Err(Error::NotAchievable { achieved, p_out_dbm, .. }) => Solved {
                        design: d.with_power_dbm(p_out_dbm),
                        point: None,
                        best_se: achieved,
                        trials: drops.trials(),
                    },
                    Err(e) => return Err(e),
                };
                out.push(solved);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct MinPowerRow {
    arch: String,
    n: usize,
    m: usize,
    k: usize,
    u: usize,
    p_out_dbm: f64,
    mean_se: f64,
    trials: usize,
    converged: bool,
}

impl MinPowerRow {
    const HEADER: &'static [&'static str] = &["arch", "N", "M", "K", "U", "p_out_dbm", "mean_se", "trials", "converged"];

    fn new(s: &Solved, _spec: &SweepSpec) -> Self {
        let d = &s.design;
        Self {
            arch: d.architecture.to_string(),
            n: d.n,
            m: d.m,
            k: d.k,
            u: d.u,
            p_out_dbm: d.p_out_dbm,
            mean_se: s.best_se,
            trials: s.trials,
            converged: s.point.is_some_and(|p| p.converged),
        }
    }
}

#[derive(Debug, Serialize)]
struct BitsRow {
    arch: String,
    n: usize,
    u: usize,
    kind: &'static str,
    /// Empty for the unquantized reference row.
    bits: Option<u32>,
    p_out_dbm: f64,
    mean_se: f64,
    required_enob: f64,
}

impl BitsRow {
    const HEADER: &'static [&'static str] = &["arch", "N", "U", "kind", "bits", "p_out_dbm", "mean_se", "required_enob"];
}

fn enob_noise(sc: &Scenario) -> NoiseModel {
    NoiseModel::new(sc.sigma2_rx())
}

fn se_vs_bits_rows(spec: &SweepSpec, solved: &[Solved]) -> Result<Vec<BitsRow>> {
    let sc = scenario(spec);
    let noise = scenario_noise(sc);
    let mut rows = Vec::new();
    let mut drops_for: Option<((usize, usize), DropSet)> = None;
    for s in solved {
        let Some(p) = s.point else { continue };
        let d = s.design;
        let key = (d.n, d.u);
        if drops_for.as_ref().is_none_or(|(k, _)| *k != key) {
            drops_for = Some((key, DropSet::generate(sc, d.n, d.u, spec.trials, spec.seed)?));
        }
        let drops = &drops_for.as_ref().expect("just filled").1;
        let enob = required_enob(d.architecture, dbm_to_relative(p.min_p_out_dbm), d.n, d.u, &enob_noise(sc));
        let row = |kind, bits, se| BitsRow {
            arch: d.architecture.to_string(),
            n: d.n,
            u: d.u,
            kind,
            bits,
            p_out_dbm: p.min_p_out_dbm,
            mean_se: se,
            required_enob: enob,
        };
        rows.push(row("none", None, p.achieved_se));
        for bits in 1..=MAX_DAC_BITS {
            let q = PreparedDesign::new(&d.with_dac_bits(Some(bits)), drops, &noise)?;
            rows.push(row("dac", Some(bits), q.mean_se(p.min_p_out_dbm, &noise)?));
        }
        if d.architecture != Architecture::Da {
            for bits in 1..=MAX_PS_BITS {
                let q = PreparedDesign::new(&d.with_ps_bits(Some(bits)), drops, &noise)?;
                rows.push(row("ps", Some(bits), q.mean_se(p.min_p_out_dbm, &noise)?));
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct PowerRow {
    arch: String,
    n: usize,
    m: usize,
    k: usize,
    u: usize,
    p_out_dbm: f64,
    required_enob: f64,
    enob: u32,
    total_w: f64,
    total_mm2: f64,
    converged: bool,
}

impl PowerRow {
    const HEADER: &'static [&'static str] =
        &["arch", "N", "M", "K", "U", "p_out_dbm", "required_enob", "enob", "total_w", "total_mm2", "converged"];
}

#[derive(Debug, Serialize)]
struct BreakdownRow {
    block: &'static str,
    count: usize,
    unit_w: f64,
    total_w: f64,
    unit_mm2: f64,
    total_mm2: f64,
}

impl BreakdownRow {
    pub const HEADER: &'static [&'static str] = &["block", "count", "unit_w", "total_w", "unit_mm2", "total_mm2"];
}

/// Column names of a per-design breakdown CSV.
pub const BREAKDOWN_HEADER: &[&str] = BreakdownRow::HEADER;

fn breakdown_rows(b: &Breakdown) -> Vec<BreakdownRow> {
    b.rows
        .iter()
        .map(|r| BreakdownRow {
            block: r.block.name(),
            count: r.count,
            unit_w: r.unit_w,
            total_w: r.total_w,
            unit_mm2: r.unit_mm2,
            total_mm2: r.total_mm2,
        })
        .collect()
}

fn breakdown_path(spec: &SweepSpec, dir: &str, d: &ArrayDesign) -> Result<PathBuf> {
    let dir = spec.out.join(dir);
    std::fs::create_dir_all(&dir)?;
    Ok(dir.join(format!("{}_N{}_U{}.csv", d.architecture, d.n, d.u)))
}

/// Breakdown of a solved design at its minimum power and the ENOB it needs.
pub fn solved_breakdown(s: &Solved, sc: &Scenario, lib: &ComponentLibrary) -> Result<Option<(f64, u32, Breakdown)>> {
    let Some(p) = s.point else { return Ok(None) };
    let d = s.design;
    let req = required_enob(d.architecture, dbm_to_relative(p.min_p_out_dbm), d.n, d.u, &enob_noise(sc));
    let enob = power_enob(req, lib);
    let b = total_power(&d, enob, sc.budget.bandwidth_ghz(), lib)?;
    Ok(Some((req, enob, b)))
}

fn power_rows(spec: &SweepSpec, solved: &[Solved], report: &mut RunReport) -> Result<Vec<PowerRow>> {
    let sc = scenario(spec);
    let mut rows = Vec::new();
    for s in solved {
        let d = s.design;
        let mut row = PowerRow {
            arch: d.architecture.to_string(),
            n: d.n,
            m: d.m,
            k: d.k,
            u: d.u,
            p_out_dbm: d.p_out_dbm,
            required_enob: f64::NAN,
            enob: 0,
            total_w: f64::NAN,
            total_mm2: f64::NAN,
            converged: false,
        };
        if let Some((req, enob, b)) = solved_breakdown(s, sc, &spec.library)? {
            row.required_enob = req;
            row.enob = enob;
            row.total_w = b.total_w();
            row.total_mm2 = b.total_mm2();
            row.converged = s.point.is_some_and(|p| p.converged);
            let path = breakdown_path(spec, "power_breakdowns", &d)?;
            write_rows(&path, BreakdownRow::HEADER, &breakdown_rows(&b))?;
            report.files.push(path);
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct AreaRow {
    arch: String,
    n: usize,
    m: usize,
    k: usize,
    u: usize,
    total_mm2: f64,
}

impl AreaRow {
    const HEADER: &'static [&'static str] = &["arch", "N", "M", "K", "U", "total_mm2"];
}

fn area_rows(spec: &SweepSpec, report: &mut RunReport) -> Result<Vec<AreaRow>> {
    let sc = scenario(spec);
    let lib = &spec.library;
    let mut rows = Vec::new();
    for &n in &spec.n {
        for u in spec.streams(sc) {
            for &a in &spec.architectures {
                let d = match design_for(a, n, u, lib) {
                    Ok(d) => d,
                    Err(e) => {
                        log::warn!("skipping {a} N={n} U={u}: {e}");
                        continue;
                    }
                };
                let b = total_area(&d, lib.min_enob, sc.budget.bandwidth_ghz(), lib)?;
                let path = breakdown_path(spec, "area_breakdowns", &d)?;
                write_rows(&path, BreakdownRow::HEADER, &breakdown_rows(&b))?;
                report.files.push(path);
                rows.push(AreaRow {
                    arch: a.to_string(),
                    n,
                    m: d.m,
                    k: d.k,
                    u,
                    total_mm2: b.total_mm2(),
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct LinkRow {
    scenario: String,
    snr_pre_db: f64,
    rx_noise_dbm: f64,
    se_target_bps_hz: f64,
    u: usize,
    sinr_target_db: f64,
}

impl LinkRow {
    const HEADER: &'static [&'static str] = &["scenario", "snr_pre_db", "rx_noise_dbm", "se_target_bps_hz", "U", "sinr_target_db"];
}

fn link_rows(spec: &SweepSpec) -> Vec<LinkRow> {
    let mut rows = Vec::new();
    for sc in &spec.scenarios {
        for u in spec.streams(sc) {
            rows.push(LinkRow {
                scenario: sc.budget.name.clone(),
                snr_pre_db: snr_pre_beamforming(&sc.budget),
                rx_noise_dbm: sc.budget.rx_noise_dbm,
                se_target_bps_hz: sc.budget.se_target_bps_hz,
                u,
                sinr_target_db: sinr_target(sc.budget.se_target_bps_hz, u),
            });
        }
    }
    rows
}

#[derive(Debug, Serialize)]
struct DspRow {
    fom: f64,
    arch: String,
    best_n: usize,
    best_u: usize,
    total_w: f64,
}

impl DspRow {
    const HEADER: &'static [&'static str] = &["fom", "arch", "best_N", "best_U", "total_w"];
}

fn dsp_rows(spec: &SweepSpec, solved: &[Solved]) -> Result<Vec<DspRow>> {
    let sc = scenario(spec);
    let mut rows = Vec::new();
    for &fom in &spec.fom_mw_per_gops {
        let lib = spec.library.clone().with_dsp_mw_per_gops(fom);
        for &a in &spec.architectures {
            let mut best: Option<(usize, usize, f64)> = None;
            for s in solved.iter().filter(|s| s.design.architecture == a) {
                if let Some((_, _, b)) = solved_breakdown(s, sc, &lib)? {
                    let w = b.total_w();
                    if best.is_none_or(|(_, _, bw)| w < bw) {
                        best = Some((s.design.n, s.design.u, w));
                    }
                }
            }
            let (best_n, best_u, total_w) = best.unwrap_or((0, 0, f64::NAN));
            rows.push(DspRow {
                fom,
                arch: a.to_string(),
                best_n,
                best_u,
                total_w,
            });
        }
    }
    Ok(rows)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_rows<S: Serialize>(path: &Path, header: &[&str], rows: &[S]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Builds the chart for a summary CSV from the file alone.
pub fn chart_for(mode: Mode, csv_path: &Path) -> Result<Option<Chart>> {
    let (title, x, y, keys, log2_x): (&str, &str, &str, &[&str], bool) = match mode {
        Mode::MinPower => ("Minimum transmit power", "N", "p_out_dbm", &["arch", "U"], true),
        Mode::SeVsBits => ("SE against quantizer resolution", "bits", "mean_se", &["arch", "N", "U", "kind"], false),
        Mode::PowerReport => ("Total power", "N", "total_w", &["arch", "U"], true),
        Mode::AreaReport => ("IC area", "N", "total_mm2", &["arch", "U"], true),
        Mode::DspSensitivity => ("Total power against DSP efficiency (mW/GOPS)", "fom", "total_w", &["arch"], false),
        Mode::LinkBudget => return Ok(None),
    };
    let mut rd = csv::Reader::from_path(csv_path)?;
    let headers = rd.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no column {name}", csv_path.display())))
    };
    let (xi, yi) = (col(x)?, col(y)?);
    let ki: Vec<usize> = keys.iter().map(|k| col(k)).collect::<Result<_>>()?;
    // unreachable designs sit at the top of the power bracket
    let conv = if mode == Mode::MinPower { headers.iter().position(|h| h == "converged") } else { None };
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if conv.is_some_and(|c| &rec[c] != "true") {
            continue;
        }
        let (Ok(xv), Ok(yv)) = (rec[xi].parse::<f64>(), rec[yi].parse::<f64>()) else { continue };
        let label = ki
            .iter()
            .zip(keys)
            .map(|(&i, k)| if *k == "arch" || *k == "kind" { rec[i].to_string() } else { format!("{k}={}", &rec[i]) })
            .collect::<Vec<_>>()
            .join(" ");
        if !groups.contains_key(&label) {
            order.push(label.clone());
        }
        groups.entry(label).or_default().push((xv, yv));
    }
    let series = order
        .into_iter()
        .map(|label| {
            let points = groups.remove(&label).unwrap_or_default();
            Series { label, points }
        })
        .collect();
    Ok(Some(Chart {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        log2_x,
        series,
    }))
}
