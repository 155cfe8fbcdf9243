//! The `scatter` command line.

pub mod checks;
pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::error::{Result, ScatterError};
use crate::lap::{rect_scan_with, ScanReport};
use crate::opcore::{assemble_f, read_dump, write_dump, NystromGrid, OperatorMatrix};
use crate::specfun::SpectralPoint;
use crate::spectra::{feynman_hellmann_check, klaus_set};
use crate::waveop::{gaussian, run_diagnostics, WaveBox, WaveRun};
use checks::CheckRow;
use config::RunConfig;

/// Residual above which a scan is reported as an invariant breach.
pub const RESIDUAL_BREACH: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "scatter", version, about = "Limiting absorption, spectra and wave operators for sparse potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan F(z), P(z) and (1+F)^{-1} over a spectral rectangle.
    LapScan(Common),
    /// Discrete spectra of the bumps and their accumulation set.
    Spectrum(Common),
    /// Time-dependent wave operator diagnostics (d = 2).
    Waveop(Common),
    /// Free kernel oracles and envelope dominance.
    KernelCheck(Common),
    /// Kernel checks plus small solver and spectrum sanity runs.
    Selftest(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Reuse matrix dumps under <out>/dumps instead of assembling.
    #[arg(long)]
    resume: bool,
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ok,
    Breach(String),
}

pub fn exit_code(err: &ScatterError) -> i32 {
    match err {
        ScatterError::Config(_) | ScatterError::Hypothesis(_) | ScatterError::Domain(_) => 2,
        _ => 3,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::Breach(msg)) => {
            eprintln!("invariant breach: {msg}");
            4
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run(cmd: Command) -> Result<Outcome> {
    let (common, f): (&Common, fn(&RunConfig, &Common) -> Result<Outcome>) = match &cmd {
        Command::LapScan(c) => (c, lap_scan),
        Command::Spectrum(c) => (c, spectrum),
        Command::Waveop(c) => (c, waveop),
        Command::KernelCheck(c) => (c, kernel_check),
        Command::Selftest(c) => (c, selftest),
    };
    let cfg = RunConfig::load(&common.config)?;
    cfg.validate()?;
    fs::create_dir_all(&common.out)?;
    f(&cfg, common)
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| ScatterError::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| ScatterError::Io(std::io::Error::other(e)))
}

fn csv_err(e: csv::Error) -> ScatterError {
    ScatterError::Io(std::io::Error::other(e))
}

fn dump_path(dir: &Path, li: usize, ei: Option<usize>) -> PathBuf {
    match ei {
        Some(e) => dir.join(format!("F_l{li:03}_e{e:03}.bin")),
        None => dir.join(format!("F_l{li:03}_boundary.bin")),
    }
}

fn load_or_assemble(
    cfg: &RunConfig,
    common: &Common,
    grid: &Arc<NystromGrid>,
    assemble: impl Fn(SpectralPoint) -> Result<OperatorMatrix>,
    li: usize,
    ei: Option<usize>,
    z: SpectralPoint,
) -> Result<OperatorMatrix> {
    let dir = common.out.join("dumps");
    let path = dump_path(&dir, li, ei);
    if common.resume && path.exists() {
        let mut file = std::io::BufReader::new(fs::File::open(&path)?);
        return read_dump(&mut file, grid);
    }
    let m = assemble(z)?;
    if cfg.output.dump_matrices {
        fs::create_dir_all(&dir)?;
        let mut file = std::io::BufWriter::new(fs::File::create(&path)?);
        write_dump(&m, &mut file)?;
    }
    Ok(m)
}

fn write_scan(out: &Path, report: &ScanReport, meta: serde_json::Value) -> Result<()> {
    let mut w = csv_writer(&out.join("scan.csv"))?;
    w.write_record(["lambda", "epsilon", "norm_F", "norm_P", "inv_norm", "residual", "cauchy_gap", "min_sv"])
        .map_err(csv_err)?;
    for r in &report.records {
        w.write_record(
            [r.lambda, r.epsilon, r.norm_f, r.norm_p, r.inv_norm, r.residual, r.cauchy_gap, r.min_sv].map(fmt),
        )
        .map_err(csv_err)?;
    }
    w.flush()?;
    let summary = json!({
        "run": meta,
        "summary": report.summary,
        "cauchy": report.cauchy,
    });
    write_json(&out.join("scan_summary.json"), &summary)
}

fn lap_scan(cfg: &RunConfig, common: &Common) -> Result<Outcome> {
    let (p, _) = cfg.build_potential()?;
    let rect = cfg.rect()?;
    let d = &cfg.discretization;
    let grid = Arc::new(NystromGrid::build(&p, d.h, d.subdivision)?);
    let source = |li: usize, ei: Option<usize>, z: SpectralPoint| {
        load_or_assemble(cfg, common, &grid, |z| assemble_f(&p, &grid, z), li, ei, z)
    };
    let report = rect_scan_with(&rect, &source)?;
    let meta = json!({
        "dim": p.dim(),
        "bumps": p.bumps().len(),
        "truncation_n": p.trunc_n(),
        "nodes": grid.len(),
        "h": d.h,
        "subdivision": d.subdivision,
    });
    write_scan(&common.out, &report, meta)?;
    let s = &report.summary;
    println!(
        "lap-scan: {} points, {} nodes, N = {}, sup|F| = {:.6e}, sup|P| = {:.6e}, sup|(1+F)^-1| = {:.6e}, max residual = {:.3e}, failures = {}",
        s.points,
        grid.len(),
        p.trunc_n(),
        s.sup_norm_f,
        s.sup_norm_p,
        s.sup_inv_norm,
        s.max_residual,
        s.failures.len()
    );
    if s.max_residual > RESIDUAL_BREACH {
        return Ok(Outcome::Breach(format!("inverse residual {:.3e} exceeds {RESIDUAL_BREACH:e}", s.max_residual)));
    }
    Ok(Outcome::Ok)
}

fn spectrum(cfg: &RunConfig, common: &Common) -> Result<Outcome> {
    let spec = cfg.spectrum.clone().ok_or_else(|| ScatterError::Config("missing [spectrum] section".into()))?;
    let (p, family) = cfg.build_potential()?;
    let report = klaus_set(&p, spec.resolution, &spec.bs)?;
    let fh = match spec.feynman_hellmann {
        Some([lo, hi]) => {
            let first = p.bumps()[p.retained().start];
            let well = if first.amplitude > 0.0 { first.scaled(-1.0) } else { first };
            Some(feynman_hellmann_check(p.dim(), &well, (lo, hi), spec.fh_samples, &spec.bs)?)
        }
        None => None,
    };
    let mut notes = vec![
        "cover_length is the length of the union of intervals of width `resolution` around the sampled eigenvalues; it is a heuristic for the measure of the accumulation set".to_string(),
    ];
    if report.identical_bumps {
        notes.push(
            "all retained bumps are identical, so the set is the discrete spectrum of a single bump and its measure is zero".into(),
        );
    }
    let window_length = family.as_ref().map(|f| f.window.1 - f.window.0);
    let doc = json!({
        "dim": p.dim(),
        "truncation_n": p.trunc_n(),
        "report": report,
        "beta_family": family,
        "window_length": window_length,
        "feynman_hellmann": fh,
        "notes": notes,
    });
    write_json(&common.out.join("spectrum.json"), &doc)?;
    println!(
        "spectrum: {} eigenvalues from {} bumps, {} clusters, cover length {:.6e}",
        report.klaus_set_sample.len(),
        report.per_bump.len(),
        report.clusters.len(),
        report.cover_length
    );
    if let Some(len) = window_length {
        println!("spectrum: scaling window length {len:.6e}");
    }
    for n in &notes {
        println!("note: {n}");
    }
    Ok(Outcome::Ok)
}

fn waveop(cfg: &RunConfig, common: &Common) -> Result<Outcome> {
    let w = cfg.waveop.clone().ok_or_else(|| ScatterError::Config("missing [waveop] section".into()))?;
    let (p, _) = cfg.build_potential()?;
    let bx = WaveBox::new(Some(&p), w.n, w.length)?;
    let psi0 = gaussian(&bx, w.sigma);
    let run = WaveRun { band: (w.band[0], w.band[1]), dt: w.dt, t_list: w.t_list, smooth_t_list: w.smooth_t_list, s: w.s };
    let report = run_diagnostics(&bx, &psi0, &run)?;
    let mut wr = csv_writer(&common.out.join("waveop.csv"))?;
    wr.write_record(["t", "cauchy_gap", "isometry_defect", "intertwine_defect", "smooth_integral"]).map_err(csv_err)?;
    for r in &report.rows {
        wr.write_record([r.t, r.cauchy_gap, r.isometry_defect, r.intertwine_defect, r.smooth_integral].map(fmt))
            .map_err(csv_err)?;
    }
    wr.flush()?;
    let doc = json!({
        "horizon": report.horizon,
        "gaps": report.gaps,
        "max_isometry_defect": report.max_isometry_defect,
        "intertwine_defect": report.intertwine_defect,
        "smooth_increments": report.smooth_increments,
    });
    write_json(&common.out.join("waveop_summary.json"), &doc)?;
    println!(
        "waveop: horizon {:.3}, gaps {:?}, max isometry defect {:.3e}, intertwining defect {:.3e}",
        report.horizon, report.gaps, report.max_isometry_defect, report.intertwine_defect
    );
    Ok(Outcome::Ok)
}

fn report_checks(out: &Path, name: &str, rows: &[CheckRow]) -> Result<Outcome> {
    let mut w = csv_writer(&out.join(format!("{name}.csv")))?;
    w.write_record(["check", "value", "threshold", "pass"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.check.clone(), fmt(r.value), fmt(r.threshold), r.pass.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    write_json(&out.join(format!("{name}.json")), &rows)?;
    for r in rows {
        println!("{} {}: {:.3e} (threshold {:.3e})", if r.pass { "PASS" } else { "FAIL" }, r.check, r.value, r.threshold);
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
    if failed.is_empty() {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::Breach(format!("failed checks: {}", failed.join(", "))))
    }
}

fn kernel_check(cfg: &RunConfig, common: &Common) -> Result<Outcome> {
    report_checks(&common.out, "kernel_check", &checks::kernel_checks(cfg)?)
}

fn selftest(cfg: &RunConfig, common: &Common) -> Result<Outcome> {
    report_checks(&common.out, "selftest", &checks::selftest_checks(cfg)?)
}
