//! Command-line driver: full-order run, POD, reduced-order sweep,
//! verification battery and a combined report.

pub mod config;
pub mod expr;
pub mod io;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use crate::analysis::{
    bound_ratio_check, energy_checks, evaluate_rom, spectrum_checks, structural_checks, verify_identities,
    ErrorReport, Report, VerifyOptions,
};
use crate::assembly::{assemble_hdg, Coefficients, HdgSystem, SpaceTimeFn};
use crate::error::{Error, Result};
use crate::fom::{run, Retention, RunOptions, SnapshotSet};
use crate::mesh::build_structured_mesh;
use crate::pod::{pod_of_run, PodBasis, PodOptions, Variable};
use crate::rom::{build_reduced, reduced_initial};
use crate::space::{build_dof_layout, build_reference_basis};
pub use config::RunConfig;
use io::{join_f64, parse_f64_list, read_matrix, sci, sha256_file, write_matrix, Header};

#[derive(Debug, Parser)]
#[command(name = "hdgpod", version, about = "HDG heat equation solver with a POD reduced order model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in configuration: 2d-paper, 3d-paper, 3d-small or small.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated reduced orders.
    #[arg(long, global = true)]
    pub r_list: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for dense and sparse factorizations (1 keeps results bitwise reproducible).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full-order model and write snapshots.
    Fom,
    /// Compute the three PODs from stored snapshots.
    Pod,
    /// Run the reduced models for every r and write the error table.
    Rom,
    /// Run the verification battery; exit status 0 iff every check passes.
    Verify {
        /// Scale one scalar mode before checking (negative control).
        #[arg(long)]
        corrupt: bool,
        /// Random polynomials per (dim, k) for the trace inequality.
        #[arg(long, default_value_t = 1000)]
        trace_samples: usize,
    },
    /// Full pipeline with tables, spectra and bound constants.
    Report,
}

/// Resolves the configuration from preset, file, overrides and flags.
pub fn resolve_config(common: &Common, default_preset: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::preset(common.preset.as_deref().unwrap_or(default_preset))?;
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for o in &common.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
        cfg.set(k, v)?;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(r) = &common.r_list {
        cfg.r_list = config::parse_r_list(r)?;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.resolve_problem()?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn build_system(cfg: &RunConfig) -> Result<HdgSystem> {
    let mesh = build_structured_mesh(cfg.dim, cfg.n)?;
    let basis = build_reference_basis(cfg.dim, cfg.k)?;
    let layout = build_dof_layout(&mesh, &basis)?;
    let coef = Coefficients::uniform(&mesh, cfg.c, cfg.tau);
    assemble_hdg(mesh, basis, layout, coef)
}

pub fn run_fom(cfg: &RunConfig, system: &HdgSystem) -> Result<SnapshotSet> {
    let (u0e, fe) = (cfg.u0.clone(), cfg.f.clone());
    let u0 = move |p: &[f64; 3], t: f64| u0e.eval(p, t);
    let f = move |p: &[f64; 3], t: f64| fe.eval(p, t);
    let options = RunOptions {
        retention: Retention { cadence: cfg.cadence, store_flux: cfg.store_flux },
        check_residual: false,
    };
    run(system, cfg.dt, cfg.t_final, &f, &u0, options)
}

pub fn run_pod(cfg: &RunConfig, system: &HdgSystem, snaps: &SnapshotSet) -> Result<[PodBasis; 3]> {
    if snaps.is_empty() {
        return Err(Error::InvalidArgument("snapshot set is empty".into()));
    }
    let options = PodOptions { r_max: cfg.r_max, ..PodOptions::default() };
    let q = pod_of_run(system, snaps, Variable::Flux, options)?;
    let u = pod_of_run(system, snaps, Variable::Scalar, options)?;
    let uh = pod_of_run(system, snaps, Variable::Trace, options)?;
    Ok([q, u, uh])
}

/// One row of the error table.
#[derive(Debug, Clone)]
pub enum SweepRow {
    Done(ErrorReport),
    Skipped { r: usize, reason: String },
}

pub fn sweep(cfg: &RunConfig, system: &HdgSystem, snaps: &SnapshotSet, bases: [&PodBasis; 3]) -> Result<Vec<SweepRow>> {
    let fe = cfg.f.clone();
    let f = move |p: &[f64; 3], t: f64| fe.eval(p, t);
    let f: Option<&SpaceTimeFn> = if cfg.f.is_zero() { None } else { Some(&f) };
    let mut rows = Vec::new();
    for &r in &cfg.r_list {
        let short: Vec<String> = bases
            .iter()
            .filter(|b| b.stored() < r)
            .map(|b| format!("{} has {} modes", b.variable.tag(), b.stored()))
            .collect();
        if !short.is_empty() {
            rows.push(SweepRow::Skipped { r, reason: format!("r exceeds rank ({})", short.join("; ")) });
            continue;
        }
        rows.push(SweepRow::Done(evaluate_rom(system, snaps, bases, r, r, r, f)?));
    }
    Ok(rows)
}

fn mesh_header(cfg: &RunConfig, system: &HdgSystem) -> Header {
    let mut h = Header::new();
    h.insert("mesh_hash".into(), system.mesh.content_hash());
    for line in cfg.to_text().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            h.insert(format!("config.{k}"), v.to_string());
        }
    }
    h
}

fn snapshot_path(dir: &Path, var: Variable) -> PathBuf {
    dir.join(format!("snapshots_{}.bin", var.tag()))
}

fn basis_path(dir: &Path, var: Variable) -> PathBuf {
    dir.join(format!("basis_{}.bin", var.tag()))
}

pub fn save_snapshots(cfg: &RunConfig, system: &HdgSystem, snaps: &SnapshotSet) -> Result<Vec<PathBuf>> {
    let dir = &cfg.out;
    let mut h = mesh_header(cfg, system);
    h.insert("dt".into(), format!("{:e}", snaps.dt));
    h.insert("times".into(), join_f64(&snaps.times));
    let mut written = Vec::new();
    let mut put = |var: Variable, m: &DMatrix<f64>| -> Result<()> {
        let mut h = h.clone();
        h.insert("variable".into(), var.tag().into());
        let p = snapshot_path(dir, var);
        write_matrix(&p, &h, m)?;
        written.push(p);
        Ok(())
    };
    if let Some(q) = &snaps.flux {
        put(Variable::Flux, q)?;
    }
    put(Variable::Scalar, &snaps.scalar)?;
    put(Variable::Trace, &snaps.trace)?;
    let mut h0 = mesh_header(cfg, system);
    h0.insert("energy".into(), join_f64(&snaps.energy));
    let p = dir.join("initial_u.bin");
    write_matrix(&p, &h0, &DMatrix::from_column_slice(snaps.beta0.len(), 1, snaps.beta0.as_slice()))?;
    written.push(p);
    let mut csv = String::from("step,time,energy\n");
    for (n, e) in snaps.energy.iter().enumerate() {
        let _ = writeln!(csv, "{n},{},{}", sci(n as f64 * snaps.dt), sci(*e));
    }
    let p = dir.join("energy.csv");
    fs::write(&p, csv)?;
    written.push(p);
    Ok(written)
}

fn check_mesh(path: &Path, h: &Header, system: &HdgSystem) -> Result<()> {
    if h.get("mesh_hash").map(String::as_str) != Some(system.mesh.content_hash().as_str()) {
        return Err(Error::Format {
            path: path.display().to_string(),
            reason: "written for a different mesh or configuration".into(),
        });
    }
    Ok(())
}

pub fn load_snapshots(cfg: &RunConfig, system: &HdgSystem) -> Result<SnapshotSet> {
    let dir = &cfg.out;
    let load = |var: Variable| -> Result<(Header, DMatrix<f64>)> {
        let p = snapshot_path(dir, var);
        let (h, m) = read_matrix(&p).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read {} ({io}); run `hdgpod fom` first", p.display())),
            other => other,
        })?;
        check_mesh(&p, &h, system)?;
        Ok((h, m))
    };
    let (h, scalar) = load(Variable::Scalar)?;
    let (_, trace) = load(Variable::Trace)?;
    let flux = if snapshot_path(dir, Variable::Flux).exists() { Some(load(Variable::Flux)?.1) } else { None };
    let times = parse_f64_list(h.get("times").map(String::as_str).unwrap_or(""))?;
    let bad = |reason: &str| Error::Format { path: snapshot_path(dir, Variable::Scalar).display().to_string(), reason: reason.into() };
    if times.is_empty() || scalar.ncols() == 0 {
        return Err(bad("snapshot file is empty"));
    }
    if times.len() != scalar.ncols() || trace.ncols() != scalar.ncols() {
        return Err(bad("snapshot counts disagree"));
    }
    let dt: f64 = h.get("dt").and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing dt"))?;
    let p0 = dir.join("initial_u.bin");
    let (h0, b0) = read_matrix(&p0)?;
    check_mesh(&p0, &h0, system)?;
    let energy = parse_f64_list(h0.get("energy").map(String::as_str).unwrap_or(""))?;
    Ok(SnapshotSet { dt, times, flux, scalar, trace, beta0: b0.column(0).into_owned(), energy, max_residual: None })
}

pub fn save_bases(cfg: &RunConfig, system: &HdgSystem, bases: [&PodBasis; 3]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for b in bases {
        let mut h = mesh_header(cfg, system);
        h.insert("variable".into(), b.variable.tag().into());
        h.insert("sigma".into(), join_f64(&b.sigma));
        h.insert("total_energy".into(), format!("{:e}", b.total_energy));
        let p = basis_path(&cfg.out, b.variable);
        write_matrix(&p, &h, &b.modes)?;
        written.push(p);
    }
    let p = cfg.out.join("singular_values.csv");
    fs::write(&p, singular_values_csv(bases))?;
    written.push(p);
    Ok(written)
}

pub fn load_bases(cfg: &RunConfig, system: &HdgSystem) -> Result<[PodBasis; 3]> {
    let load = |var: Variable| -> Result<PodBasis> {
        let p = basis_path(&cfg.out, var);
        let (h, modes) = read_matrix(&p).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read {} ({io}); run `hdgpod pod` first", p.display())),
            other => other,
        })?;
        check_mesh(&p, &h, system)?;
        let sigma = parse_f64_list(h.get("sigma").map(String::as_str).unwrap_or(""))?;
        let total: f64 = h.get("total_energy").and_then(|v| v.parse().ok()).unwrap_or(f64::NAN);
        let temporal = DMatrix::zeros(0, modes.ncols());
        PodBasis::from_stored(var, sigma, modes, temporal, total, var.weight(system))
    };
    Ok([load(Variable::Flux)?, load(Variable::Scalar)?, load(Variable::Trace)?])
}

/// `index,sigma_q,sigma_u,sigma_uhat`, ragged columns left empty.
pub fn singular_values_csv(bases: [&PodBasis; 3]) -> String {
    let mut s = String::from("index,sigma_q,sigma_u,sigma_uhat\n");
    let rows = bases.iter().map(|b| b.sigma.len()).max().unwrap_or(0);
    for i in 0..rows {
        let cells: Vec<String> = bases.iter().map(|b| b.sigma.get(i).map_or(String::new(), |x| sci(*x))).collect();
        let _ = writeln!(s, "{},{}", i + 1, cells.join(","));
    }
    s
}

pub fn errors_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("r,q_error,u_error,lambda_tail_q,lambda_tail_u,lambda_tail_uhat,bound_sum_q,bound_sum_u,status\n");
    for row in rows {
        match row {
            SweepRow::Done(e) => {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},ok",
                    e.r2,
                    sci(e.q_error),
                    sci(e.u_error),
                    sci(e.tail_q),
                    sci(e.tail_u),
                    sci(e.tail_uhat),
                    sci(e.lambda_q),
                    sci(e.lambda_u)
                );
            }
            SweepRow::Skipped { r, reason } => {
                let _ = writeln!(s, "{r},,,,,,,,skipped: {}", reason.replace(',', ";"));
            }
        }
    }
    s
}

fn write_timings(dir: &Path, command: &str, timings: &[(String, f64)]) -> Result<PathBuf> {
    let mut s = String::from("stage,seconds\n");
    for (stage, t) in timings {
        let _ = writeln!(s, "{stage},{}", sci(*t));
    }
    let p = dir.join(format!("timings_{command}.csv"));
    fs::write(&p, s)?;
    Ok(p)
}

/// Rewrites this command's section of `manifest.txt`.
fn write_manifest(cfg: &RunConfig, system: &HdgSystem, command: &str, extra: &str, files: &[PathBuf]) -> Result<()> {
    let path = cfg.out.join("manifest.txt");
    let mut sections: BTreeMap<String, String> = BTreeMap::new();
    if let Ok(old) = fs::read_to_string(&path) {
        let mut current: Option<String> = None;
        for line in old.lines() {
            if let Some(name) = line.strip_prefix("[").and_then(|l| l.strip_suffix("]")) {
                current = Some(name.to_string());
                sections.entry(name.to_string()).or_default();
            } else if let Some(c) = &current {
                let body = sections.get_mut(c).expect("section exists");
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    let mut body = String::new();
    let l = &system.layout;
    let _ = writeln!(body, "mesh_hash = {}", system.mesh.content_hash());
    let _ = writeln!(body, "elements = {}", system.mesh.num_elements());
    let _ = writeln!(body, "n1 = {}\nn2 = {}\nn3 = {}", l.n1, l.n2, l.n3);
    body.push_str(extra);
    for f in files {
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let _ = writeln!(body, "file {name} sha256 {}", sha256_file(f)?);
    }
    sections.insert(command.to_string(), body);
    let mut text = String::from("[config]\n");
    text.push_str(&cfg.to_text());
    for (name, b) in sections.iter().filter(|(n, _)| n.as_str() != "config") {
        let _ = write!(text, "[{name}]\n{b}");
    }
    fs::write(&path, text)?;
    Ok(())
}

fn timed<T>(timings: &mut Vec<(String, f64)>, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    timings.push((stage.to_string(), start.elapsed().as_secs_f64()));
    eprintln!("{stage}: {:.2} s", start.elapsed().as_secs_f64());
    Ok(out)
}

fn spectrum_summary(bases: [&PodBasis; 3]) -> String {
    let mut s = String::new();
    for b in bases {
        let _ = writeln!(s, "rank_{} = {}", b.variable.tag(), b.rank());
    }
    if let (Some(u), Some(uh)) = (bases[1].sigma.first(), bases[2].sigma.first()) {
        // faces counted from both sides, and once
        let _ = writeln!(s, "sigma1_uhat_over_u = {:.6e}", uh / u);
        let _ = writeln!(s, "sigma1_uhat_over_u_single_counted = {:.6e}", uh / u / 2f64.sqrt());
    }
    s
}

fn cmd_fom(cfg: &RunConfig) -> Result<i32> {
    fs::create_dir_all(&cfg.out)?;
    let mut timings = Vec::new();
    let system = timed(&mut timings, "assemble", || build_system(cfg))?;
    let snaps = timed(&mut timings, "fom", || run_fom(cfg, &system))?;
    let mut files = save_snapshots(cfg, &system, &snaps)?;
    files.push(write_timings(&cfg.out, "fom", &timings)?);
    write_manifest(cfg, &system, "fom", &format!("snapshots = {}\n", snaps.len()), &files[..files.len() - 1])?;
    println!("wrote {} snapshots to {}", snaps.len(), cfg.out.display());
    Ok(0)
}

fn cmd_pod(cfg: &RunConfig) -> Result<i32> {
    let mut timings = Vec::new();
    let system = timed(&mut timings, "assemble", || build_system(cfg))?;
    let snaps = load_snapshots(cfg, &system)?;
    let [q, u, uh] = timed(&mut timings, "pod", || run_pod(cfg, &system, &snaps))?;
    let files = save_bases(cfg, &system, [&q, &u, &uh])?;
    write_timings(&cfg.out, "pod", &timings)?;
    write_manifest(cfg, &system, "pod", &spectrum_summary([&q, &u, &uh]), &files)?;
    print!("{}", spectrum_summary([&q, &u, &uh]));
    Ok(0)
}

fn cmd_rom(cfg: &RunConfig) -> Result<i32> {
    let mut timings = Vec::new();
    let system = timed(&mut timings, "assemble", || build_system(cfg))?;
    let snaps = load_snapshots(cfg, &system)?;
    let [q, u, uh] = load_bases(cfg, &system)?;
    let rows = timed(&mut timings, "rom_sweep", || sweep(cfg, &system, &snaps, [&q, &u, &uh]))?;
    for row in &rows {
        if let SweepRow::Done(e) = row {
            timings.push((format!("rom_r{}", e.r2), e.rom_seconds));
        }
    }
    let p = cfg.out.join("errors.csv");
    let table = errors_csv(&rows);
    fs::write(&p, &table)?;
    write_timings(&cfg.out, "rom", &timings)?;
    write_manifest(cfg, &system, "rom", "", &[p])?;
    print!("{table}");
    Ok(0)
}

fn cmd_verify(cfg: &RunConfig, corrupt: bool, trace_samples: usize) -> Result<i32> {
    fs::create_dir_all(&cfg.out)?;
    let mut timings = Vec::new();
    let system = timed(&mut timings, "assemble", || build_system(cfg))?;
    let snaps = timed(&mut timings, "fom", || run_fom(cfg, &system))?;
    let [q, u, uh] = timed(&mut timings, "pod", || run_pod(cfg, &system, &snaps))?;
    let options = VerifyOptions { trace_samples, seed: cfg.seed, corrupt, ..VerifyOptions::default() };
    let report = timed(&mut timings, "verify", || verify_identities(&system, &snaps, [&q, &u, &uh], &options))?;
    let csv = cfg.out.join("verify_report.csv");
    fs::write(&csv, report.to_csv())?;
    let txt = cfg.out.join("verify_report.txt");
    fs::write(&txt, report.to_text())?;
    write_timings(&cfg.out, "verify", &timings)?;
    write_manifest(cfg, &system, "verify", "", &[csv, txt])?;
    print!("{}", report.to_text());
    for c in report.failures() {
        eprintln!("failed check: {}", c.name);
    }
    Ok(if report.all_pass() { 0 } else { 1 })
}

fn cmd_report(cfg: &RunConfig) -> Result<i32> {
    fs::create_dir_all(&cfg.out)?;
    let mut timings = Vec::new();
    let system = timed(&mut timings, "assemble", || build_system(cfg))?;
    let snaps = timed(&mut timings, "fom", || run_fom(cfg, &system))?;
    let mut files = save_snapshots(cfg, &system, &snaps)?;
    let [q, u, uh] = timed(&mut timings, "pod", || run_pod(cfg, &system, &snaps))?;
    let bases = [&q, &u, &uh];
    files.extend(save_bases(cfg, &system, bases)?);
    let rows = timed(&mut timings, "rom_sweep", || sweep(cfg, &system, &snaps, bases))?;
    let p = cfg.out.join("errors.csv");
    fs::write(&p, errors_csv(&rows))?;
    files.push(p);

    let mut checks = Report::default();
    checks.extend(spectrum_checks(bases, 20, 6.0, 5));
    let f_zero = cfg.f.is_zero();
    if f_zero {
        checks.extend(energy_checks(&snaps, None));
    }
    let done: Vec<ErrorReport> =
        rows.iter().filter_map(|r| if let SweepRow::Done(e) = r { Some(e.clone()) } else { None }).collect();
    let steps = (cfg.t_final / cfg.dt).round() as usize;
    for e in &done {
        let model = build_reduced(&system, bases, e.r1, e.r2, e.r3)?;
        checks.extend(structural_checks(&system, &model));
        if f_zero {
            let b0 = reduced_initial(&u, &snaps.beta0, e.r2)?;
            let traj = model.run(cfg.dt, steps, &b0, None)?;
            let tag = format!("r{}", e.r2);
            checks.checks.extend(energy_checks(&snaps, Some((&tag, &traj, &b0))).checks.into_iter().skip(1));
        }
    }
    let (consts, bound) = bound_ratio_check(&done, system.mesh.h, cfg.t_final);
    checks.checks.push(bound);

    let mut text = String::new();
    text.push_str(&spectrum_summary(bases));
    let _ = writeln!(text, "\nr       q_error          u_error          C(r)");
    for (e, c) in done.iter().zip(&consts) {
        let _ = writeln!(text, "{:<7} {:<16} {:<16} {}", e.r2, sci(e.q_error), sci(e.u_error), sci(*c));
    }
    for r in &rows {
        if let SweepRow::Skipped { r, reason } = r {
            let _ = writeln!(text, "{r:<7} skipped: {reason}");
        }
    }
    text.push('\n');
    text.push_str(&checks.to_text());
    let p = cfg.out.join("report.txt");
    fs::write(&p, &text)?;
    files.push(p);
    let p = cfg.out.join("report_checks.csv");
    fs::write(&p, checks.to_csv())?;
    files.push(p);
    write_timings(&cfg.out, "report", &timings)?;
    write_manifest(cfg, &system, "report", &spectrum_summary(bases), &files)?;
    print!("{text}");
    Ok(0)
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let threads = cli.common.threads.max(1);
    faer::set_global_parallelism(if threads == 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(threads)
    });
    let default_preset = match cli.command {
        Command::Verify { .. } => "small",
        _ => "2d-paper",
    };
    let cfg = resolve_config(&cli.common, default_preset)?;
    match &cli.command {
        Command::Fom => cmd_fom(&cfg),
        Command::Pod => cmd_pod(&cfg),
        Command::Rom => cmd_rom(&cfg),
        Command::Verify { corrupt, trace_samples } => cmd_verify(&cfg, *corrupt, *trace_samples),
        Command::Report => cmd_report(&cfg),
    }
}

/// Parses arguments, runs the command and returns the process exit status
/// (2 for errors).
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
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(dir: &Path, cmd: &str, extra: &[&str]) -> Vec<String> {
        let mut v = vec!["hdgpod".to_string(), cmd.to_string(), "--preset".into(), "small".into()];
        v.extend(["--out".to_string(), dir.display().to_string()]);
        v.extend(["--set".to_string(), "n=2".to_string(), "--set".into(), "t_final=0.4".into()]);
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    }

    #[test]
    fn fom_pod_rom_round_trip_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(main_with_args(args(dir.path(), "fom", &[])), 0);
        assert_eq!(main_with_args(args(dir.path(), "pod", &[])), 0);
        let first = fs::read(dir.path().join("singular_values.csv")).unwrap();
        assert_eq!(main_with_args(args(dir.path(), "pod", &[])), 0);
        assert_eq!(first, fs::read(dir.path().join("singular_values.csv")).unwrap());
        assert_eq!(main_with_args(args(dir.path(), "rom", &["--r-list", "1,2,500"])), 0);
        let table = fs::read_to_string(dir.path().join("errors.csv")).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].ends_with(",ok") && lines[3].contains("skipped"));
        let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        for s in ["[config]", "[fom]", "[pod]", "[rom]", "mesh_hash"] {
            assert!(manifest.contains(s), "{s}");
        }
    }

    #[test]
    fn config_errors_exit_nonzero() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(main_with_args(args(dir.path(), "fom", &["--set", "dt=-1"])), 2);
        assert_eq!(main_with_args(args(dir.path(), "fom", &["--preset", "nope"])), 2);
        // pod without snapshots
        assert_eq!(main_with_args(args(dir.path(), "pod", &[])), 2);
    }

    #[test]
    fn empty_snapshot_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(main_with_args(args(dir.path(), "fom", &[])), 0);
        fs::write(dir.path().join("snapshots_u.bin"), b"").unwrap();
        assert_eq!(main_with_args(args(dir.path(), "pod", &[])), 2);
    }

    #[test]
    fn verify_passes_and_negative_control_fails() {
        let dir = tempfile::tempdir().unwrap();
        let extra = ["--trace-samples", "20"];
        assert_eq!(main_with_args(args(dir.path(), "verify", &extra)), 0);
        let first = fs::read(dir.path().join("verify_report.csv")).unwrap();
        assert_eq!(main_with_args(args(dir.path(), "verify", &extra)), 0);
        assert_eq!(first, fs::read(dir.path().join("verify_report.csv")).unwrap());
        let mut bad = extra.to_vec();
        bad.push("--corrupt");
        assert_eq!(main_with_args(args(dir.path(), "verify", &bad)), 1);
    }
}
