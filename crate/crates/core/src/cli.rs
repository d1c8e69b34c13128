//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or other runtime failure, 2 invalid
//! configuration or arguments, 3 unphysical state, 4 at least one sweep
//! cell failed (the failure is recorded in the cell's `error` column).
//! Diagnostics go to standard error; standard output carries only results.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{self, Exec, SweepGrid};
use crate::config::RunConfig;
use crate::error::Error;
use crate::fmt::sig12;
use crate::keyrate::secret_key_rate;
use crate::montecarlo::{self, Tolerances};
use crate::plot::{self, BarChart, Labels};
use crate::table::{csv_text, Metadata, SweepResult, Tabular};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_UNPHYSICAL: i32 = 3;
pub const EXIT_CELL_FAILED: i32 = 4;

pub const THREADS_ENV: &str = "CVQKD_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "cvqkd",
    version,
    about = "CV-QKD key rates over a passive-splitter access network"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// INI-style configuration file; built-in defaults when omitted
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the result table here instead of standard output
    #[arg(long, global = true)]
    pub out_csv: Option<PathBuf>,
    /// Write the full result with metadata as JSON
    #[arg(long, global = true)]
    pub out_json: Option<PathBuf>,
    /// Write an SVG figure
    #[arg(long, global = true)]
    pub plot: Option<PathBuf>,
    /// Monte Carlo seed, overriding the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads: a positive count or `auto`
    #[arg(long, global = true)]
    pub threads: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Key rate at the configured operating point
    Keyrate,
    /// Key rate over a distance x ONU-count grid
    Sweep,
    /// Tolerable excess noise over a distance x ONU-count grid
    Tolerance,
    /// Downstream versus point-to-point key rates at fixed fiber losses
    Compare,
    /// Optimal modulation variance over a distance x ONU-count grid
    Optimize,
    /// Monte Carlo prepare-and-measure run validated against the model
    Mc,
}

/// A failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn config_failure(message: String) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message,
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Argument(_) | Error::Domain { .. } | Error::BracketTooSmall { .. } => EXIT_CONFIG,
        Error::Unphysical { .. } | Error::DegenerateMeasurement { .. } => EXIT_UNPHYSICAL,
        Error::Cell { .. } => EXIT_CELL_FAILED,
        Error::Numerical(_) | Error::Estimation(_) => EXIT_RUNTIME,
    }
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main_exit_code() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn thread_count(flag: Option<&str>) -> Result<usize, Failure> {
    let env = std::env::var(THREADS_ENV).ok();
    let (raw, source) = match (flag, env.as_deref()) {
        (Some(f), _) => (f.to_string(), "--threads"),
        (None, Some(e)) => (e.to_string(), THREADS_ENV),
        (None, None) => return Ok(0),
    };
    match raw.trim() {
        "auto" => Ok(0),
        s => match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(config_failure(format!(
                "{source} = `{raw}` must be a positive integer or `auto`"
            ))),
        },
    }
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    let mut cfg = match &cli.common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_failure(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::with_all_defaults(),
    };
    if let (Some(seed), Some(mc)) = (cli.common.seed, cfg.mc.as_mut()) {
        mc.seed = seed;
    }
    let threads = thread_count(cli.common.threads.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure {
            code: EXIT_RUNTIME,
            message: format!("cannot start thread pool: {e}"),
        })?;
    pool.install(|| dispatch(cli, &cfg))
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<i32, Failure> {
    let out = &cli.common;
    match cli.command {
        Command::Keyrate => cmd_keyrate(cfg, out),
        Command::Sweep => cmd_sweep(cfg, out),
        Command::Tolerance => cmd_tolerance(cfg, out),
        Command::Compare => cmd_compare(cfg, out),
        Command::Optimize => cmd_optimize(cfg, out),
        Command::Mc => cmd_mc(cfg, out),
    }
}

fn missing(section: &str) -> Failure {
    config_failure(format!("config has no [{section}] section"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure {
        code: EXIT_RUNTIME,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

/// Writes to standard output. A reader that closed the pipe early (as with
/// `| head`) ends output quietly instead of failing the run.
fn write_stdout(text: &str) -> Result<(), Failure> {
    let mut lock = std::io::stdout().lock();
    match lock.write_all(text.as_bytes()).and_then(|()| lock.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure {
            code: EXIT_RUNTIME,
            message: format!("cannot write to standard output: {e}"),
        }),
        _ => Ok(()),
    }
}

/// CSV to the requested file, or to standard output.
fn emit_csv(out: &Common, csv: &str) -> Result<(), Failure> {
    match &out.out_csv {
        Some(p) => write_file(p, csv),
        None => write_stdout(csv),
    }
}

/// JSON document with the effective configuration embedded, so a run can
/// be reproduced from its own output.
fn emit_json<T: Serialize>(out: &Common, cfg: &RunConfig, body: &T) -> Result<(), Failure> {
    let Some(path) = &out.out_json else {
        return Ok(());
    };
    let mut value = serde_json::to_value(body).map_err(|e| Failure {
        code: EXIT_RUNTIME,
        message: format!("cannot serialize result: {e}"),
    })?;
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("config".into(), serde_json::Value::String(cfg.to_ini()));
    }
    let mut text = serde_json::to_string_pretty(&value).expect("json value serializes");
    text.push('\n');
    write_file(path, &text)
}

fn finish_sweep<C: Tabular + Serialize>(
    out: &Common,
    cfg: &RunConfig,
    result: &SweepResult<C>,
    failed: usize,
    svg: impl FnOnce() -> String,
) -> Result<i32, Failure> {
    emit_csv(out, &result.to_csv())?;
    emit_json(out, cfg, result)?;
    if let Some(p) = &out.plot {
        write_file(p, &svg())?;
    }
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see the error column", result.cells.len());
        return Ok(EXIT_CELL_FAILED);
    }
    Ok(EXIT_OK)
}

fn cmd_keyrate(cfg: &RunConfig, out: &Common) -> Result<i32, Failure> {
    let report = secret_key_rate(&cfg.params)?;
    let list = |v: &[f64]| v.iter().map(|x| sig12(*x)).collect::<Vec<_>>().join(", ");
    let lines = [
        ("mutual_information_bits", sig12(report.mutual_information_bits)),
        ("holevo_bits", sig12(report.holevo_bits)),
        ("key_rate_bits", sig12(report.key_rate_bits)),
        ("key_rate_clamped", sig12(report.key_rate_clamped)),
        ("nus_joint", list(&report.nus_joint)),
        ("nus_conditional", list(&report.nus_conditional)),
        ("t_tot", sig12(report.totals.t_tot)),
        ("epsilon_tot", sig12(report.totals.epsilon_tot)),
    ];
    write_stdout(&lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect::<String>())?;
    if let Some(p) = &out.out_csv {
        let header = [
            "mutual_information [bits/symbol]",
            "holevo [bits/symbol]",
            "key_rate [bits/symbol]",
            "key_rate_clamped [bits/symbol]",
            "t_tot [ratio]",
            "epsilon_tot [SNU]",
        ];
        let row = [
            report.mutual_information_bits,
            report.holevo_bits,
            report.key_rate_bits,
            report.key_rate_clamped,
            report.totals.t_tot,
            report.totals.epsilon_tot,
        ]
        .map(sig12);
        write_file(p, &csv_text(&header, [row]))?;
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        metadata: Metadata,
        report: &'a crate::KeyRateReport,
    }
    emit_json(
        out,
        cfg,
        &Doc {
            metadata: Metadata::new("keyrate", &cfg.params),
            report: &report,
        },
    )?;
    if out.plot.is_some() {
        eprintln!("note: keyrate has no plot; --plot ignored");
    }
    Ok(EXIT_OK)
}

fn grid(distances: &[f64], onus: &[u32], cfg: &RunConfig) -> Result<SweepGrid, Failure> {
    Ok(SweepGrid::new(distances.to_vec(), onus.to_vec(), cfg.params.clone())?)
}

fn as_f64(ns: &[u32]) -> Vec<f64> {
    ns.iter().map(|&n| f64::from(n)).collect()
}

fn cmd_sweep(cfg: &RunConfig, out: &Common) -> Result<i32, Failure> {
    let block = cfg.sweep.as_ref().ok_or_else(|| missing("sweep"))?;
    let g = grid(&block.distances_km, &block.onu_counts, cfg)?;
    let result = analysis::keyrate_grid(&g, Exec::Parallel);
    let failed = result.cells.iter().filter(|c| c.error.is_some()).count();
    finish_sweep(out, cfg, &result, failed, || {
        let values: Vec<Option<f64>> = result.cells.iter().map(|c| c.key_rate_clamped).collect();
        plot::heatmap(
            &Labels {
                title: "Secret key rate",
                x: "number of ONUs [count]",
                y: "distance [km]",
                params_hash: &result.metadata.params_hash,
            },
            "K [bits/symbol]",
            &as_f64(&g.onu_counts),
            &g.distances_km,
            &values,
        )
    })
}

fn cmd_tolerance(cfg: &RunConfig, out: &Common) -> Result<i32, Failure> {
    let block = cfg.tolerance.as_ref().ok_or_else(|| missing("tolerance"))?;
    let g = grid(&block.distances_km, &block.onu_counts, cfg)?;
    let result = analysis::tolerance_grid(&g, block.eps_max, Exec::Parallel);
    let failed = result.cells.iter().filter(|c| c.error.is_some()).count();
    finish_sweep(out, cfg, &result, failed, || {
        let values: Vec<Option<f64>> = result.cells.iter().map(|c| c.eps_star).collect();
        plot::heatmap(
            &Labels {
                title: "Tolerable excess noise",
                x: "number of ONUs [count]",
                y: "distance [km]",
                params_hash: &result.metadata.params_hash,
            },
            "eps* [SNU]",
            &as_f64(&g.onu_counts),
            &g.distances_km,
            &values,
        )
    })
}

fn cmd_compare(cfg: &RunConfig, out: &Common) -> Result<i32, Failure> {
    let block = cfg.compare.as_ref().ok_or_else(|| missing("compare"))?;
    let result = analysis::compare_sweep(&cfg.params, &block.losses_db, &block.onu_counts, Exec::Parallel)?;
    let failed = result.cells.iter().filter(|c| c.error.is_some()).count();
    finish_sweep(out, cfg, &result, failed, || {
        let groups: Vec<String> = block.losses_db.iter().map(|l| format!("{l} dB")).collect();
        let series: Vec<String> = block.onu_counts.iter().map(|n| format!("{n} ONUs")).collect();
        let per_group: Vec<_> = result.cells.chunks(block.onu_counts.len()).collect();
        let bars: Vec<Vec<Option<f64>>> = per_group
            .iter()
            .map(|g| g.iter().map(|c| c.key_rate_downstream).collect())
            .collect();
        let ratio: Vec<Vec<Option<f64>>> = per_group
            .iter()
            .map(|g| g.iter().map(|c| c.ratio_percent).collect())
            .collect();
        plot::grouped_bars(
            &Labels {
                title: "Downstream versus point-to-point",
                x: "fiber loss [dB]",
                y: "K [bits/symbol]",
                params_hash: &result.metadata.params_hash,
            },
            &BarChart {
                groups: &groups,
                series: &series,
                bars: &bars,
                ratio: &ratio,
                ratio_label: "ratio to point-to-point [%]",
            },
        )
    })
}

fn cmd_optimize(cfg: &RunConfig, out: &Common) -> Result<i32, Failure> {
    let block = cfg.optimize.as_ref().ok_or_else(|| missing("optimize"))?;
    if !(block.v_mod_lo > 0.0 && block.v_mod_hi > block.v_mod_lo && block.v_mod_hi.is_finite()) {
        return Err(config_failure(format!(
            "[optimize] bracket v_mod_lo = {}, v_mod_hi = {} violates 0 < v_mod_lo < v_mod_hi",
            block.v_mod_lo, block.v_mod_hi
        )));
    }
    let g = grid(&block.distances_km, &block.onu_counts, cfg)?;
    let result = analysis::optimize_grid(&g, (block.v_mod_lo, block.v_mod_hi), Exec::Parallel);
    let failed = result.cells.iter().filter(|c| c.error.is_some()).count();
    finish_sweep(out, cfg, &result, failed, || {
        let series: Vec<(String, Vec<(f64, f64)>)> = g
            .distances_km
            .iter()
            .zip(result.cells.chunks(g.onu_counts.len()))
            .map(|(d, cells)| {
                let pts = cells
                    .iter()
                    .map(|c| (f64::from(c.n_onus), c.v_mod_opt.unwrap_or(f64::NAN)))
                    .collect();
                (format!("{d} km"), pts)
            })
            .collect();
        plot::line_plot(
            &Labels {
                title: "Optimal modulation variance",
                x: "number of ONUs [count]",
                y: "optimal V_mod [SNU]",
                params_hash: &result.metadata.params_hash,
            },
            &series,
        )
    })
}

fn cmd_mc(cfg: &RunConfig, out: &Common) -> Result<i32, Failure> {
    let block = cfg.mc.as_ref().ok_or_else(|| missing("mc"))?;
    let report = montecarlo::validate(
        &cfg.params,
        block.n_samples,
        block.seed,
        Tolerances::default(),
        Exec::Parallel,
    )?;
    if let Some(p) = &out.out_csv {
        let ds = montecarlo::simulate(&cfg.params, block.n_samples, block.seed, Exec::Parallel)?;
        write_file(p, &ds.to_csv())?;
    }
    let checks = csv_text(
        &["check", "observed", "expected", "standard_error", "tolerance", "passed"],
        report.checks.iter().map(|c| {
            [
                c.name.to_string(),
                sig12(c.observed),
                sig12(c.expected),
                c.standard_error.map(sig12).unwrap_or_default(),
                sig12(c.tolerance),
                c.passed.to_string(),
            ]
        }),
    );
    write_stdout(&checks)?;
    #[derive(Serialize)]
    struct Doc<'a> {
        metadata: Metadata,
        report: &'a montecarlo::ValidationReport,
    }
    emit_json(
        out,
        cfg,
        &Doc {
            metadata: Metadata::new("mc_validate", &cfg.params),
            report: &report,
        },
    )?;
    if out.plot.is_some() {
        eprintln!("note: mc has no plot; --plot ignored");
    }
    if !report.all_passed {
        eprintln!("warning: at least one Monte Carlo check is outside tolerance");
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Unphysical { nu: 0.5 }), EXIT_UNPHYSICAL);
        assert_eq!(
            exit_code(&Error::DegenerateMeasurement { variance: 0.0 }),
            EXIT_UNPHYSICAL
        );
        assert_eq!(exit_code(&Error::Estimation("x".into())), EXIT_RUNTIME);
    }

    #[test]
    fn thread_flag_parsing() {
        assert_eq!(thread_count(Some("auto")).unwrap(), 0);
        assert_eq!(thread_count(Some("3")).unwrap(), 3);
        assert_eq!(thread_count(Some("0")).unwrap_err().code, EXIT_CONFIG);
        assert_eq!(thread_count(Some("many")).unwrap_err().code, EXIT_CONFIG);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
