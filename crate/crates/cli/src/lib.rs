//! Front end for `kerr-core`: resolves a [`RunConfig`] from a config file
//! and flags, runs one command and writes its data files plus a
//! `manifest.json` from which the run can be repeated exactly.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use kerr_core::analytic::{
    fock_evolve, mean_a_exact, ordered_double_average, positive_p_stochastic_average, q_function, stochastic_average_resummed,
    GridSpec,
};
use kerr_core::ensemble::{averaging_order_experiment, divergence_statistics, run_ensemble};
use kerr_core::sde::{fp_from_langevin, kerr_reference_fp, negative_diffusion_check, DiffusionClass, KerrModel, Representation};
use kerr_core::{Complex64, PhasePoint64};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use config::{Command, ConfigError, OutputFormat, RawConfig, RunConfig, Source};
use output::{extension, schema_id, Artifacts, Cell, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] kerr_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(kerr_core::Error::InvalidParameter { .. }) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kerr", version, about = "Stochastic and analytic experiments for the Kerr oscillator")]
pub struct Cli {
    /// key=value config file, or a manifest.json from an earlier run.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Sub>,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Sub {
    /// Ensemble moments with fixed-start and exact overlays.
    Simulate,
    /// Exact, fixed-start and ordered-series ⟨a(t)⟩ on a time grid.
    Analytic,
    /// The three averaging orders side by side.
    Compare,
    /// Langevin to Fokker–Planck round-trip residuals.
    Fpcheck,
    /// Q-function grids of the evolved coherent state.
    Qgrid,
    /// Divergence fractions and median times over a list of β.
    Diverge,
}

impl Sub {
    fn name(self) -> &'static str {
        match self {
            Sub::Simulate => "simulate",
            Sub::Analytic => "analytic",
            Sub::Compare => "compare",
            Sub::Fpcheck => "fpcheck",
            Sub::Qgrid => "qgrid",
            Sub::Diverge => "diverge",
        }
    }
}

/// Every config key as a flag. Values are kept as text and parsed with the
/// file values so both follow the same rules.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<String>,
    /// q | positive-p
    #[arg(long, global = true)]
    pub representation: Option<String>,
    /// fixed-beta | sample-q0 | delta-positive-p
    #[arg(long, global = true)]
    pub initial: Option<String>,
    /// Fixed start, `a+bi`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// Coherent amplitude, `a+bi`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha0: Option<String>,
    #[arg(long = "n-traj", global = true, allow_hyphen_values = true)]
    pub n_traj: Option<String>,
    #[arg(long = "t-final", global = true, allow_hyphen_values = true)]
    pub t_final: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub dt: Option<String>,
    #[arg(long = "record-stride", global = true, allow_hyphen_values = true)]
    pub record_stride: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub threshold: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub seed: Option<String>,
    /// heun | pathwise
    #[arg(long, global = true)]
    pub integrator: Option<String>,
    /// `start:step:stop` or a comma list.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub times: Option<String>,
    /// Q-grid times, `start:step:stop` or a comma list.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub extent: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub res: Option<String>,
    /// Comma list of `a+bi`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub betas: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub points: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tolerance: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// csv | json-lines
    #[arg(long, global = true)]
    pub format: Option<String>,
}

impl Flags {
    fn pairs(&self) -> [(&'static str, &Option<String>); 21] {
        [
            ("mu", &self.mu),
            ("representation", &self.representation),
            ("initial", &self.initial),
            ("beta", &self.beta),
            ("alpha0", &self.alpha0),
            ("n-traj", &self.n_traj),
            ("t-final", &self.t_final),
            ("dt", &self.dt),
            ("record-stride", &self.record_stride),
            ("threshold", &self.threshold),
            ("seed", &self.seed),
            ("integrator", &self.integrator),
            ("times", &self.times),
            ("t", &self.t),
            ("extent", &self.extent),
            ("res", &self.res),
            ("betas", &self.betas),
            ("points", &self.points),
            ("tolerance", &self.tolerance),
            ("out", &self.out),
            ("format", &self.format),
        ]
    }
}

/// Merge the config file (if any) and the flags, flags winning.
pub fn parse_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut raw = RawConfig::default();
    if let Some(path) = &cli.config {
        raw.load_file(path)?;
    }
    if let Some(sub) = cli.command {
        raw.set("command", sub.name(), Source::Flag)?;
    }
    for (key, value) in cli.flags.pairs() {
        if let Some(v) = value {
            raw.set(key, v, Source::Flag)?;
        }
    }
    RunConfig::resolve(&raw)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema: String,
    code_version: &'static str,
    command: &'static str,
    seed: u64,
    config: &'a std::collections::BTreeMap<String, String>,
    outputs: &'a [String],
    summary: Value,
}

/// What a finished run reports back.
#[derive(Debug)]
pub struct RunOutcome {
    pub outputs: Vec<String>,
    pub summary: Value,
}

/// Execute `cfg`, writing data files and finally `manifest.json` into
/// `cfg.out`. On error everything written by this run is removed.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let mut art = Artifacts::create(&cfg.out)?;
    match execute(cfg, &mut art) {
        Ok(summary) => {
            let outputs = art.files().to_vec();
            let manifest = Manifest {
                schema: schema_id("manifest"),
                code_version: env!("CARGO_PKG_VERSION"),
                command: cfg.command.name(),
                seed: cfg.ensemble.master_seed,
                config: &cfg.resolved,
                outputs: &outputs,
                summary: summary.clone(),
            };
            let written = art.write_with("manifest.json", |w| {
                serde_json::to_writer_pretty(&mut *w, &manifest)?;
                writeln!(w)
            });
            if let Err(e) = written {
                art.discard();
                return Err(e.into());
            }
            Ok(RunOutcome { outputs, summary })
        }
        Err(e) => {
            art.discard();
            Err(e)
        }
    }
}

fn execute(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    match cfg.command {
        Command::Simulate => simulate(cfg, art),
        Command::Analytic => analytic(cfg, art),
        Command::Compare => compare(cfg, art),
        Command::Fpcheck => fpcheck(cfg, art),
        Command::Qgrid => qgrid(cfg, art),
        Command::Diverge => diverge(cfg, art),
    }
}

fn model(cfg: &RunConfig) -> Result<KerrModel<f64>, CliError> {
    Ok(KerrModel::new(cfg.mu, cfg.representation)?)
}

fn re_im(z: Complex64) -> [Cell; 2] {
    [z.re.into(), z.im.into()]
}

fn simulate(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let model = model(cfg)?;
    let s = run_ensemble(&model, &cfg.ensemble)?;
    let center = cfg.ensemble.initial_mode.center();
    let mut table = Table::new(
        "simulate",
        &[
            "t",
            "re_mean_alpha",
            "im_mean_alpha",
            "stderr_re",
            "stderr_im",
            "re_mean_ap_a",
            "im_mean_ap_a",
            "n_alive",
            "re_fixed_start",
            "im_fixed_start",
            "re_exact",
            "im_exact",
        ],
    );
    for k in 0..s.len() {
        let t = s.times[k];
        let fixed = match cfg.representation {
            Representation::Q => stochastic_average_resummed(center, cfg.mu, t),
            Representation::PositiveP => positive_p_stochastic_average(center, cfg.mu, t),
        };
        let mut row = vec![
            t.into(),
            s.mean_alpha[k].re.into(),
            s.mean_alpha[k].im.into(),
            s.stderr_re[k].into(),
            s.stderr_im[k].into(),
            s.mean_alphaplus_alpha[k].re.into(),
            s.mean_alphaplus_alpha[k].im.into(),
            s.n_alive[k].into(),
        ];
        row.extend(re_im(fixed));
        row.extend(re_im(mean_a_exact(center, cfg.mu, t)));
        table.push(row);
    }
    art.write_table(&table, cfg.format)?;
    Ok(json!({
        "n_trajectories": s.n_trajectories,
        "n_diverged": s.divergence_times.len(),
        "bias_warning": s.bias_warning,
        "truncated_at": s.truncated_at,
        "records": s.len(),
    }))
}

fn analytic(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let a0 = cfg.alpha0;
    let mut table = Table::new(
        "analytic",
        &[
            "t",
            "re_exact",
            "im_exact",
            "re_fixed_start",
            "im_fixed_start",
            "re_ordered",
            "im_ordered",
            "ordered_terms",
            "ordered_converged",
            "re_positive_p",
            "im_positive_p",
        ],
    );
    let mut n_unconverged = 0usize;
    for &t in &cfg.times {
        let ordered = ordered_double_average(a0, cfg.mu, t, cfg.tolerance)?;
        n_unconverged += usize::from(!ordered.converged);
        let mut row = vec![t.into()];
        row.extend(re_im(mean_a_exact(a0, cfg.mu, t)));
        row.extend(re_im(stochastic_average_resummed(a0, cfg.mu, t)));
        row.extend(re_im(ordered.value));
        row.push(ordered.series_terms_used.into());
        row.push(ordered.converged.into());
        row.extend(re_im(positive_p_stochastic_average(a0, cfg.mu, t)));
        table.push(row);
    }
    art.write_table(&table, cfg.format)?;
    Ok(json!({ "times": cfg.times.len(), "ordered_unconverged": n_unconverged }))
}

fn compare(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let report = averaging_order_experiment(cfg.alpha0, cfg.mu, &cfg.ensemble)?;
    art.write_with("compare_report.json", |w| {
        let doc = json!({ "schema": schema_id("compare-report"), "report": report });
        serde_json::to_writer_pretty(&mut *w, &doc)?;
        writeln!(w)
    })?;
    let mut table = Table::new(
        "compare",
        &[
            "t",
            "re_fixed_beta",
            "im_fixed_beta",
            "re_fixed_start",
            "im_fixed_start",
            "re_sampled",
            "im_sampled",
            "sampled_n_alive",
            "re_ordered",
            "im_ordered",
            "re_exact",
            "im_exact",
        ],
    );
    let (fb, sb, ob) = (&report.fixed_beta, &report.sampled, &report.ordered);
    for (k, &t) in ob.times.iter().enumerate() {
        let pair = |v: Option<&Complex64>| v.map_or([Cell::Empty, Cell::Empty], |z| re_im(*z));
        let mut row = vec![t.into()];
        row.extend(pair(fb.series.mean_alpha.get(k)));
        row.extend(pair(fb.resummed.get(k)));
        row.extend(pair(sb.series.mean_alpha.get(k)));
        row.push(sb.series.n_alive.get(k).copied().into());
        row.extend(re_im(ob.value[k]));
        row.extend(re_im(ob.exact[k]));
        table.push(row);
    }
    art.write_table(&table, cfg.format)?;
    Ok(json!({
        "fixed_beta_first_disagreement": fb.first_disagreement,
        "sampled_divergence_fraction": sb.divergence_fraction,
        "sampled_blowup_time": sb.blowup_time,
        "sampled_unreliable_times": sb.unreliable_times.len(),
        "ordered_max_deviation": ob.max_deviation,
        "ordered_all_converged": ob.all_converged,
    }))
}

/// Deterministic spread of `n` doubled-phase-space points with `|α|, |α⁺| ≤ 4`.
/// `α⁺` is deliberately not `α*`.
fn fp_sample_points(n: usize) -> Vec<PhasePoint64> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let s = (k as f64 + 0.5) / n as f64;
            let r = 4.0 * s.sqrt();
            let th = golden * k as f64;
            let alpha = Complex64::from_polar(r, th);
            let alpha_plus = Complex64::from_polar(4.0 * (1.0 - s).sqrt(), -0.7 * th + 1.0);
            PhasePoint64::new(alpha, alpha_plus)
        })
        .collect()
}

fn fpcheck(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let points = fp_sample_points(cfg.points);
    let mut table = Table::new(
        "fpcheck",
        &[
            "representation",
            "re_alpha",
            "im_alpha",
            "re_alpha_plus",
            "im_alpha_plus",
            "residual",
            "d_cross",
            "d_abs",
            "negative_diffusion",
        ],
    );
    let mut max_residual = 0.0f64;
    let mut negative = Vec::new();
    for (code, rep) in [(0usize, Representation::Q), (1, Representation::PositiveP)] {
        let model = KerrModel::new(cfg.mu, rep)?;
        let fp = fp_from_langevin(&model);
        let report = negative_diffusion_check(&fp, &points)?;
        let mut count = 0usize;
        for (p, sample) in points.iter().zip(&report.samples) {
            let residual = fp.at(p)?.max_relative_residual(&kerr_reference_fp(&model, p));
            max_residual = max_residual.max(residual);
            let is_negative = sample.class == DiffusionClass::Negative;
            count += usize::from(is_negative);
            let mut row = vec![code.into()];
            row.extend(re_im(p.alpha));
            row.extend(re_im(p.alpha_plus));
            row.extend([residual.into(), sample.d_cross.into(), sample.d_abs.into(), is_negative.into()]);
            table.push(row);
        }
        negative.push(count);
    }
    art.write_table(&table, cfg.format)?;
    println!("max residual: {max_residual:e}");
    if !(max_residual < cfg.tolerance) {
        return Err(CliError::CheckFailed(format!(
            "max residual {max_residual:e} is not below tolerance {:e}",
            cfg.tolerance
        )));
    }
    Ok(json!({
        "points": cfg.points,
        "max_residual": max_residual,
        "representation_codes": { "0": "q", "1": "positive-p" },
        "negative_diffusion_q": negative[0],
        "negative_diffusion_positive_p": negative[1],
    }))
}

fn qgrid(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let spec = GridSpec::square(cfg.extent, cfg.res);
    let mut grids = Vec::new();
    for (k, &t) in cfg.qgrid_times.iter().enumerate() {
        let psi = fock_evolve(cfg.alpha0, cfg.mu, t)?;
        let grid = q_function(&psi, spec)?;
        let stem = format!("qgrid_{k:03}");
        let data = format!("{stem}.{}", extension(cfg.format));
        art.write_with(&data, |w| match cfg.format {
            OutputFormat::Csv => {
                writeln!(w, "# schema: {}", schema_id("qgrid"))?;
                grid.write_csv(w)
            }
            OutputFormat::JsonLines => {
                writeln!(w, "{}", json!({ "schema": schema_id("qgrid"), "t": t, "columns": ["x", "y", "Q"] }))?;
                for iy in 0..spec.ny {
                    for ix in 0..spec.nx {
                        writeln!(w, "{}", json!({ "x": spec.x(ix), "y": spec.y(iy), "Q": grid.get(ix, iy) }))?;
                    }
                }
                Ok(())
            }
        })?;
        art.write_with(&format!("{stem}.bin"), |w| grid.write_binary(w))?;
        let maxima: Vec<[f64; 3]> = grid.local_maxima(0.1).iter().map(|(z, q)| [z.re, z.im, *q]).collect();
        grids.push(json!({
            "t": t,
            "file": stem,
            "integral": grid.integral(),
            "max": grid.max_value(),
            "boundary_max": grid.boundary_max(),
            "local_maxima": maxima,
        }));
    }
    Ok(json!({ "grids": grids }))
}

fn diverge(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let table_core = divergence_statistics(&model(cfg)?, &cfg.betas, &cfg.ensemble)?;
    let mut table = Table::new(
        "diverge",
        &["beta_re", "beta_im", "n_trajectories", "n_diverged", "fraction", "median_time"],
    );
    for r in &table_core.rows {
        let mut row = re_im(r.beta).to_vec();
        row.extend([
            r.n_trajectories.into(),
            r.n_diverged.into(),
            r.fraction.into(),
            // No median: fewer than half diverged before t_final.
            Cell::Num(r.median_time.unwrap_or(f64::INFINITY)),
        ]);
        table.push(row);
    }
    art.write_table(&table, cfg.format)?;
    Ok(json!({
        "t_final": table_core.t_final,
        "threshold": table_core.threshold,
        "median_non_increasing_in_beta": table_core.median_non_increasing_in_beta(),
    }))
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with_args<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if cli.command.is_none() && cli.config.is_none() {
        eprintln!("error: no command given (simulate, analytic, compare, fpcheck, qgrid or diverge)");
        return EXIT_CONFIG;
    }
    let cfg = match parse_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            for f in &outcome.outputs {
                println!("wrote {}", cfg.out.join(f).display());
            }
            println!("wrote {}", cfg.out.join("manifest.json").display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, ConfigError> {
        parse_config(&Cli::try_parse_from(args).unwrap())
    }

    #[test]
    fn flags_after_the_subcommand() {
        let cfg = parse(&["kerr", "simulate", "--mu", "1", "--beta", "0.001+0.1i", "--seed", "42"]).unwrap();
        assert_eq!(cfg.command, Command::Simulate);
        assert_eq!(cfg.ensemble.master_seed, 42);
        assert_eq!(cfg.resolved["beta"], "0.001+0.1i");
    }

    #[test]
    fn negative_dt_names_dt() {
        let err = parse(&["kerr", "simulate", "--dt", "-1"]).unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "dt"), "{err}");
    }

    #[test]
    fn sample_points_are_off_the_conjugate_plane() {
        let pts = fp_sample_points(50);
        assert_eq!(pts.len(), 50);
        assert!(pts.iter().all(|p| (p.alpha_plus - p.alpha.conj()).norm() > 1e-6));
        assert!(pts.iter().all(|p| p.alpha.norm() <= 4.0 && p.alpha_plus.norm() <= 4.0));
    }

    #[test]
    fn flag_table_covers_every_key_but_command() {
        let flags = Flags::default();
        let keys: Vec<&str> = flags.pairs().iter().map(|(k, _)| *k).collect();
        for (k, _) in config::KEYS {
            assert!(*k == "command" || keys.contains(k), "{k}");
        }
        assert_eq!(keys.len() + 1, config::KEYS.len());
    }
}
