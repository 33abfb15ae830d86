//! Command-line front end.
//!
//! Subcommands:
//! - `sweep` (alias `run`): one parameter sweep; writes `sweep_<axis>.csv`,
//!   `trials_<axis>.csv`, optional `sweep_<axis>.dat` and `manifest.json`.
//! - `trial`: a single receiver with a verbose trace.
//! - `oracle`: proximity lower-bound error over a floor grid.
//! - `kmap`: number of covering LEDs over a floor grid.
//! - `replay`: rerun a sweep from its manifest.
//!
//! Configuration precedence is flags over the config file over defaults. The
//! output directory falls back to `$VLCPOS_OUT` when `--out` is absent.

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::config::{parse_values, ConfigError, RunConfig, SweepAxis, UdSampling};
use crate::eval::{self, EvalError, Scenario, SweepResult};
use crate::positioning::Estimator;
use crate::recovery;
use crate::signal;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SWEEP_CSV_HEADER: &str =
    "axis_value,mpe_m,mpe_stderr,mean_sre,sre_stderr,min_mpe_m,no_detection_rate,n_trials";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error("--values: {0}")]
    Values(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "vlcpos", version, about = "VLC indoor positioning via compressed sensing: simulation and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep one parameter and write MPE/SRE curves.
    #[command(alias = "run")]
    Sweep(SweepArgs),
    /// Run a single receiver and print the pipeline trace.
    Trial(TrialArgs),
    /// Map the proximity lower-bound error over the floor.
    Oracle(MapArgs),
    /// Map the number of covering LEDs over the floor.
    Kmap(MapArgs),
    /// Re-run a sweep from a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Configuration file (`key = value`, dotted sections).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", env = "VLCPOS_OUT")]
    pub out: Option<PathBuf>,
    /// Distance threshold for accepting detected LEDs (m).
    #[arg(long = "d-th", value_name = "METERS")]
    pub d_th: Option<f64>,
    #[arg(long, value_name = "algorithm1|area-centroid")]
    pub estimator: Option<Estimator>,
    /// Receivers per sweep point.
    #[arg(long = "n-ud")]
    pub n_ud: Option<usize>,
    /// Received SNR (dB).
    #[arg(long)]
    pub snr: Option<f64>,
    /// Signature length M.
    #[arg(long)]
    pub m: Option<usize>,
    /// Coverage radius r (m).
    #[arg(long)]
    pub r: Option<f64>,
    /// LEDs per side.
    #[arg(long)]
    pub nled: Option<usize>,
    /// Worker threads (0: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Swept parameter.
    #[arg(long, value_name = "snr|m|r|nled")]
    pub sweep: Option<SweepAxis>,
    /// Axis values as start:step:stop or a comma list.
    #[arg(long, value_name = "SPEC")]
    pub values: Option<String>,
    #[arg(long = "ud-sampling", value_name = "shared|independent")]
    pub ud_sampling: Option<UdSampling>,
}

#[derive(Debug, Clone, Args)]
pub struct TrialArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Trial index used to derive placement and noise seeds.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Also write the signature matrix and received signal as CSV.
    #[arg(long)]
    pub export_signals: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MapArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Grid step (m).
    #[arg(long, default_value_t = 0.1)]
    pub resolution: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Config file (if any) with flag overrides applied.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.experiment.master_seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    if let Some(d) = common.d_th {
        cfg.algorithm.d_th = Some(d);
    }
    if let Some(e) = common.estimator {
        cfg.algorithm.estimator = e;
    }
    if let Some(n) = common.n_ud {
        cfg.experiment.n_ud = n;
    }
    if let Some(s) = common.snr {
        cfg.signal.snr_db = s;
    }
    if let Some(m) = common.m {
        cfg.signal.m = m;
    }
    if let Some(r) = common.r {
        cfg.scene.coverage_radius = r;
    }
    if let Some(n) = common.nled {
        cfg.scene.n_led_per_side = n;
    }
    if let Some(t) = common.threads {
        cfg.experiment.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn resolve_sweep_config(args: &SweepArgs) -> Result<RunConfig, CliError> {
    let mut cfg = resolve_config(&args.common)?;
    if let Some(axis) = args.sweep {
        if axis != cfg.experiment.axis {
            // Values from the file belong to the old axis.
            cfg.experiment.values = None;
        }
        cfg.experiment.axis = axis;
    }
    if let Some(v) = &args.values {
        cfg.experiment.values = Some(parse_values(v).map_err(CliError::Values)?);
    }
    if let Some(s) = args.ud_sampling {
        cfg.experiment.ud_sampling = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointManifest {
    pub axis_value: f64,
    pub k_max: usize,
    pub d_th: f64,
    pub ud_margin: f64,
    pub signature_seed: u64,
}

/// Everything needed to reproduce a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    pub config: RunConfig,
    pub config_text: String,
    pub points: Vec<PointManifest>,
    pub files: Vec<String>,
}

/// What a command produced.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(path))
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut s = String::new();
    writeln!(s, "{SWEEP_CSV_HEADER}").unwrap();
    for p in &result.points {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.axis_value, p.mpe, p.mpe_stderr, p.mean_sre, p.sre_stderr, p.min_mpe, p.no_detection_rate, p.n_trials
        )
        .unwrap();
    }
    s
}

fn sweep_plot_data(result: &SweepResult) -> String {
    let mut s = format!(
        "# {} mpe_m mpe_stderr mean_sre sre_stderr min_mpe_m\n",
        result.axis.name()
    );
    for p in &result.points {
        writeln!(
            s,
            "{} {} {} {} {} {}",
            p.axis_value, p.mpe, p.mpe_stderr, p.mean_sre, p.sre_stderr, p.min_mpe
        )
        .unwrap();
    }
    s
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn trials_csv(result: &SweepResult) -> String {
    let mut s = String::from(
        "point,axis_value,trial,true_x,true_y,est_x,est_y,position_error_m,sre,true_k,oracle_error_m,no_detection,placement_seed,noise_seed\n",
    );
    for (i, (p, trials)) in result.points.iter().zip(&result.trials).enumerate() {
        for (t, tr) in trials.iter().enumerate() {
            let nd = match tr.no_detection {
                None => "",
                Some(eval::NoDetection::Uncovered) => "uncovered",
                Some(eval::NoDetection::EmptyEstimate) => "empty_estimate",
            };
            writeln!(
                s,
                "{i},{},{t},{},{},{},{},{},{},{},{},{nd},{},{}",
                p.axis_value,
                tr.true_u.x,
                tr.true_u.y,
                opt(tr.est_u.map(|u| u.x)),
                opt(tr.est_u.map(|u| u.y)),
                opt(tr.position_error),
                opt(tr.sre),
                tr.true_k,
                opt(tr.oracle_error),
                tr.seeds.placement,
                tr.seeds.noise
            )
            .unwrap();
        }
    }
    s
}

/// Runs the sweep described by `cfg` and writes its artifacts.
pub fn run_sweep_command(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    let values = cfg.sweep_values();
    let axis = cfg.experiment.axis;
    let result = with_pool(cfg.experiment.threads, || {
        eval::run_sweep(cfg, axis, &values, cfg.experiment.n_ud)
    })??;

    let mut points = Vec::new();
    for &v in &values {
        let point_cfg = cfg.at_axis_value(v);
        let sc = Scenario::build(&point_cfg)?;
        points.push(PointManifest {
            axis_value: v,
            k_max: sc.gating.k_max,
            d_th: sc.gating.d_th,
            ud_margin: sc.ud_margin,
            signature_seed: sc.signatures.seed(),
        });
    }

    let stem = format!("sweep_{}", axis.flag());
    let mut files = vec![dir.join(format!("{stem}.csv")), dir.join(format!("trials_{}.csv", axis.flag()))];
    write_file(&files[0], &sweep_csv(&result))?;
    write_file(&files[1], &trials_csv(&result))?;
    if cfg.output.plot_data {
        let p = dir.join(format!("{stem}.dat"));
        write_file(&p, &sweep_plot_data(&result))?;
        files.push(p);
    }
    let manifest_path = dir.join("manifest.json");
    let manifest = Manifest {
        tool: "vlcpos".into(),
        version: TOOL_VERSION.into(),
        command: "sweep".into(),
        master_seed: cfg.experiment.master_seed,
        config: cfg.clone(),
        config_text: cfg.to_config_text(),
        points,
        files: files
            .iter()
            .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|source| CliError::Manifest {
        path: manifest_path.clone(),
        source,
    })?;
    write_file(&manifest_path, &json)?;
    files.push(manifest_path);

    let mut summary = format!("{}\n", SWEEP_CSV_HEADER);
    summary.push_str(sweep_csv(&result).lines().skip(1).collect::<Vec<_>>().join("\n").as_str());
    Ok(Outcome { files, summary })
}

pub fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Manifest {
        path: path.to_path_buf(),
        source,
    })
}

fn run_trial_command(args: &TrialArgs) -> Result<Outcome, CliError> {
    let cfg = resolve_config(&args.common)?;
    let sc = Scenario::build(&cfg)?;
    let (ud, noise) = eval::trial_seeds(cfg.experiment.master_seed, cfg.experiment.ud_sampling, 0, args.index);
    let trial = eval::run_trial(&sc, ud, noise)?;

    let mut s = String::new();
    writeln!(s, "scene: {} LEDs, K_max = {}, d_th = {} m, M = {}, SNR = {} dB", sc.leds.len(), sc.gating.k_max, sc.gating.d_th, sc.signatures.rows(), sc.snr_db).unwrap();
    writeln!(s, "seeds: signatures={} placement={} noise={}", trial.seeds.signatures, ud, noise).unwrap();
    writeln!(s, "receiver: ({:.4}, {:.4}), K = {}", trial.true_u.x, trial.true_u.y, trial.true_k).unwrap();
    writeln!(s, "true support: {:?}", trial.true_support).unwrap();
    writeln!(s, "noise variance: {:e}, OMP iterations: {}, dropped columns: {}", trial.noise_variance, trial.omp_iterations, trial.dropped_columns).unwrap();
    writeln!(s, "accepted: {:?}", trial.accepted).unwrap();
    match (trial.est_u, trial.position_error, trial.sre) {
        (Some(e), Some(err), Some(sre)) => {
            writeln!(s, "estimate: ({:.4}, {:.4}), error = {:.4} m, SRE = {}", e.x, e.y, err, sre).unwrap()
        }
        _ => writeln!(s, "no detection: {:?}", trial.no_detection).unwrap(),
    }
    if let Some(o) = trial.oracle_error {
        writeln!(s, "oracle error: {o:.4} m").unwrap();
    }

    let mut files = Vec::new();
    if args.export_signals {
        let dir = cfg.output.dir.clone();
        create_dir(&dir)?;
        let sig = &sc.signatures;
        let mut csv = (0..sig.cols()).map(|j| format!("led_{j}")).collect::<Vec<_>>().join(",");
        csv.push('\n');
        for r in 0..sig.rows() {
            let row: Vec<String> = sig.row(r).iter().map(u8::to_string).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        let p = dir.join("signatures.csv");
        write_file(&p, &csv)?;
        files.push(p);

        if trial.true_k > 0 {
            let coverage = sc.geometry.coverage_vector(&sc.leds, &trial.true_u);
            let x = signal::compose_x(&coverage, &sc.channel.gain_vector(&sc.leds, &trial.true_u)).map_err(EvalError::from)?;
            let clean = sig.mul_vec(x.as_slice()).map_err(EvalError::from)?;
            let rx = signal::synthesize(sig, &x, trial.noise_variance, noise).map_err(EvalError::from)?;
            let tol = sc.residual_tol.unwrap_or((sig.rows() as f64 * trial.noise_variance).sqrt());
            let est = recovery::omp(&rx.y, sig, sc.gating.k_max, tol).map_err(EvalError::from)?;
            writeln!(s, "OMP selection order: {:?}", est.selected).unwrap();
            writeln!(s, "residual trace: {:?}", est.residual_trace).unwrap();
            let mut csv = String::from("sample,y,clean\n");
            for (i, (y, c)) in rx.y.iter().zip(&clean).enumerate() {
                writeln!(csv, "{i},{y},{c}").unwrap();
            }
            let p = dir.join("received.csv");
            write_file(&p, &csv)?;
            files.push(p);
        }
    }
    Ok(Outcome { files, summary: s })
}

fn run_oracle_command(args: &MapArgs) -> Result<Outcome, CliError> {
    let cfg = resolve_config(&args.common)?;
    let geom = cfg.scene;
    geom.validate().map_err(EvalError::from)?;
    let leds = geom.led_grid();
    let map = with_pool(cfg.experiment.threads, || eval::oracle_map(&geom, &leds, args.resolution))??;
    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    let mut csv = String::from("x,y,oracle_error_m\n");
    let margin = cfg.experiment.ud_margin.unwrap_or(geom.coverage_radius);
    let (mut sum, mut n, mut uncovered) = (0.0, 0usize, 0usize);
    for (u, e) in &map {
        writeln!(csv, "{},{},{}", u.x, u.y, opt(*e)).unwrap();
        let interior = [u.x, u.y].iter().all(|c| *c >= margin && *c <= geom.floor_side - margin);
        match e {
            Some(v) if interior => {
                sum += v;
                n += 1;
            }
            None => uncovered += 1,
            _ => {}
        }
    }
    let p = dir.join("oracle_map.csv");
    write_file(&p, &csv)?;
    let summary = format!(
        "grid points: {}, uncovered: {}, mean oracle error inside margin {} m: {:.4} m",
        map.len(),
        uncovered,
        margin,
        sum / n.max(1) as f64
    );
    Ok(Outcome { files: vec![p], summary })
}

fn run_kmap_command(args: &MapArgs) -> Result<Outcome, CliError> {
    let cfg = resolve_config(&args.common)?;
    let geom = cfg.scene;
    let leds = geom.led_grid();
    let map = geom.k_map(&leds, args.resolution).map_err(EvalError::from)?;
    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    let mut csv = String::from("x,y,k\n");
    for (u, k) in &map {
        writeln!(csv, "{},{},{}", u.x, u.y, k).unwrap();
    }
    let p = dir.join("kmap.csv");
    write_file(&p, &csv)?;
    let margin = cfg.experiment.ud_margin.unwrap_or(geom.coverage_radius);
    let inside = |u: &crate::geometry::Point2| {
        [u.x, u.y].iter().all(|c| *c >= margin && *c <= geom.floor_side - margin)
    };
    let all = map.iter().map(|(_, k)| *k);
    let interior: Vec<usize> = map.iter().filter(|(u, _)| inside(u)).map(|(_, k)| *k).collect();
    let summary = format!(
        "K over floor: [{}, {}] (K_max = {}); inside margin {} m: [{}, {}]",
        all.clone().min().unwrap_or(0),
        all.max().unwrap_or(0),
        geom.k_max(&leds, args.resolution).map_err(EvalError::from)?,
        margin,
        interior.iter().min().copied().unwrap_or(0),
        interior.iter().max().copied().unwrap_or(0),
    );
    Ok(Outcome { files: vec![p], summary })
}

pub fn execute(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Sweep(args) => run_sweep_command(&resolve_sweep_config(&args)?),
        Command::Trial(args) => run_trial_command(&args),
        Command::Oracle(args) => run_oracle_command(&args),
        Command::Kmap(args) => run_kmap_command(&args),
        Command::Replay(args) => {
            let manifest = read_manifest(&args.manifest)?;
            let mut cfg = manifest.config;
            if let Some(o) = args.out {
                cfg.output.dir = o;
            }
            if let Some(t) = args.threads {
                cfg.experiment.threads = t;
            }
            run_sweep_command(&cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        fs::write(&p, "signal.snr_db = 30\nsignal.m = 120\nexperiment.master_seed = 9\n").unwrap();
        let common = CommonArgs {
            config: Some(p),
            snr: Some(25.0),
            ..Default::default()
        };
        let cfg = resolve_config(&common).unwrap();
        assert_eq!(cfg.signal.snr_db, 25.0);
        assert_eq!(cfg.signal.m, 120);
        assert_eq!(cfg.experiment.master_seed, 9);
    }

    #[test]
    fn sweep_axis_flag_resets_file_values() {
        let cli = Cli::try_parse_from(["vlcpos", "run", "--sweep", "m", "--values", "25:25:300", "--snr", "20"]).unwrap();
        let Command::Sweep(args) = cli.command else { panic!() };
        let cfg = resolve_sweep_config(&args).unwrap();
        assert_eq!(cfg.experiment.axis, SweepAxis::SignatureLength);
        assert_eq!(cfg.sweep_values().len(), 12);
        assert_eq!(cfg.signal.snr_db, 20.0);
    }

    #[test]
    fn estimator_flag_parses() {
        let cli = Cli::try_parse_from(["vlcpos", "sweep", "--estimator", "area-centroid", "--d-th", "5"]).unwrap();
        let Command::Sweep(args) = cli.command else { panic!() };
        let cfg = resolve_sweep_config(&args).unwrap();
        assert_eq!(cfg.algorithm.estimator, Estimator::AreaCentroid);
        assert_eq!(cfg.algorithm.d_th, Some(5.0));
        assert!(Cli::try_parse_from(["vlcpos", "sweep", "--estimator", "median"]).is_err());
        assert!(Cli::try_parse_from(["vlcpos", "sweep", "--sweep", "height"]).is_err());
    }
}
