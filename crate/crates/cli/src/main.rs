//! `tcspc`: simulate, reconstruct, baseline and evaluate photon-count cubes.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use manifest::Manifest;
use tcspc_core::baseline::run_baseline;
use tcspc_core::cube::{load_cube, save_cube};
use tcspc_core::inference::{
    defined, defined_fraction, log_tau_grid, map_depth, median_defined, mmse_background,
    mmse_intensity, mse_cdf, mse_fields, MetricKind,
};
use tcspc_core::irf::{load_irf, save_irf, DEFAULT_FLOOR_EPS};
use tcspc_core::maps::{read_map_csv, write_map_csv, write_pgm16};
use tcspc_core::sampler::Sampler;
use tcspc_core::simulator::{generate_truth, sample_cube, SceneSpec};
use tcspc_core::{Error, Grid, HyperState, Result, SamplerConfig};

#[derive(Parser)]
#[command(
    name = "tcspc",
    version,
    about = "Bayesian reconstruction of sparse single-photon Lidar cubes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores. Outputs do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth scene and a Poisson cube from a scene config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// IRF1 file; a Gaussian of `irf_fwhm_ps` is synthesized otherwise.
        #[arg(long)]
        irf: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the adaptive Gibbs sampler.
    Reconstruct {
        #[arg(long)]
        cube: PathBuf,
        #[arg(long)]
        irf: PathBuf,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 200)]
        burnin: usize,
        #[arg(long, default_value_t = 1)]
        thinning: usize,
        /// Depth neighborhood order (1 or 2).
        #[arg(long, default_value_t = 2)]
        order: u8,
        /// Disable adaptation, e.g. `c=1,alpha0=2`.
        #[arg(long)]
        fix_hyper: Option<String>,
        /// Initial `c`.
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
        /// Initial `alpha0`.
        #[arg(long, default_value_t = 1.0)]
        alpha0: f64,
        /// Multiplier `s` in the step size `s * n^(-3/4)`.
        #[arg(long, default_value_t = 1.0)]
        step_scale: f64,
        /// Print a progress line to stderr every N iterations.
        #[arg(long, default_value_t = 0)]
        log_every: usize,
        #[arg(long, default_value_t = DEFAULT_FLOOR_EPS)]
        floor_eps: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-correlation depth and maximum-likelihood intensity.
    Baseline {
        #[arg(long)]
        cube: PathBuf,
        #[arg(long)]
        irf: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FLOOR_EPS)]
        floor_eps: f64,
        #[command(flatten)]
        common: Common,
    },
    /// MSE maps, cdfs and summary statistics of an estimate against a reference.
    Evaluate {
        /// Directory with `depth.csv` and `intensity.csv`.
        #[arg(long)]
        est: PathBuf,
        /// Directory with `truth_depth.csv` / `truth_intensity.csv` or `depth.csv` / `intensity.csv`.
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, default_value_t = 16.0)]
        bin_width_ps: f64,
        /// Cube for photon statistics in the summary.
        #[arg(long)]
        cube: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Simulate { common, .. }
        | Command::Reconstruct { common, .. }
        | Command::Baseline { common, .. }
        | Command::Evaluate { common, .. } => common.clone(),
    };
    if common.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    fs::create_dir_all(&common.out)?;
    match cli.command {
        Command::Simulate { config, irf, .. } => simulate(&config, irf.as_deref(), &common),
        Command::Reconstruct {
            cube,
            irf,
            iters,
            burnin,
            thinning,
            order,
            fix_hyper,
            c0,
            alpha0,
            step_scale,
            log_every,
            floor_eps,
            ..
        } => {
            let mut hyper = HyperState {
                c: c0,
                alpha0,
                step_scale,
                ..HyperState::default()
            };
            let mut config = SamplerConfig {
                n_mc: iters,
                n_bi: burnin,
                thinning,
                neighborhood_order: order,
                seed: common.seed.unwrap_or(0),
                log_every,
                ..SamplerConfig::default()
            };
            if let Some(spec) = &fix_hyper {
                let (c, a) = parse_fix_hyper(spec)?;
                hyper.c = c;
                hyper.alpha0 = a;
                config.adapt_c = false;
                config.adapt_alpha0 = false;
            }
            config.hyper = hyper;
            reconstruct(
                &cube,
                &irf,
                floor_eps,
                config,
                fix_hyper.as_deref(),
                &common,
            )
        }
        Command::Baseline {
            cube,
            irf,
            floor_eps,
            ..
        } => baseline(&cube, &irf, floor_eps, &common),
        Command::Evaluate {
            est,
            reference,
            bin_width_ps,
            cube,
            ..
        } => evaluate(&est, &reference, bin_width_ps, cube.as_deref(), &common),
    }
}

fn parse_fix_hyper(spec: &str) -> Result<(f64, f64)> {
    let (mut c, mut a) = (None, None);
    for part in spec.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("--fix-hyper expects key=value, got `{part}`"))
        })?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("--fix-hyper: bad number `{v}`")))?;
        match k.trim() {
            "c" => c = Some(v),
            "alpha0" => a = Some(v),
            other => return Err(Error::UnknownConfigKey(other.to_string())),
        }
    }
    let d = HyperState::default();
    Ok((c.unwrap_or(d.c), a.unwrap_or(d.alpha0)))
}

fn simulate(config: &Path, irf: Option<&Path>, common: &Common) -> Result<()> {
    let text = fs::read_to_string(config)?;
    let spec = SceneSpec::parse(&text, config.parent().unwrap_or(Path::new(".")))?;
    let seed = common.seed.unwrap_or(spec.seed);
    let g0 = match irf {
        Some(p) => load_irf(p, spec.bins, DEFAULT_FLOOR_EPS)?,
        None => spec.synth_irf()?,
    };
    let truth = generate_truth(&spec)?;
    let cube = sample_cube(&truth, &g0, seed)?;
    let out = &common.out;
    save_cube(&cube, out.join("cube.pcube"))?;
    save_irf(&g0, out.join("irf.txt"))?;
    write_map_csv(
        out.join("truth_depth.csv"),
        &defined(&truth.depth.map(|&t| t as f64)),
    )?;
    write_map_csv(out.join("truth_intensity.csv"), &defined(&truth.intensity))?;
    write_map_csv(
        out.join("truth_background.csv"),
        &defined(&truth.background),
    )?;

    let mut m = Manifest::new("simulate");
    m.file("config", config)?;
    if let Some(p) = irf {
        m.file("irf", p)?;
    }
    m.set("seed", seed);
    m.set("rows", spec.rows);
    m.set("cols", spec.cols);
    m.set("bins", spec.bins);
    m.set("total_photons", cube.total_photons());
    m.set("empty_pixel_fraction", cube.empty_pixel_fraction());
    for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        m.set(&format!("config_line_{i:03}"), line.trim());
    }
    m.write(out)
}

fn reconstruct(
    cube_path: &Path,
    irf_path: &Path,
    floor_eps: f64,
    config: SamplerConfig,
    fix_hyper: Option<&str>,
    common: &Common,
) -> Result<()> {
    let t_start = Instant::now();
    let cube = load_cube(cube_path)?;
    let g0 = load_irf(irf_path, cube.n_bins(), floor_eps)?;
    let log_every = config.log_every;
    let sampler = Sampler::new(&cube, &g0, config.clone())?;
    let t_sample = Instant::now();
    let trace = sampler.run_with(|rec| {
        if log_every > 0 && rec.iter % log_every == 0 {
            eprintln!("{rec}");
        }
    })?;
    let sample_secs = t_sample.elapsed().as_secs_f64();

    let out = &common.out;
    let depth = map_depth(&trace)?.map(|&t| Some(t as f64));
    let intensity = defined(&mmse_intensity(&trace)?);
    let background = defined(&mmse_background(&trace)?);
    for (name, map) in [
        ("depth", &depth),
        ("intensity", &intensity),
        ("background", &background),
    ] {
        write_map_csv(out.join(format!("{name}.csv")), map)?;
        write_pgm16(out.join(format!("{name}.pgm")), map)?;
    }
    let mut hyper = String::from("iter,c,alpha0,log_posterior\n");
    for h in &trace.hyper_trace {
        hyper.push_str(&format!(
            "{},{},{},{}\n",
            h.iter, h.c, h.alpha0, h.log_posterior
        ));
    }
    fs::write(out.join("hyper_trace.csv"), hyper)?;

    let mut m = Manifest::new("reconstruct");
    m.file("cube", cube_path)?;
    m.file("irf", irf_path)?;
    m.set("seed", config.seed);
    m.set("iters", config.n_mc);
    m.set("burnin", config.n_bi);
    m.set("thinning", config.thinning);
    m.set("order", config.neighborhood_order);
    m.set("floor_eps", floor_eps);
    m.set("r_pad", config.r_pad);
    m.set("c0", config.hyper.c);
    m.set("alpha0_0", config.hyper.alpha0);
    m.set("step_scale", config.hyper.step_scale);
    m.set("eta", config.hyper.eta);
    m.set("nu", config.hyper.nu);
    m.set("fix_hyper", fix_hyper.unwrap_or("none"));
    m.set("retained_samples", trace.retained_count());
    if let Some(last) = trace.hyper_trace.last() {
        m.set("final_c", last.c);
        m.set("final_alpha0", last.alpha0);
    }
    m.write(out)?;

    let total_secs = t_start.elapsed().as_secs_f64();
    fs::write(
        out.join("timing.txt"),
        format!(
            "sampling_seconds = {sample_secs:.3}\ntotal_seconds = {total_secs:.3}\nsampling_minutes = {:.4}\niterations_per_second = {:.2}\n",
            sample_secs / 60.0,
            config.n_mc as f64 / sample_secs.max(1e-9)
        ),
    )?;
    Ok(())
}

fn baseline(cube_path: &Path, irf_path: &Path, floor_eps: f64, common: &Common) -> Result<()> {
    let cube = load_cube(cube_path)?;
    let g0 = load_irf(irf_path, cube.n_bins(), floor_eps)?;
    let est = run_baseline(&cube, &g0);
    let out = &common.out;
    let depth = est.depth.map(|d| d.map(|t| t as f64));
    for (name, map) in [("depth", &depth), ("intensity", &est.intensity)] {
        write_map_csv(out.join(format!("{name}.csv")), map)?;
        write_pgm16(out.join(format!("{name}.pgm")), map)?;
    }
    let mut m = Manifest::new("baseline");
    m.file("cube", cube_path)?;
    m.file("irf", irf_path)?;
    m.set("floor_eps", floor_eps);
    m.set("defined_fraction", est.defined_fraction());
    m.write(out)
}

fn read_pair(dir: &Path, name: &str) -> Result<(PathBuf, Grid<Option<f64>>)> {
    for candidate in [format!("truth_{name}.csv"), format!("{name}.csv")] {
        let p = dir.join(&candidate);
        if p.exists() {
            let map = read_map_csv(&p)?;
            return Ok((p, map));
        }
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("no {name}.csv in {}", dir.display()),
    )))
}

/// Squared errors where both maps are defined.
fn masked_mse(
    est: &Grid<Option<f64>>,
    reference: &Grid<Option<f64>>,
    kind: MetricKind,
    bin_width_ps: f64,
) -> Result<Grid<Option<f64>>> {
    if !est.same_shape(reference) {
        return Err(Error::DimensionMismatch(format!(
            "estimate {}x{} vs reference {}x{}",
            est.rows(),
            est.cols(),
            reference.rows(),
            reference.cols()
        )));
    }
    let est = Grid::from_fn(est.rows(), est.cols(), |i, j| {
        reference[(i, j)].and(est[(i, j)])
    });
    let reference = reference.map(|v| v.unwrap_or(0.0));
    mse_fields(&est, &reference, kind, bin_width_ps)
}

fn write_cdf(path: &Path, mse: &Grid<Option<f64>>, taus: &[f64]) -> Result<()> {
    let mut text = String::from("tau,F\n");
    for (t, f) in taus.iter().zip(mse_cdf(mse, taus)) {
        text.push_str(&format!("{t},{f}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| v.to_string())
}

fn evaluate(
    est: &Path,
    reference: &Path,
    bin_width_ps: f64,
    cube: Option<&Path>,
    common: &Common,
) -> Result<()> {
    let (est_d_path, est_d) = read_pair(est, "depth")?;
    let (est_i_path, est_i) = read_pair(est, "intensity")?;
    let (ref_d_path, ref_d) = read_pair(reference, "depth")?;
    let (ref_i_path, ref_i) = read_pair(reference, "intensity")?;
    let mse_d = masked_mse(&est_d, &ref_d, MetricKind::Distance, bin_width_ps)?;
    let mse_i = masked_mse(&est_i, &ref_i, MetricKind::Intensity, bin_width_ps)?;
    let out = &common.out;
    write_map_csv(out.join("mse_distance.csv"), &mse_d)?;
    write_map_csv(out.join("mse_intensity.csv"), &mse_i)?;
    write_cdf(
        &out.join("cdf_distance.csv"),
        &mse_d,
        &log_tau_grid(1e-8, 1.0, 81),
    )?;
    write_cdf(
        &out.join("cdf_intensity.csv"),
        &mse_i,
        &log_tau_grid(1e-6, 1e2, 81),
    )?;

    let mut summary = format!(
        "pixels = {}\ndefined_fraction_depth = {}\ndefined_fraction_intensity = {}\n\
         median_mse_distance = {}\nmedian_mse_intensity = {}\n",
        mse_d.len(),
        defined_fraction(&est_d),
        defined_fraction(&est_i),
        fmt_opt(median_defined(&mse_d)),
        fmt_opt(median_defined(&mse_i)),
    );
    let mut m = Manifest::new("evaluate");
    for (k, p) in [
        ("est_depth", &est_d_path),
        ("est_intensity", &est_i_path),
        ("ref_depth", &ref_d_path),
        ("ref_intensity", &ref_i_path),
    ] {
        m.file(k, p)?;
    }
    m.set("bin_width_ps", bin_width_ps);
    if let Some(p) = cube {
        let c = load_cube(p)?;
        summary.push_str(&format!(
            "mean_photons_per_pixel = {}\nempty_pixel_percent = {}\n",
            c.mean_photons_per_pixel(),
            100.0 * c.empty_pixel_fraction()
        ));
        m.file("cube", p)?;
    }
    fs::write(out.join("summary.txt"), summary)?;
    m.write(out)
}
