mod config;
mod output;
mod tensor;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{resolve, Manifest, RunConfig, Sources};
use irsloc::harness::{run_experiment, run_trial, sample_scene, sweep, synthesize_rx, Setup, SweepAxis, SweepSpec};
use irsloc::rng::derive_seed;
use irsloc::C64;
use num_complex::Complex32;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tensor::Tensor;

#[derive(Parser, Debug)]
#[command(name = "irsloc", version, about = "IRS-assisted bi-static sensing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration, or a manifest written by an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Base seed; replaces harness.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-key override, e.g. subspace.q0=4 or subspace.region.theta_min_deg=10.
    #[arg(long = "override", value_name = "KEY=VAL")]
    overrides: Vec<String>,
    /// Named preset the configuration file is layered over.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize received pilot tensors and ground truth.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of trials to write, starting at trial 0.
        #[arg(long, default_value_t = 1)]
        trials: usize,
    },
    /// Run the Monte Carlo experiment and write estimates, spectra and metrics.
    Run {
        #[command(flatten)]
        common: Common,
        /// Write spectra of the first this many trials.
        #[arg(long, default_value_t = 1)]
        spectra: usize,
        /// Also write the per-trial event log.
        #[arg(long)]
        events: bool,
    },
    /// Sweep one parameter and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis; taken from the preset or configuration when absent.
        #[arg(long, value_enum)]
        axis: Option<AxisArg>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Q0 axis only: hold Q0·M_B at this product.
        #[arg(long)]
        fixed_product: Option<usize>,
    },
    /// Print the metrics or tensor summary of an output directory.
    Report {
        /// Directory written by simulate, run or sweep.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
enum AxisArg {
    NumBs,
    Q0,
    TargetsPerCluster,
    DetectionRadius,
    Bandwidth,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::NumBs => SweepAxis::NumBs,
            AxisArg::Q0 => SweepAxis::Q0,
            AxisArg::TargetsPerCluster => SweepAxis::TargetsPerCluster,
            AxisArg::DetectionRadius => SweepAxis::DetectionRadius,
            AxisArg::Bandwidth => SweepAxis::Bandwidth,
        }
    }
}

/// Failure classes mapped to exit codes 1 and 2.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn config_of(c: &Common) -> Result<RunConfig, Failure> {
    resolve(&Sources {
        preset: c.preset.as_deref(),
        config_path: c.config.as_deref(),
        overrides: &c.overrides,
        seed: c.seed,
    })
    .map_err(Failure::Config)
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn simulate(run: &RunConfig, out: &Path, trials: usize) -> Result<()> {
    let cfg = &run.config;
    let setup = Setup::new(cfg)?;
    let mut truth = output::create(&out.join("truth.csv"), &output::TRUTH_HEADER)?;
    let (v, q) = (cfg.ofdm.num_blocks, cfg.ofdm.symbols_per_block);
    let (n, mb) = (cfg.ofdm.num_subcarriers, cfg.scene.bs_elements);
    let narrow = |c: &C64| Complex32::new(c.re as f32, c.im as f32);
    for i in 0..trials.min(cfg.harness.num_trials) {
        let seed = derive_seed(cfg.harness.seed, i as u64);
        let scene = sample_scene(&setup.base, cfg, seed).with_context(|| format!("trial {i}"))?;
        let (y, pilots) = synthesize_rx(cfg, &setup, &scene, seed).with_context(|| format!("trial {i}"))?;
        let rx: Vec<Complex32> = y
            .iter()
            .flat_map(|m| (0..n).flat_map(move |r| (0..mb).map(move |c| m[(r, c)])))
            .map(|c| narrow(&c))
            .collect();
        Tensor::new("rx", vec![v, q, n, mb], rx)?.save(&out.join(format!("trial{i}_rx.bin")))?;
        let s: Vec<Complex32> = pilots.iter().map(narrow).collect();
        Tensor::new("pilots", vec![v, q, n], s)?.save(&out.join(format!("trial{i}_pilots.bin")))?;
        let taps = irsloc::channel::assign_clusters(&scene, &cfg.ofdm)?.tap_of;
        output::write_truth(&mut truth, i, &scene.targets, &taps)?;
    }
    truth.flush()?;
    Ok(())
}

fn run(run: &RunConfig, out: &Path, spectra: usize, events: bool) -> Result<()> {
    let cfg = &run.config;
    let res = run_experiment(cfg)?;
    let mut truth = output::create(&out.join("truth.csv"), &output::TRUTH_HEADER)?;
    let mut est = output::create(&out.join("estimates.csv"), &output::ESTIMATE_HEADER)?;
    let mut clusters = output::create(&out.join("clusters.csv"), &output::CLUSTER_HEADER)?;
    let mut ev = events
        .then(|| output::create(&out.join("events.csv"), &output::events_header()))
        .transpose()?;
    for o in &res.outcomes {
        output::write_truth(&mut truth, o.index, &o.truth, &o.taps)?;
        output::write_estimates(&mut est, o.index, "music", &o.music)?;
        if let Some(s) = &o.somp {
            output::write_estimates(&mut est, o.index, "somp", s)?;
        }
        for c in &o.clusters {
            output::write_cluster(&mut clusters, o.index, c)?;
        }
        if let Some(w) = ev.as_mut() {
            output::write_events(w, o.index, "music", &o.music_events)?;
            if let Some(e) = &o.somp_events {
                output::write_events(w, o.index, "somp", e)?;
            }
        }
    }
    for w in [&mut truth, &mut est, &mut clusters].into_iter().chain(ev.as_mut()) {
        w.flush()?;
    }
    let mut metrics = output::create(&out.join("metrics.csv"), &output::metrics_header())?;
    output::write_metrics(&mut metrics, "music", &res.music, res.wall_time_s)?;
    if let Some(s) = &res.somp {
        output::write_metrics(&mut metrics, "somp", s, res.wall_time_s)?;
    }
    metrics.flush()?;

    let n_spectra = spectra.min(cfg.harness.num_trials);
    if n_spectra > 0 {
        let dir = out.join("spectra");
        prepare_out(&dir)?;
        // Spectra do not depend on the thresholds, so rerunning with the
        // calibrated setup reproduces them exactly.
        let mut setup = Setup::new(cfg)?;
        setup.thresholds = res.thresholds;
        for i in 0..n_spectra {
            let o = run_trial(cfg, &setup, i, true)?;
            for sp in o.spectra.iter().flatten() {
                output::write_spectra(&dir, i, sp)?;
            }
        }
    }
    println!(
        "{} trials, Q0 = {}, rank(G) = {}, thresholds near {:.6e} far {:.6e}, {:.1} s",
        cfg.harness.num_trials, res.q0, res.rank_g, res.thresholds.near, res.thresholds.far, res.wall_time_s
    );
    print_report("music", &res.music);
    if let Some(s) = &res.somp {
        print_report("somp", s);
    }
    Ok(())
}

fn print_report(method: &str, m: &irsloc::harness::MetricsReport) {
    let f = |p: Option<f64>| p.map(|v| format!("{v:.4}")).unwrap_or_else(|| "undefined".into());
    println!(
        "{method:>6}: P_MD near {} far {}, P_FA near {} far {}",
        f(m.p_md_near),
        f(m.p_md_far),
        f(m.p_fa_near),
        f(m.p_fa_far)
    );
}

fn sweep_spec(
    run: &RunConfig,
    axis: Option<AxisArg>,
    values: &[f64],
    fixed_product: Option<usize>,
) -> Result<SweepSpec> {
    match (axis, &run.sweep) {
        (Some(a), _) => {
            if values.is_empty() {
                bail!("--axis needs --values");
            }
            Ok(SweepSpec {
                axis: a.into(),
                values: values.to_vec(),
                fixed_product,
            })
        }
        (None, Some(s)) => {
            let mut s = s.clone();
            if !values.is_empty() {
                s.values = values.to_vec();
            }
            if fixed_product.is_some() {
                s.fixed_product = fixed_product;
            }
            Ok(s)
        }
        (None, None) => bail!("no sweep axis: pass --axis and --values, or use a preset or config with a sweep"),
    }
}

fn do_sweep(run: &RunConfig, spec: &SweepSpec, out: &Path) -> Result<()> {
    let rows = sweep(&run.config, spec)?;
    let mut w = output::create(&out.join("sweep.csv"), &output::sweep_header())?;
    for r in &rows {
        output::write_sweep_row(&mut w, r)?;
        println!("{} = {} (Q0 = {}, M_B = {})", r.axis.as_str(), r.value, r.q0, r.num_bs);
        print_report("music", &r.music);
        if let Some(s) = &r.somp {
            print_report("somp", s);
        }
    }
    w.flush()?;
    Ok(())
}

fn report(out: &Path) -> Result<()> {
    let manifest_path = out.join("manifest.toml");
    let text = std::fs::read_to_string(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
    let m: Manifest = toml::from_str(&text).context("parsing manifest.toml")?;
    println!(
        "{} (irsloc {}), preset {}, seed {}, {} trials",
        m.command,
        m.version,
        m.preset.as_deref().unwrap_or("none"),
        m.seed,
        m.config.harness.num_trials
    );
    let mut found = false;
    let mut tensors: Vec<PathBuf> = std::fs::read_dir(out)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    tensors.sort();
    for path in &tensors {
        found = true;
        let t = Tensor::load(path)?;
        let rms = (t.data.iter().map(|c| c.norm_sqr() as f64).sum::<f64>() / t.data.len().max(1) as f64).sqrt();
        println!("  {}: {} dims {:?}, rms {rms:.4e}", path.file_name().unwrap().to_string_lossy(), t.name, t.dims);
    }
    for name in ["metrics.csv", "sweep.csv"] {
        let path = out.join(name);
        if !path.exists() {
            continue;
        }
        found = true;
        let mut r = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
        let headers = r.headers()?.clone();
        let cols: Vec<usize> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| !h.ends_with("_targets") && !h.ends_with("_estimates") && *h != "wall_time_s")
            .map(|(i, _)| i)
            .collect();
        println!("{name}:");
        println!("  {}", cols.iter().map(|&i| format!("{:>12}", &headers[i])).collect::<String>());
        for rec in r.records() {
            let rec = rec?;
            let cells: String = cols
                .iter()
                .map(|&i| {
                    let s = &rec[i];
                    match s.parse::<f64>() {
                        Ok(v) if s.contains('.') => format!("{v:>12.4}"),
                        _ => format!("{:>12}", if s.is_empty() { "-" } else { s }),
                    }
                })
                .collect();
            println!("  {cells}");
        }
    }
    if !found {
        bail!("{} holds no metrics.csv, sweep.csv or tensors", out.display());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let rt = Failure::Runtime;
    match cli.command {
        Command::Simulate { common, trials } => {
            let run = config_of(&common)?;
            prepare_out(&common.out).map_err(rt)?;
            Manifest::new("simulate", &run).write(&common.out).map_err(rt)?;
            simulate(&run, &common.out, trials).map_err(rt)
        }
        Command::Run {
            common,
            spectra,
            events,
        } => {
            let run = config_of(&common)?;
            prepare_out(&common.out).map_err(rt)?;
            Manifest::new("run", &run).write(&common.out).map_err(rt)?;
            self::run(&run, &common.out, spectra, events).map_err(rt)
        }
        Command::Sweep {
            common,
            axis,
            values,
            fixed_product,
        } => {
            let mut run = config_of(&common)?;
            let spec = sweep_spec(&run, axis, &values, fixed_product).map_err(Failure::Config)?;
            run.sweep = Some(spec.clone());
            prepare_out(&common.out).map_err(rt)?;
            Manifest::new("sweep", &run).write(&common.out).map_err(rt)?;
            do_sweep(&run, &spec, &common.out).map_err(rt)
        }
        Command::Report { out } => report(&out).map_err(rt),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
