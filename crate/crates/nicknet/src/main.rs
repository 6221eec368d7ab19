use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nicknet::config::{ExperimentConfig, ModeName, ReadoutName};
use nicknet::dataset::DatasetSource;
use nicknet::{expr, netfile, report, trace, Error, Result};
use nicknet_core::ann::{self, Dataset, ExecutionMode, InferenceOptions, NetworkSpec};
use nicknet_core::chem::{self, ActivationParams, ChemistryMode, EnzymeDose};
use nicknet_core::device::{self, ExploreSettings, Geometry, NamedConfig};
use nicknet_core::fluidics::{self, FaultPlan, LayerJob};
use nicknet_core::rng::derive_seed;
use nicknet_core::FractionalValue;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "nicknet", version, about = "Nicked-DNA neural network simulator")]
struct Cli {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a gate expression such as `XOR(0.3, NOT(0.4))`.
    Gates {
        #[arg(long)]
        expr: String,
        /// Also run the expression on bitstreams of this length.
        #[arg(long)]
        bits: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Multiply two fractions by double nicking.
    Multiply {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        /// Molecules per droplet; defaults to chemistry.molecules.
        #[arg(long)]
        t: Option<u64>,
        #[arg(long, value_enum, default_value_t = ChemMode::Ideal)]
        mode: ChemMode,
        /// Defaults to chemistry.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one layer through the microfluidic array and write its trace.
    SimulateLayer {
        /// Comma-separated inputs in [0, 1].
        #[arg(long)]
        inputs: String,
        /// Rows separated by `;`, entries by `,`; one row per neuron.
        #[arg(long)]
        weights: String,
        /// One threshold for every neuron, or one per neuron.
        #[arg(long, default_value = "0.5")]
        threshold: String,
        #[arg(long, value_enum, default_value_t = ChemMode::Ideal)]
        mode: ChemMode,
        /// Defaults to run.trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Break the protocol on purpose, for testing validators.
        #[arg(long, value_enum)]
        fault: Option<Fault>,
    },
    /// Area and latency of candidate array sizes, as CSV.
    Explore {
        /// Use the four standard array sizes (196, 49, 16, 4 cells per side).
        #[arg(long)]
        paper_configs: bool,
        /// Comma-separated cells per side; defaults to device.k_physical.
        #[arg(long)]
        k: Option<String>,
        /// Network layer widths, input first.
        #[arg(long, default_value = "784,784,10")]
        layers: String,
        /// Use the unrounded optimistic cell footprint.
        #[arg(long)]
        exact_optimistic: bool,
        /// Defaults to run.report, then stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write per-layer latencies here.
        #[arg(long)]
        layer_report: Option<PathBuf>,
    },
    /// Train a nonnegative network and save it.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Defaults to network.spec.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Classify samples with a saved network.
    Infer {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Classify this comma-separated vector instead of a dataset.
        #[arg(long)]
        input: Option<String>,
        /// Write the fluidics event trace of the first sample here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare execution modes on held-out samples, as CSV.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "float,ideal,sampled")]
        modes: Vec<ModeName>,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long, value_enum)]
        readout: Option<ReadoutName>,
        /// Defaults to run.report, then stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check an event trace against the protocol grammars.
    TraceValidate {
        path: PathBuf,
        /// Accept a trace that stops mid-protocol.
        #[arg(long)]
        partial: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ChemMode {
    Ideal,
    Sampled,
}

impl From<ChemMode> for ChemistryMode {
    fn from(m: ChemMode) -> Self {
        match m {
            ChemMode::Ideal => ChemistryMode::Ideal,
            ChemMode::Sampled => ChemistryMode::Sampled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Fault {
    SkipValveStep,
    DoubleOccupy,
    MergeZBeforeY,
    SkewMergeArrival,
    SkipPipelineStage,
}

impl From<Fault> for FaultPlan {
    fn from(f: Fault) -> Self {
        let mut p = FaultPlan::default();
        match f {
            Fault::SkipValveStep => p.skip_valve_step = Some((0, 0)),
            Fault::DoubleOccupy => p.double_occupy = Some((0, 0)),
            Fault::MergeZBeforeY => p.merge_z_before_y = Some(0),
            Fault::SkewMergeArrival => p.skew_merge_arrival = Some(0),
            Fault::SkipPipelineStage => p.skip_pipeline_stage = Some(0),
        }
        p
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    /// IDX image file; the bundled 8×8 digits are used when omitted.
    #[arg(long, requires = "labels")]
    images: Option<PathBuf>,
    #[arg(long, requires = "images")]
    labels: Option<PathBuf>,
    /// Use every sample instead of the training/held-out split.
    #[arg(long)]
    all: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Network file; defaults to network.spec.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Defaults to run.mode.
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
    #[arg(long, value_enum)]
    readout: Option<ReadoutName>,
    #[arg(long)]
    limit: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let line = json!({"error": "usage", "message": e.to_string().lines().next().unwrap_or_default()});
            eprintln!("{line}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut line = json!({"error": e.kind(), "message": e.to_string()});
            if let Error::Trace { rule, .. } = &e {
                line["rule"] = json!(rule);
            }
            eprintln!("{line}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    match cli.command {
        Command::Gates { expr, bits, seed } => gates(&expr, bits, seed),
        Command::Multiply { a, b, t, mode, seed } => multiply(&cfg, a, b, t, mode, seed),
        Command::SimulateLayer {
            inputs,
            weights,
            threshold,
            mode,
            trace,
            fault,
        } => simulate_layer(&cfg, &inputs, &weights, &threshold, mode, trace, fault),
        Command::Explore {
            paper_configs,
            k,
            layers,
            exact_optimistic,
            output,
            layer_report,
        } => explore(&cfg, paper_configs, k, &layers, exact_optimistic, output, layer_report),
        Command::Train { data, output } => train(&cfg, &data, output),
        Command::Infer { data, run, input, trace } => infer(&cfg, &data, &run, input, trace),
        Command::Compare {
            data,
            model,
            modes,
            limit,
            readout,
            output,
        } => compare(&cfg, &data, model, &modes, limit, readout, output),
        Command::TraceValidate { path, partial } => {
            let s = trace::validate_file(&path, partial)?;
            println!(
                "ok: {} events, {} layers, {} cells mixed, {} merges, {} pipelines, {} separations, ends at {:.6} s",
                s.events, s.layers, s.cells_mixed, s.merges, s.pipelines, s.separations, s.end_time_s
            );
            Ok(())
        }
    }
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("--{flag}: {s:?} is not a number")))
        })
        .collect()
}

fn parse_sizes(flag: &str, text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("--{flag}: {s:?} is not a positive integer")))
        })
        .collect()
}

fn fractions(flag: &str, values: &[f64]) -> Result<Vec<FractionalValue>> {
    values
        .iter()
        .map(|&v| FractionalValue::new(v).map_err(|e| Error::Format(format!("--{flag}: {e}"))))
        .collect()
}

fn gates(src: &str, bits: Option<usize>, seed: u64) -> Result<()> {
    let e = expr::parse(src)?;
    println!("{}", e.eval()?.get());
    if let Some(n) = bits {
        println!("{}", e.eval_bitstream(n, seed)?.mean());
    }
    Ok(())
}

fn multiply(cfg: &ExperimentConfig, a: f64, b: f64, t: Option<u64>, mode: ChemMode, seed: Option<u64>) -> Result<()> {
    let a = FractionalValue::new(a).map_err(|e| Error::Format(format!("--a: {e}")))?;
    let b = FractionalValue::new(b).map_err(|e| Error::Format(format!("--b: {e}")))?;
    let t = t.unwrap_or(cfg.chemistry.molecules);
    let seed = seed.unwrap_or(cfg.chemistry.seed);
    let s = chem::encode_fraction(a, t, mode.into(), derive_seed(seed, &[0]))?;
    let s = chem::nick_site_b(&s, &EnzymeDose::for_weight(b, t, 1)?, 1)?;
    println!("{}", chem::probe_readout(&s, &cfg.error_model()).fraction());
    Ok(())
}

fn simulate_layer(
    cfg: &ExperimentConfig,
    inputs: &str,
    weights: &str,
    threshold: &str,
    mode: ChemMode,
    trace_path: Option<PathBuf>,
    fault: Option<Fault>,
) -> Result<()> {
    let x = fractions("inputs", &parse_list("inputs", inputs)?)?;
    let mut w = Vec::new();
    let mut rows = 0;
    for row in weights.split(';') {
        let r = fractions("weights", &parse_list("weights", row)?)?;
        if r.len() != x.len() {
            return Err(Error::Consistency(format!(
                "--weights: row {} has {} entries for {} inputs",
                rows,
                r.len(),
                x.len()
            )));
        }
        w.extend(r);
        rows += 1;
    }
    let mut thetas = parse_list("threshold", threshold)?;
    if thetas.len() == 1 {
        thetas = vec![thetas[0]; rows];
    }
    if thetas.len() != rows {
        return Err(Error::Consistency(format!(
            "--threshold: {} values for {rows} neurons",
            thetas.len()
        )));
    }
    let activations = thetas
        .iter()
        .map(|&theta| {
            ActivationParams {
                threshold: theta,
                output_cap: cfg.chemistry.output_cap,
                replenishment_excess: cfg.chemistry.replenishment_excess,
                gain: cfg.chemistry.gain,
            }
            .validated()
        })
        .collect::<nicknet_core::Result<Vec<_>>>()?;
    let mut job = LayerJob::new(x, w, activations, cfg.chemistry.molecules, mode.into());
    job.err = cfg.error_model();
    job.seed = cfg.chemistry.seed;
    let faults = fault.map(FaultPlan::from).unwrap_or_default();
    let run = fluidics::run_layer(&job, cfg.timing(), faults)?;

    let mut out = csv::Writer::from_writer(io::stdout().lock());
    out.write_record(["neuron", "pre_activation", "output"])?;
    for (i, o) in run.outputs.iter().enumerate() {
        out.write_record([i.to_string(), o.pre_activation.to_string(), o.output.get().to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    if let Some(p) = trace_path.or_else(|| cfg.run.trace.clone()) {
        trace::write_trace(&p, &run.events)?;
    }
    Ok(())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| Error::io(p, e))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn explore(
    cfg: &ExperimentConfig,
    standard: bool,
    k: Option<String>,
    layers: &str,
    exact_optimistic: bool,
    output: Option<PathBuf>,
    layer_report: Option<PathBuf>,
) -> Result<()> {
    let mut configs = if standard { NamedConfig::standard_configs() } else { Vec::new() };
    if let Some(k) = k {
        for v in parse_sizes("k", &k)? {
            let v = u32::try_from(v).map_err(|_| Error::Format(format!("--k: {v} is too large")))?;
            configs.push(NamedConfig::new(format!("k={v}"), v));
        }
    }
    if configs.is_empty() {
        let v = cfg.device.k_physical;
        configs.push(NamedConfig::new(format!("k={v}"), v));
    }
    let layer_sizes = parse_sizes("layers", layers)?;
    let settings = ExploreSettings {
        pessimistic: cfg.geometry(),
        optimistic: if exact_optimistic {
            Geometry::OPTIMISTIC_EXACT
        } else {
            Geometry::OPTIMISTIC
        },
        timing: cfg.timing(),
    };
    let rows = device::explore(&configs, &layer_sizes, &settings)?;
    let output = output.or_else(|| cfg.run.report.clone());
    report::write_explore(open_output(output.as_deref())?, &rows)?;
    if let Some(p) = layer_report {
        report::write_layer_latencies(open_output(Some(&p))?, &rows, &layer_sizes)?;
    }
    Ok(())
}

/// Training and evaluation samples for a command.
fn load_data(cfg: &ExperimentConfig, args: &DataArgs) -> Result<(Dataset, Dataset)> {
    let source = match (&args.images, &args.labels) {
        (Some(i), Some(l)) => DatasetSource::idx(i, l),
        _ => DatasetSource::Builtin,
    };
    let data = source.load()?;
    if args.all {
        return Ok((data.clone(), data));
    }
    let holdout = cfg.training.holdout;
    if holdout == 0 || holdout >= data.len() {
        return Err(Error::config(
            "training.holdout",
            format!("{holdout} must be between 1 and {} for this dataset", data.len() - 1),
        ));
    }
    Ok(data.split(holdout, cfg.training.split_seed)?)
}

fn model_path(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> Result<PathBuf> {
    flag.or_else(|| cfg.network.spec.clone())
        .ok_or_else(|| Error::config("network.spec", "no network file given (use --model or network.spec)"))
}

fn check_width(net: &NetworkSpec, data: &Dataset) -> Result<()> {
    let k = net.layers[0].inputs;
    if data.dim != k {
        return Err(Error::Consistency(format!(
            "network takes {k} inputs but samples have {}",
            data.dim
        )));
    }
    Ok(())
}

fn options(cfg: &ExperimentConfig, readout: Option<ReadoutName>) -> Result<InferenceOptions> {
    Ok(InferenceOptions {
        chemistry: cfg.chemistry_settings(),
        readout: readout.unwrap_or(cfg.network.readout).into(),
        device: Some(cfg.device_config()?),
    })
}

fn train(cfg: &ExperimentConfig, args: &DataArgs, output: Option<PathBuf>) -> Result<()> {
    let output = output
        .or_else(|| cfg.network.spec.clone())
        .ok_or_else(|| Error::config("network.spec", "no output file given (use --output or network.spec)"))?;
    let (train_set, held_out) = load_data(cfg, args)?;
    let mut sizes = cfg.network.layer_sizes.clone();
    if sizes[0] != train_set.dim {
        return Err(Error::Consistency(format!(
            "network.layer_sizes starts with {} but samples have {} pixels",
            sizes[0], train_set.dim
        )));
    }
    let classes = train_set.classes().max(held_out.classes());
    if *sizes.last().expect("validated") < classes {
        let last = sizes.len() - 1;
        sizes[last] = classes;
    }
    let net = ann::train(&train_set, &sizes, &cfg.train_config())?;
    let spec = ann::quantize_network(&net, 1.0)?;
    netfile::save(&spec, &output)?;
    println!("train_accuracy\t{:.4}", ann::accuracy(&net, &train_set));
    println!("heldout_accuracy\t{:.4}", ann::accuracy(&net, &held_out));
    println!("min_weight\t{}", net.min_weight());
    println!("saved\t{}", output.display());
    Ok(())
}

fn infer(
    cfg: &ExperimentConfig,
    args: &DataArgs,
    run: &RunArgs,
    input: Option<String>,
    trace_path: Option<PathBuf>,
) -> Result<()> {
    let net = netfile::load(&model_path(cfg, run.model.clone())?)?;
    let mode = cfg.execution_mode(run.mode.unwrap_or(cfg.run.mode));
    let opts = options(cfg, run.readout)?;
    let trace_path = trace_path.or_else(|| cfg.run.trace.clone());
    let write_events = |res: &ann::InferenceResult| -> Result<()> {
        match (&trace_path, &res.events) {
            (Some(p), Some(ev)) => trace::write_trace(p, ev),
            _ => Ok(()),
        }
    };

    if let Some(text) = input {
        let x = parse_list("input", &text)?;
        let res = ann::infer(&net, &x, &mode, &opts)?;
        write_events(&res)?;
        let readout: Vec<String> = res.readout(opts.readout).iter().map(f64::to_string).collect();
        println!("class\t{}", res.class);
        println!("readout\t{}", readout.join(","));
        if let Some(lat) = &res.latency_hours {
            let lat: Vec<String> = lat.iter().map(|h| format!("{h:.4}")).collect();
            println!("latency_hr\t{}", lat.join(","));
        }
        return Ok(());
    }

    let (_, data) = load_data(cfg, args)?;
    check_width(&net, &data)?;
    let n = run.limit.unwrap_or(data.len()).min(data.len());
    let mut out = csv::Writer::from_writer(io::stdout().lock());
    out.write_record(["sample", "label", "predicted"])?;
    let mut correct = 0;
    for i in 0..n {
        let m = match mode.seed() {
            Some(s) => mode.reseeded(derive_seed(s, &[i as u64])),
            None => mode,
        };
        let res = ann::infer(&net, data.sample(i), &m, &opts)?;
        if i == 0 {
            write_events(&res)?;
        }
        correct += usize::from(res.class == data.label(i));
        out.write_record([i.to_string(), data.label(i).to_string(), res.class.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    if n > 0 {
        eprintln!("accuracy {:.4} over {n} samples ({})", correct as f64 / n as f64, mode.label());
    }
    Ok(())
}

fn compare(
    cfg: &ExperimentConfig,
    args: &DataArgs,
    model: Option<PathBuf>,
    modes: &[ModeName],
    limit: Option<usize>,
    readout: Option<ReadoutName>,
    output: Option<PathBuf>,
) -> Result<()> {
    let net = netfile::load(&model_path(cfg, model)?)?;
    let (_, data) = load_data(cfg, args)?;
    check_width(&net, &data)?;
    let data = match limit {
        Some(n) if n < data.len() => data.subset(&(0..n).collect::<Vec<_>>()),
        _ => data,
    };
    let modes: Vec<ExecutionMode> = modes.iter().map(|&m| cfg.execution_mode(m)).collect();
    let mut opts = options(cfg, readout)?;
    opts.device = None;
    let rep = ann::compare_modes(&net, &data, &modes, &opts)?;
    for (m, a) in rep.modes.iter().zip(&rep.accuracy) {
        eprintln!("accuracy {a:.4} {m}");
    }
    let output = output.or_else(|| cfg.run.report.clone());
    report::write_compare(open_output(output.as_deref())?, &rep)
}
