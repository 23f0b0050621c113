//! Command-line driver: simulate a testbed, train an embedding model,
//! locate queries, evaluate methods and sweep parameters.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wlan_sde::eval::{self, EvalData, EvalOptions, Method, SweepAxis};
use wlan_sde::locate::{OpCount, SdeLocator};
use wlan_sde::sde::train_sde;
use wlan_sde::sim::{build_synthetic_radio_map, SimConfig};
use wlan_sde::{EmbeddingModel, Error, IntrinsicDim, ObservationSet, RadioMap, Result, TrainParams};

#[derive(Parser, Debug)]
#[command(name = "wlan-sde", version, about = "WLAN fingerprint localization with discriminant embedding")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic radio map, query set and unlabeled pool.
    Simulate(SimulateArgs),
    /// Train an embedding model from a radio map.
    Train(TrainArgs),
    /// Locate query observations with a trained model.
    Locate(LocateArgs),
    /// Compare KNN, LDE-KNN and SDE-KNN on ground-truth queries.
    Evaluate(EvaluateArgs),
    /// Evaluate SDE-KNN across values of one parameter.
    Sweep(SweepArgs),
}

/// Shared by every subcommand; lines `key=value` become `--key value`.
#[derive(Args, Debug)]
struct ConfigArg {
    /// Plain-text `key=value` file; flags on the command line win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Radio map CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Query CSV (with ground truth) to write.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Unlabeled pool CSV to write.
    #[arg(long)]
    unlabeled: Option<PathBuf>,
    /// Seed for all measurement noise and query positions.
    #[arg(long, default_value_t = SimConfig::default().seed)]
    seed: u64,
    /// Seed for the AP layout.
    #[arg(long, default_value_t = SimConfig::default().layout_seed)]
    layout_seed: u64,
    #[arg(long, default_value_t = SimConfig::default().hallway_length)]
    hallway_length: f64,
    #[arg(long, default_value_t = SimConfig::default().hallway_width)]
    hallway_width: f64,
    #[arg(long, default_value_t = SimConfig::default().grid_interval)]
    grid_interval: f64,
    #[arg(long, default_value_t = SimConfig::default().n_aps)]
    n_aps: usize,
    #[arg(long, default_value_t = SimConfig::default().pathloss_exponent)]
    pathloss_exponent: f64,
    /// Received power at 1 m, dBm.
    #[arg(long, default_value_t = SimConfig::default().tx_power_at_1m, allow_hyphen_values = true)]
    tx_power: f64,
    /// Shadowing standard deviation, dB.
    #[arg(long, default_value_t = SimConfig::default().shadowing_sigma)]
    shadowing_sigma: f64,
    #[arg(long, default_value_t = SimConfig::default().samples_per_rp)]
    samples_per_rp: usize,
    #[arg(long, default_value_t = SimConfig::default().dropout_prob)]
    dropout_prob: f64,
    /// Farthest an AP sits from the hallway edge, meters.
    #[arg(long, default_value_t = SimConfig::default().ap_setback)]
    ap_setback: f64,
    #[arg(long, default_value_t = SimConfig::default().n_queries)]
    n_queries: usize,
    #[arg(long, default_value_t = SimConfig::default().n_unlabeled)]
    n_unlabeled: usize,
    /// Scans averaged into each unlabeled observation.
    #[arg(long, default_value_t = SimConfig::default().unlabeled_scans)]
    unlabeled_scans: usize,
}

impl SimulateArgs {
    fn sim_config(&self) -> SimConfig {
        SimConfig {
            hallway_length: self.hallway_length,
            hallway_width: self.hallway_width,
            grid_interval: self.grid_interval,
            n_aps: self.n_aps,
            pathloss_exponent: self.pathloss_exponent,
            tx_power_at_1m: self.tx_power,
            shadowing_sigma: self.shadowing_sigma,
            samples_per_rp: self.samples_per_rp,
            dropout_prob: self.dropout_prob,
            ap_setback: self.ap_setback,
            n_queries: self.n_queries,
            n_unlabeled: self.n_unlabeled,
            unlabeled_scans: self.unlabeled_scans,
            layout_seed: self.layout_seed,
            seed: self.seed,
        }
    }
}

/// Every training parameter; unset flags keep their defaults.
#[derive(Args, Debug, Default)]
struct ParamArgs {
    /// Embedding dimension or `auto`.
    #[arg(long)]
    dim: Option<IntrinsicDim>,
    /// Variance fraction for `--dim auto`.
    #[arg(long)]
    dim_energy: Option<f64>,
    #[arg(long)]
    clusters: Option<usize>,
    /// Neighbors per sample in the affinity graphs.
    #[arg(long)]
    affinity_k: Option<usize>,
    /// Heat-kernel width; default is the mean squared edge length.
    #[arg(long)]
    heat_t: Option<f64>,
    /// Clustering kernel factor; default is the median heuristic.
    #[arg(long)]
    kernel_lambda: Option<f64>,
    /// Diagonal regularizer on the within-class scatter.
    #[arg(long)]
    reg_sigma: Option<f64>,
    #[arg(long)]
    fuzzifier: Option<f64>,
    #[arg(long)]
    converge_eps: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Slope tolerance for class matching, dB.
    #[arg(long)]
    match_eps: Option<f64>,
    /// Matching slopes needed to admit an unlabeled sample.
    #[arg(long)]
    match_threshold: Option<usize>,
    /// Labeled share of the training set; 1 admits nothing.
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    knn_k: Option<usize>,
    /// Value substituted for unheard APs, dBm.
    #[arg(long, allow_hyphen_values = true)]
    fill_dbm: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ParamArgs {
    fn params(&self) -> Result<TrainParams> {
        let d = TrainParams::default();
        let p = TrainParams {
            intrinsic_dim: self.dim.unwrap_or(d.intrinsic_dim),
            dim_energy: self.dim_energy.unwrap_or(d.dim_energy),
            n_clusters: self.clusters.unwrap_or(d.n_clusters),
            affinity_k: self.affinity_k.unwrap_or(d.affinity_k),
            heat_t: self.heat_t.or(d.heat_t),
            kernel_lambda: self.kernel_lambda.or(d.kernel_lambda),
            reg_sigma: self.reg_sigma.unwrap_or(d.reg_sigma),
            fuzzifier_m: self.fuzzifier.unwrap_or(d.fuzzifier_m),
            converge_eps: self.converge_eps.unwrap_or(d.converge_eps),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            match_eps: self.match_eps.unwrap_or(d.match_eps),
            match_threshold: self.match_threshold.unwrap_or(d.match_threshold),
            update_ratio: self.ratio.unwrap_or(d.update_ratio),
            knn_k: self.knn_k.unwrap_or(d.knn_k),
            fill_dbm: self.fill_dbm.unwrap_or(d.fill_dbm),
            seed: self.seed.unwrap_or(d.seed),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Radio map CSV.
    #[arg(long)]
    map: PathBuf,
    /// Unlabeled pool CSV.
    #[arg(long)]
    unlabeled: Option<PathBuf>,
    /// Model JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Write training diagnostics as JSON to this file.
    #[arg(long, value_name = "FILE")]
    emit_diagnostics: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args, Debug)]
struct LocateArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Query CSV; `x,y` columns are optional and ignored.
    #[arg(long)]
    queries: PathBuf,
    /// Fixes CSV to write; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Neighbors to average; defaults to the model's setting.
    #[arg(long)]
    knn_k: Option<usize>,
    /// Value for unheard APs; defaults to the model's setting.
    #[arg(long, allow_hyphen_values = true)]
    fill_dbm: Option<f64>,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Radio map CSV.
    #[arg(long)]
    map: PathBuf,
    /// Query CSV with `x,y` ground truth.
    #[arg(long)]
    queries: PathBuf,
    /// Unlabeled pool CSV.
    #[arg(long)]
    unlabeled: Option<PathBuf>,
    /// Comma-separated error radii in meters.
    #[arg(long, value_delimiter = ',', default_values_t = eval::DEFAULT_RADII.to_vec())]
    radii: Vec<f64>,
    /// Also report accuracy per coordinate sub-area.
    #[arg(long)]
    areas: Option<usize>,
    /// Report JSON to write; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of every accuracy curve.
    #[arg(long, value_name = "FILE")]
    curves: Option<PathBuf>,
    /// Include wall-clock timings (makes the report run-dependent).
    #[arg(long)]
    timings: bool,
}

impl DataArgs {
    fn load(&self, fill_dbm: f64) -> Result<EvalData> {
        let map = RadioMap::load(&self.map, fill_dbm)?;
        let queries = ObservationSet::load(&self.queries)?;
        let unlabeled = self.unlabeled.as_ref().map(ObservationSet::load).transpose()?;
        EvalData::new(map, unlabeled, queries)
    }

    fn options(&self) -> EvalOptions {
        EvalOptions {
            radii: self.radii.clone(),
            n_areas: self.areas,
            timings: self.timings,
        }
    }

    fn write(&self, report: &eval::EvalReport) -> Result<()> {
        let mut json = report.to_json()?;
        json.push('\n');
        emit(self.out.as_deref(), json.as_bytes())?;
        if let Some(path) = &self.curves {
            let mut buf = Vec::new();
            report.write_curves_csv(&mut buf)?;
            write_file(path, &buf)?;
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated subset of knn, lde, sde.
    #[arg(long, value_delimiter = ',', default_value = "knn,lde,sde")]
    methods: Vec<Method>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    data: DataArgs,
    /// intrinsic_dim, n_clusters, affinity_k, reg_sigma or update_ratio.
    #[arg(long)]
    axis: SweepAxis,
    /// Comma-separated values or an inclusive integer range such as `1..27`.
    #[arg(long)]
    values: String,
    #[command(flatten)]
    params: ParamArgs,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_file(p, bytes),
        None => io::stdout().write_all(bytes).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = args.sim_config();
    let tb = build_synthetic_radio_map(&cfg)?;
    tb.map.save(&args.out)?;
    if let Some(path) = &args.queries {
        tb.queries.save(path)?;
    }
    if let Some(path) = &args.unlabeled {
        tb.unlabeled.save(path)?;
    }
    eprintln!(
        "layout: {} RPs on a {} m grid over {} m x {} m, {} APs; {} queries, {} unlabeled",
        tb.map.len(),
        cfg.grid_interval,
        cfg.hallway_length,
        cfg.hallway_width,
        tb.layout.aps.len(),
        tb.queries.len(),
        tb.unlabeled.len()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let params = args.params.params()?;
    let map = RadioMap::load(&args.map, params.fill_dbm)?;
    let pool = match &args.unlabeled {
        Some(path) => {
            let set = ObservationSet::load(path)?;
            if set.ap_ids != map.ap_ids() {
                return Err(Error::Schema("unlabeled AP roster differs from the radio map".into()));
            }
            set.samples
        }
        None => Vec::new(),
    };
    let outcome = train_sde(&map, &pool, &params)?;
    outcome.model.save(&args.out)?;
    if let Some(path) = &args.emit_diagnostics {
        let mut json = serde_json::to_string_pretty(&outcome.diagnostics).map_err(|e| Error::Validation(e.to_string()))?;
        json.push('\n');
        write_file(path, json.as_bytes())?;
    }
    let d = &outcome.diagnostics;
    let eig: Vec<String> = d.eigenvalues.iter().map(|v| format!("{v:.6e}")).collect();
    println!("dim={}", d.dim);
    println!("admitted={}", d.admitted);
    println!("rejected={}", d.rejected);
    println!("eigenvalues={}", eig.join(","));
    Ok(())
}

fn locate(args: LocateArgs) -> Result<()> {
    let model = EmbeddingModel::load(&args.model)?;
    let queries = ObservationSet::load(&args.queries)?;
    if queries.ap_ids != model.ap_ids {
        return Err(Error::Schema(format!(
            "query AP roster ({} APs) differs from the model's ({} APs)",
            queries.ap_ids.len(),
            model.ap_ids.len()
        )));
    }
    let k = args.knn_k.unwrap_or(model.params.knn_k);
    let fill = args.fill_dbm.unwrap_or(model.params.fill_dbm);
    let locator = SdeLocator::new(&model);
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Validation(e.to_string());
    w.write_record(["x", "y", "neighbors"]).map_err(csv_err)?;
    for q in &queries.samples {
        let fix = locator.locate(q, k, fill, &mut OpCount::default())?;
        let ids: Vec<String> = fix.neighbor_ids.iter().map(usize::to_string).collect();
        w.write_record([fix.coord.x.to_string(), fix.coord.y.to_string(), ids.join(";")])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
    emit(args.out.as_deref(), &bytes)
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let params = args.params.params()?;
    let data = args.data.load(params.fill_dbm)?;
    let report = eval::compare_methods(&data, &params, &args.methods, &args.data.options())?;
    args.data.write(&report)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let params = args.params.params()?;
    let values = eval::parse_values(&args.values)?;
    let data = args.data.load(params.fill_dbm)?;
    let report = eval::run_sweep(&data, args.axis, &values, &params, &args.data.options())?;
    args.data.write(&report)
}

/// Inserts the flags from a `--config FILE` right after the subcommand so
/// that later command-line flags override them.
fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            match it.next() {
                Some(p) => path = Some(p),
                None => return Err(Error::Config("--config needs a file".into())),
            }
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::Io {
        path: path.clone().into(),
        source: e,
    })?;
    let flags = config_flags(&text)?;
    // argv[0], subcommand, then config flags, then the remaining command line
    let split = rest.len().min(2);
    let mut out: Vec<String> = rest[..split].to_vec();
    out.extend(flags);
    out.extend_from_slice(&rest[split..]);
    Ok(out)
}

fn config_flags(text: &str) -> Result<Vec<String>> {
    let mut flags = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected key=value, got `{line}`"),
            });
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        match value {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            _ => flags.push(format!("--{key}={value}")),
        }
    }
    Ok(flags)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train(a),
        Command::Locate(a) => locate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
