//! The `repalign` command line.
//!
//! Every run prints its fully resolved configuration as JSON before doing any
//! work. Outputs are assembled in memory and written only after the whole
//! command has succeeded, so a failing run leaves no partial files.
//!
//! Exit codes: `0` success, `1` usage or input-validation error, `2`
//! numerical or data failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    analyze_collection, cross_layer_grid, export_report, grid_csv, import_report, pairs_csv, stats_csv,
    AnalysisBundle, AnalysisConfig, ExportFormat, PairOptions, ANALYSIS_SCHEMA,
};
use crate::embedding::{encode_embedding_set, load_embedding_set, manifest_path, split_indices, EmbeddingSet, SetMeta};
use crate::error::{Error, Result};
use crate::evaluation::{fit_aligner, summary_csv, AlignParams, AlignmentReport, Fitted, Method};
use crate::inn::{grad_check, inn_dtype, random_inn_with, read_inn, write_inn, InnModel, RandomInnSpec, TrainConfig};
use crate::linear::DEFAULT_VARIANCE_THRESHOLD;
use crate::numerics::Matrix;
use crate::synth::{recovery_problem, synthetic_collection, SYNTH_DATASET};

pub const LOG_ENV: &str = "REPALIGN_LOG";

#[derive(Debug, Parser)]
#[command(name = "repalign", version, about = "Fit and evaluate bijective alignments between embedding spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Recover a random invertible map from synthetic data, or write a
    /// synthetic model collection with --models
    Synth(SynthArgs),
    /// Fit one aligner on all rows of a pair of sets
    Fit(FitArgs),
    /// Fit on a train split and report train/test distances
    Eval(EvalArgs),
    /// Pairwise distances and per-layer statistics over a model collection
    Analyze(AnalyzeArgs),
    /// Distances from every layer of one model to every layer of another
    CrossLayer(CrossLayerArgs),
    /// Re-export an analysis.json bundle
    Export(ExportArgs),
    /// Compare analytic INN gradients with finite differences
    GradCheck(GradCheckArgs),
    /// Check EMB1 and INN1 files
    Validate(ValidateArgs),
}

/// Overrides for the INN training defaults.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TrainArgs {
    /// Coupling layers of the fitted INN
    #[arg(long)]
    pub inn_layers: Option<usize>,
    /// Hidden width of the scale and translation nets
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub s_cap: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
}

impl TrainArgs {
    pub fn resolve(&self, seed: u64) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            layers: self.inn_layers.unwrap_or(d.layers),
            width: self.width.unwrap_or(d.width),
            s_cap: self.s_cap.unwrap_or(d.s_cap),
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
            patience: self.patience.unwrap_or(d.patience),
            validation_fraction: self.validation_fraction.unwrap_or(d.validation_fraction),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MethodArgs {
    /// CCA components (default: all)
    #[arg(long)]
    pub components: Option<usize>,
    /// Share of squared singular value mass SVCCA keeps
    #[arg(long, default_value_t = DEFAULT_VARIANCE_THRESHOLD)]
    pub variance_threshold: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainArgs,
}

impl MethodArgs {
    fn params(&self, seed: u64) -> Result<AlignParams> {
        Ok(AlignParams {
            components: self.components,
            variance_threshold: self.variance_threshold,
            train: self.train.resolve(seed)?,
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Coupling layers of the ground-truth map
    #[arg(long, default_value_t = 4)]
    pub gt_layers: usize,
    /// Comma-separated methods, or `all`
    #[arg(long, default_value = "all")]
    pub methods: String,
    #[arg(long, default_value_t = 0.5)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write a collection of MODELS model variants instead
    #[arg(long)]
    pub models: Option<usize>,
    /// Layers per model variant in collection mode
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub method: MethodArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub method_args: MethodArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub method_args: MethodArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    /// EMB1 files, or directories whose `.emb` files are all used
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "linreg")]
    pub method: String,
    /// Parallel pair fits
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub method_args: MethodArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CrossLayerArgs {
    /// Layer sets of the source model (files or directories)
    #[arg(long, num_args = 1.., required = true)]
    pub a: Vec<PathBuf>,
    /// Layer sets of the target model
    #[arg(long, num_args = 1.., required = true)]
    pub b: Vec<PathBuf>,
    #[arg(long, default_value = "linreg")]
    pub method: String,
    #[arg(long, default_value_t = 0.5)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub method_args: MethodArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    /// analysis.json written by analyze or cross-layer
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long, default_value = "csv")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 16)]
    pub width: usize,
    /// Rows in the random batch
    #[arg(long, default_value_t = 16)]
    pub rows: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Check this INN1 model instead of a random one
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Also write gradcheck.json here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
}

/// Files to write once a command has succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn bytes(&mut self, name: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn text(&mut self, name: impl Into<PathBuf>, text: String) {
        self.bytes(name, text.into_bytes());
    }

    fn json<T: Serialize>(&mut self, name: impl Into<PathBuf>, value: &T) {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialise");
        text.push('\n');
        self.text(name, text);
    }

    fn embedding(&mut self, name: &str, set: &EmbeddingSet) {
        let (bytes, _, manifest) = encode_embedding_set(set);
        self.bytes(manifest_path(Path::new(name)), manifest.into_bytes());
        self.bytes(name, bytes);
    }

    fn commit(self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, bytes) in self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            log::info!("wrote {}", path.display());
        }
        Ok(())
    }
}

fn parse_methods(spec: &str) -> Result<Vec<Method>> {
    if spec == "all" {
        return Ok(Method::ALL.to_vec());
    }
    let methods = spec
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<Vec<Method>>>()?;
    if methods.is_empty() {
        return Err(Error::invalid("no methods selected"));
    }
    Ok(methods)
}

/// Expand directories to their `.emb` files (sorted by name).
fn collect_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "emb"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("no input sets found"));
    }
    Ok(out)
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<EmbeddingSet>> {
    collect_inputs(paths)?.iter().map(load_embedding_set).collect()
}

fn check_pair(method: Method, x: &EmbeddingSet, y: &EmbeddingSet) -> Result<()> {
    if x.n() != y.n() {
        return Err(Error::invalid(format!(
            "{} has {} rows but {} has {}",
            x.id(),
            x.n(),
            y.id(),
            y.n()
        )));
    }
    if method == Method::Inn && x.d() != y.d() {
        return Err(Error::invalid(format!(
            "an INN needs equal dimensions, got {} and {}",
            x.d(),
            y.d()
        )));
    }
    Ok(())
}

fn fitted_model_output(out: &mut Outputs, fitted: &Fitted) {
    match fitted {
        Fitted::Inn(o) => out.bytes("model.inn1", write_inn(&o.model)),
        Fitted::Linreg(m) => out.json("model.json", m),
        Fitted::Cca(m) | Fitted::Pwcca(m, _) => out.json("model.json", m),
        Fitted::Svcca(m) => out.json("model.json", m),
    }
}

fn split_rows(x: &Matrix, y: &Matrix, frac: f64, seed: u64) -> Result<[Matrix; 4]> {
    let (tr, te) = split_indices(x.nrows(), frac, seed)?;
    Ok([x.select_rows(&tr), y.select_rows(&tr), x.select_rows(&te), y.select_rows(&te)])
}

fn synth(a: &SynthArgs, config: &Value) -> Result<Outputs> {
    let mut out = Outputs::default();
    if let Some(models) = a.models {
        for set in synthetic_collection(models, a.layers, a.n, a.dim, a.seed)? {
            out.embedding(&format!("m{}_l{}.emb", set.meta.seed, set.meta.layer), &set);
        }
        return Ok(out);
    }
    let methods = parse_methods(&a.methods)?;
    let params = a.method.params(a.seed)?;
    let (x, y, gt) = recovery_problem(a.n, a.dim, a.gt_layers, a.seed)?;
    let [xtr, ytr, xte, yte] = split_rows(&x, &y, a.train_frac, a.seed)?;
    let xs = EmbeddingSet::new(x, SetMeta::new("synth-source", a.seed, 0, SYNTH_DATASET))?;
    let ys = EmbeddingSet::new(y, SetMeta::new("synth-target", a.seed, 0, SYNTH_DATASET))?;

    let mut reports = Vec::new();
    for m in methods {
        log::info!("fitting {m}");
        let fitted = fit_aligner(m, &xtr, &ytr, &params)?;
        if let Fitted::Inn(o) = &fitted {
            out.bytes("model.inn1", write_inn(&o.model));
        }
        reports.push(fitted.report(&xtr, &ytr, &xte, &yte)?.with_pair(xs.id(), ys.id()));
    }
    out.embedding("x.emb", &xs);
    out.embedding("y.emb", &ys);
    out.bytes("ground_truth.inn1", write_inn(&gt));
    out.text("summary.csv", summary_csv(&reports));
    out.json("report.json", &json!({ "config": config, "reports": reports }));
    for r in &reports {
        println!("{:<7} train_rel {:<12.6e} test_rel {:.6e}", r.method.name(), r.train_rel, r.test_rel);
    }
    Ok(out)
}

fn fit(a: &FitArgs, config: &Value) -> Result<Outputs> {
    let method: Method = a.method.parse()?;
    let params = a.method_args.params(a.seed)?;
    let x = load_embedding_set(&a.x)?;
    let y = load_embedding_set(&a.y)?;
    check_pair(method, &x, &y)?;
    let fitted = fit_aligner(method, x.data(), y.data(), &params)?;
    let train = fitted.distance(x.data(), y.data())?;
    let mut out = Outputs::default();
    fitted_model_output(&mut out, &fitted);
    out.json(
        "report.json",
        &json!({
            "config": config,
            "method": method,
            "pair": [x.id(), y.id()],
            "train_raw": train.raw,
            "train_rel": train.rel,
            "aux": fitted.aux(),
        }),
    );
    println!("{method} train_rel {:.6e}", train.rel);
    Ok(out)
}

fn eval(a: &EvalArgs, config: &Value) -> Result<Outputs> {
    let method: Method = a.method.parse()?;
    let params = a.method_args.params(a.seed)?;
    let x = load_embedding_set(&a.x)?;
    let y = load_embedding_set(&a.y)?;
    check_pair(method, &x, &y)?;
    let [xtr, ytr, xte, yte] = split_rows(x.data(), y.data(), a.train_frac, a.seed)?;
    let fitted = fit_aligner(method, &xtr, &ytr, &params)?;
    let report: AlignmentReport = fitted.report(&xtr, &ytr, &xte, &yte)?.with_pair(x.id(), y.id());
    let mut out = Outputs::default();
    fitted_model_output(&mut out, &fitted);
    out.json("report.json", &json!({ "config": config, "report": report }));
    println!("{method} train_rel {:.6e} test_rel {:.6e}", report.train_rel, report.test_rel);
    Ok(out)
}

fn bundle_outputs(out: &mut Outputs, bundle: &AnalysisBundle) {
    if !bundle.pairs.is_empty() {
        out.text("analysis.csv", pairs_csv(&bundle.pairs));
    }
    if !bundle.layer_stats.is_empty() {
        out.text("layer_stats.csv", stats_csv(&bundle.layer_stats));
    }
    if let Some(grid) = &bundle.cross_layer {
        out.text("cross_layer.csv", grid_csv(grid));
    }
    out.json("analysis.json", bundle);
}

fn analyze(a: &AnalyzeArgs) -> Result<Outputs> {
    let method: Method = a.method.parse()?;
    let params = a.method_args.params(a.seed)?;
    let sets = load_all(&a.inputs)?;
    let opts = PairOptions {
        train_fraction: a.train_frac,
        split_seed: a.seed,
        jobs: a.jobs,
    };
    let bundle = analyze_collection(&sets, method, &params, &opts)?;
    for s in &bundle.layer_stats {
        println!(
            "layer {:>2}: {} pairs, median rel {:.6e} (min {:.6e}, max {:.6e})",
            s.layer, s.count, s.median, s.min, s.max
        );
    }
    let mut out = Outputs::default();
    bundle_outputs(&mut out, &bundle);
    Ok(out)
}

fn cross_layer(a: &CrossLayerArgs) -> Result<Outputs> {
    let method: Method = a.method.parse()?;
    let params = a.method_args.params(a.seed)?;
    let sa = load_all(&a.a)?;
    let sb = load_all(&a.b)?;
    let opts = PairOptions {
        train_fraction: a.train_frac,
        split_seed: a.seed,
        jobs: 1,
    };
    let mut seeds = vec![sa[0].meta.seed, sb[0].meta.seed];
    seeds.dedup();
    let config = AnalysisConfig {
        method,
        seeds,
        layers: Vec::new(),
        dataset: sa[0].meta.dataset.clone(),
        kind: sa[0].meta.kind,
        train_fraction: a.train_frac,
        split_seed: a.seed,
        params: params.clone(),
    };
    let grid = cross_layer_grid(&[(sa, sb)], method, &params, &opts)?;
    for (i, row) in grid.rel.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.4e}")).collect();
        println!("layer {:>2}: {}", grid.layers[i], cells.join(" "));
    }
    let bundle = AnalysisBundle {
        schema: ANALYSIS_SCHEMA,
        config: AnalysisConfig {
            layers: grid.layers.clone(),
            ..config
        },
        pairs: Vec::new(),
        layer_stats: Vec::new(),
        cross_layer: Some(grid),
    };
    let mut out = Outputs::default();
    bundle_outputs(&mut out, &bundle);
    Ok(out)
}

fn export(a: &ExportArgs) -> Result<()> {
    let format: ExportFormat = a.format.parse()?;
    let bundle = import_report(&a.bundle)?;
    for f in export_report(&bundle, &a.out, format)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn grad_check_cmd(a: &GradCheckArgs) -> Result<(bool, Outputs)> {
    let model: InnModel<f64> = match &a.model {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            match inn_dtype(&bytes) {
                Some(crate::embedding::Dtype::F32) => read_inn::<f32>(&bytes)?.cast(),
                _ => read_inn::<f64>(&bytes)?,
            }
        }
        None => {
            let spec = RandomInnSpec {
                width: a.width,
                ..RandomInnSpec::default()
            };
            random_inn_with(a.dim, a.layers, a.seed, &spec)?
        }
    };
    if a.rows == 0 || !(a.tolerance > 0.0) {
        return Err(Error::invalid("rows and tolerance must be positive"));
    }
    let report = grad_check(&model, a.rows, a.seed, a.tolerance)?;
    let verdict = if report.passed { "<" } else { ">" };
    println!(
        "max rel err {:.3e} {verdict} {:e} (max abs err {:.3e}) over {} parameters: {}",
        report.max_rel_err,
        a.tolerance,
        report.max_abs_err,
        report.n_params,
        if report.passed { "pass" } else { "FAIL" }
    );
    let mut out = Outputs::default();
    out.json("gradcheck.json", &report);
    Ok((report.passed, out))
}

fn validate_one(path: &Path) -> Result<String> {
    if path.extension().is_some_and(|e| e == "inn1") {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let corrupt = |e: Error| match e {
            Error::InvalidInput(r) => Error::corrupt(path, r),
            other => other,
        };
        let (dim, layers) = match inn_dtype(&bytes) {
            Some(crate::embedding::Dtype::F32) => {
                let m = read_inn::<f32>(&bytes).map_err(corrupt)?;
                (m.dim, m.layers.len())
            }
            _ => {
                let m = read_inn::<f64>(&bytes).map_err(corrupt)?;
                (m.dim, m.layers.len())
            }
        };
        Ok(format!("INN1 dim {dim}, {layers} layers"))
    } else {
        let set = load_embedding_set(path)?;
        Ok(format!("EMB1 {}x{} {:?} {}", set.n(), set.d(), set.dtype(), set.id()))
    }
}

fn validate(a: &ValidateArgs) -> bool {
    let mut ok = true;
    for p in &a.paths {
        match validate_one(p) {
            Ok(msg) => println!("ok   {}: {msg}", p.display()),
            Err(e) => {
                ok = false;
                println!("FAIL {}: {e}", p.display());
            }
        }
    }
    ok
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::NotBijective { .. } => 1,
        _ => 2,
    }
}

fn resolved_config(cmd: &Command) -> Result<Value> {
    let mut v = serde_json::to_value(cmd).expect("arguments serialise");
    let seed_and_args = match cmd {
        Command::Synth(a) => Some((a.seed, &a.method)),
        Command::Fit(a) => Some((a.seed, &a.method_args)),
        Command::Eval(a) => Some((a.seed, &a.method_args)),
        Command::Analyze(a) => Some((a.seed, &a.method_args)),
        Command::CrossLayer(a) => Some((a.seed, &a.method_args)),
        _ => None,
    };
    if let Some((seed, args)) = seed_and_args {
        let params = args.params(seed)?;
        v["resolved"] = serde_json::to_value(params).expect("parameters serialise");
    }
    Ok(v)
}

fn execute(cmd: &Command) -> Result<i32> {
    let config = resolved_config(cmd)?;
    println!("{}", serde_json::to_string_pretty(&config).expect("config serialises"));
    let (outputs, dir) = match cmd {
        Command::Synth(a) => (synth(a, &config)?, Some(&a.out)),
        Command::Fit(a) => (fit(a, &config)?, Some(&a.out)),
        Command::Eval(a) => (eval(a, &config)?, Some(&a.out)),
        Command::Analyze(a) => (analyze(a)?, Some(&a.out)),
        Command::CrossLayer(a) => (cross_layer(a)?, Some(&a.out)),
        Command::Export(a) => {
            export(a)?;
            return Ok(0);
        }
        Command::GradCheck(a) => {
            let (passed, outputs) = grad_check_cmd(a)?;
            if let Some(dir) = &a.out {
                outputs.commit(dir)?;
            }
            return Ok(if passed { 0 } else { 2 });
        }
        Command::Validate(a) => return Ok(if validate(a) { 0 } else { 2 }),
    };
    if let Some(dir) = dir {
        outputs.commit(dir)?;
    }
    Ok(0)
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter(LOG_ENV)).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn methods_list() {
        assert_eq!(parse_methods("all").unwrap().len(), 5);
        assert_eq!(parse_methods("inn,cca").unwrap(), vec![Method::Inn, Method::Cca]);
        assert!(parse_methods("inn,foo").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["repalign", "frobnicate"]), 1);
        assert_eq!(run(["repalign", "eval", "--method", "inn"]), 1);
        assert_eq!(run(["repalign", "--help"]), 0);
    }

    #[test]
    fn train_overrides_are_validated() {
        let args = TrainArgs {
            patience: Some(1000),
            ..TrainArgs::default()
        };
        assert!(args.resolve(0).is_err());
        let args = TrainArgs {
            lr: Some(0.01),
            ..TrainArgs::default()
        };
        let cfg = args.resolve(7).unwrap();
        assert_eq!((cfg.learning_rate, cfg.seed), (0.01, 7));
    }
}
