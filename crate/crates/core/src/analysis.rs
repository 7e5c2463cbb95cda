//! Collection-level pipelines: pairwise distances between model seeds,
//! per-layer distribution statistics and cross-layer grids, plus their
//! CSV/JSON exports.
//!
//! Each unordered pair of seeds is fitted once, from the lower seed to the
//! higher one, and scored on the held-out rows. Statistics summarise the
//! relative test distance. Quantiles use the nearest-rank rule
//! `q_p = sorted[ceil(p * n) - 1]`; `std` is the population standard
//! deviation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{split_indices, EmbeddingSet, Kind};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_aligner, AlignParams, AlignmentReport, Method};
use crate::numerics::Matrix;

pub const ANALYSIS_SCHEMA: u32 = 1;
pub const PAIRS_HEADER: &str = "layer,pair_src_seed,pair_dst_seed,method,raw,rel";
pub const STATS_HEADER: &str = "layer,count,min,q1,median,q3,max,mean,std";
pub const GRID_HEADER: &str = "src_layer,dst_layer,method,pairs,raw,rel";

/// How each pair is split and how many fits may run at once.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOptions {
    pub train_fraction: f64,
    /// Seed of the shared train/test row split.
    pub split_seed: u64,
    /// Worker threads; `0` lets the pool decide.
    pub jobs: usize,
}

impl Default for PairOptions {
    fn default() -> Self {
        PairOptions {
            train_fraction: 0.5,
            split_seed: 0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub layer: u32,
    pub pair_src_seed: u64,
    pub pair_dst_seed: u64,
    pub method: Method,
    pub raw: f64,
    pub rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub layer: u32,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossLayerGrid {
    pub method: Method,
    pub layers: Vec<u32>,
    /// Number of model pairs averaged into every cell.
    pub pairs: usize,
    /// `raw[i][j]`: mean test distance of source layer `layers[i]` mapped
    /// onto target layer `layers[j]`.
    pub raw: Vec<Vec<f64>>,
    pub rel: Vec<Vec<f64>>,
}

/// Echo of what produced a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub method: Method,
    pub seeds: Vec<u64>,
    pub layers: Vec<u32>,
    pub dataset: String,
    pub kind: Kind,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub params: AlignParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBundle {
    #[serde(rename = "analysis-schema")]
    pub schema: u32,
    pub config: AnalysisConfig,
    /// One entry per fitted pair, sorted by layer then seeds.
    pub pairs: Vec<PairEntry>,
    pub layer_stats: Vec<LayerStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_layer: Option<CrossLayerGrid>,
}

impl AnalysisBundle {
    /// Symmetric `seeds x seeds` matrix of relative distances for one layer
    /// (zero diagonal, `NaN` where a pair is missing).
    pub fn pair_matrix(&self, layer: u32) -> Matrix {
        let seeds = &self.config.seeds;
        let pos = |s: u64| seeds.iter().position(|&x| x == s);
        let mut m = Matrix::from_fn(seeds.len(), seeds.len(), |i, j| if i == j { 0.0 } else { f64::NAN });
        for e in self.pairs.iter().filter(|e| e.layer == layer) {
            if let (Some(i), Some(j)) = (pos(e.pair_src_seed), pos(e.pair_dst_seed)) {
                m[(i, j)] = e.rel;
                m[(j, i)] = e.rel;
            }
        }
        m
    }

    fn is_empty(&self) -> bool {
        let grid_empty = self.cross_layer.as_ref().is_none_or(|g| g.layers.is_empty());
        self.pairs.is_empty() && grid_empty
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

struct Split {
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Split {
    fn new(n: usize, opts: &PairOptions) -> Result<Self> {
        let (train, test) = split_indices(n, opts.train_fraction, opts.split_seed)?;
        Ok(Split { train, test })
    }

    fn evaluate(&self, method: Method, x: &Matrix, y: &Matrix, params: &AlignParams) -> Result<AlignmentReport> {
        evaluate_aligner(
            method,
            &x.select_rows(&self.train),
            &y.select_rows(&self.train),
            &x.select_rows(&self.test),
            &y.select_rows(&self.test),
            params,
        )
    }
}

fn check_same_rows(sets: &[&EmbeddingSet]) -> Result<()> {
    let first = sets[0];
    for s in sets {
        if s.n() != first.n() || s.d() != first.d() {
            return Err(Error::invalid(format!(
                "{} is {}x{}, expected {}x{} like {}",
                s.id(),
                s.n(),
                s.d(),
                first.n(),
                first.d(),
                first.id()
            )));
        }
        if s.meta.dataset != first.meta.dataset {
            return Err(Error::invalid(format!(
                "{} and {} come from different datasets, so their rows are not paired",
                s.id(),
                first.id()
            )));
        }
    }
    Ok(())
}

/// Fit every pair of sets (one layer, different model seeds) from the lower
/// seed to the higher seed and record the test distances.
pub fn pairwise_distance_matrix(
    sets: &[EmbeddingSet],
    method: Method,
    params: &AlignParams,
    opts: &PairOptions,
) -> Result<Vec<PairEntry>> {
    if sets.len() < 2 {
        return Err(Error::invalid("pairwise distances need at least two sets"));
    }
    let mut sorted: Vec<&EmbeddingSet> = sets.iter().collect();
    sorted.sort_by_key(|s| s.meta.seed);
    check_same_rows(&sorted)?;
    let layer = sorted[0].meta.layer;
    for w in sorted.windows(2) {
        if w[0].meta.seed == w[1].meta.seed {
            return Err(Error::invalid(format!("seed {} appears twice", w[0].meta.seed)));
        }
    }
    for s in &sorted {
        if s.meta.layer != layer || s.meta.kind != sorted[0].meta.kind {
            return Err(Error::invalid("pairwise sets must share layer and kind"));
        }
    }
    let split = Split::new(sorted[0].n(), opts)?;
    let jobs: Vec<(usize, usize)> = (0..sorted.len())
        .flat_map(|i| (i + 1..sorted.len()).map(move |j| (i, j)))
        .collect();
    let run = || {
        jobs.par_iter()
            .map(|&(i, j)| {
                let (a, b) = (sorted[i], sorted[j]);
                log::info!("layer {layer}: fitting seed {} -> {}", a.meta.seed, b.meta.seed);
                let r = split.evaluate(method, a.data(), b.data(), params)?;
                Ok(PairEntry {
                    layer,
                    pair_src_seed: a.meta.seed,
                    pair_dst_seed: b.meta.seed,
                    method,
                    raw: r.test_raw,
                    rel: r.test_rel,
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    pool(opts.jobs)?.install(run)
}

/// Nearest-rank quantile of an ascending, non-empty slice.
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Five-number summary plus mean and standard deviation of every layer's
/// distances.
pub fn layer_distribution_stats(per_layer: &BTreeMap<u32, Vec<f64>>) -> Result<Vec<LayerStats>> {
    if per_layer.is_empty() {
        return Err(Error::invalid("no layers to summarise"));
    }
    per_layer
        .iter()
        .map(|(&layer, values)| {
            if values.is_empty() {
                return Err(Error::invalid(format!("layer {layer} has no distances")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {layer} has non-finite distances")));
            }
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len() as f64;
            let mean = sorted.iter().sum::<f64>() / n;
            let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            Ok(LayerStats {
                layer,
                count: sorted.len(),
                min: sorted[0],
                q1: nearest_rank(&sorted, 0.25),
                median: nearest_rank(&sorted, 0.5),
                q3: nearest_rank(&sorted, 0.75),
                max: sorted[sorted.len() - 1],
                mean,
                std: var.sqrt(),
            })
        })
        .collect()
}

/// Relative test distances grouped by layer.
pub fn distances_by_layer(pairs: &[PairEntry]) -> BTreeMap<u32, Vec<f64>> {
    let mut out: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for p in pairs {
        out.entry(p.layer).or_default().push(p.rel);
    }
    out
}

fn by_layer(sets: &[EmbeddingSet]) -> Result<BTreeMap<u32, &EmbeddingSet>> {
    let mut out = BTreeMap::new();
    for s in sets {
        if out.insert(s.meta.layer, s).is_some() {
            return Err(Error::invalid(format!(
                "model {} has layer {} twice",
                s.meta.model_id, s.meta.layer
            )));
        }
    }
    Ok(out)
}

/// Grid of test distances from every layer of model A to every layer of
/// model B, averaged over the given model pairs.
pub fn cross_layer_grid(
    model_pairs: &[(Vec<EmbeddingSet>, Vec<EmbeddingSet>)],
    method: Method,
    params: &AlignParams,
    opts: &PairOptions,
) -> Result<CrossLayerGrid> {
    let Some(first) = model_pairs.first() else {
        return Err(Error::invalid("cross-layer grid needs at least one model pair"));
    };
    let layers: Vec<u32> = by_layer(&first.0)?.keys().copied().collect();
    if layers.is_empty() {
        return Err(Error::invalid("cross-layer grid needs at least one layer"));
    }
    let mut jobs = Vec::new();
    let mut all = Vec::new();
    for (a, b) in model_pairs {
        let (la, lb) = (by_layer(a)?, by_layer(b)?);
        if !la.keys().eq(layers.iter()) || !lb.keys().eq(layers.iter()) {
            return Err(Error::invalid("every model must provide the same layer list"));
        }
        all.extend(la.values().chain(lb.values()).copied());
        for (i, &li) in layers.iter().enumerate() {
            for (j, &lj) in layers.iter().enumerate() {
                jobs.push((i, j, la[&li], lb[&lj]));
            }
        }
    }
    check_same_rows(&all)?;
    let split = Split::new(all[0].n(), opts)?;
    let results = pool(opts.jobs)?.install(|| {
        jobs.par_iter()
            .map(|&(i, j, a, b)| Ok((i, j, split.evaluate(method, a.data(), b.data(), params)?)))
            .collect::<Result<Vec<_>>>()
    })?;

    let k = layers.len();
    let count = model_pairs.len() as f64;
    let mut raw = vec![vec![0.0; k]; k];
    let mut rel = vec![vec![0.0; k]; k];
    for (i, j, r) in results {
        raw[i][j] += r.test_raw / count;
        rel[i][j] += r.test_rel / count;
    }
    Ok(CrossLayerGrid {
        method,
        layers,
        pairs: model_pairs.len(),
        raw,
        rel,
    })
}

/// Group a collection by layer, run the pairwise pipeline on every layer and
/// summarise the result.
pub fn analyze_collection(
    sets: &[EmbeddingSet],
    method: Method,
    params: &AlignParams,
    opts: &PairOptions,
) -> Result<AnalysisBundle> {
    let Some(first) = sets.first() else {
        return Err(Error::invalid("empty collection"));
    };
    let mut layers: BTreeMap<u32, Vec<EmbeddingSet>> = BTreeMap::new();
    for s in sets {
        if s.meta.kind != first.meta.kind || s.meta.dataset != first.meta.dataset {
            return Err(Error::invalid("a collection must share dataset and kind"));
        }
        layers.entry(s.meta.layer).or_default().push(s.clone());
    }
    let mut pairs = Vec::new();
    for group in layers.values() {
        pairs.extend(pairwise_distance_matrix(group, method, params, opts)?);
    }
    let mut seeds: Vec<u64> = sets.iter().map(|s| s.meta.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let layer_stats = layer_distribution_stats(&distances_by_layer(&pairs))?;
    Ok(AnalysisBundle {
        schema: ANALYSIS_SCHEMA,
        config: AnalysisConfig {
            method,
            seeds,
            layers: layers.keys().copied().collect(),
            dataset: first.meta.dataset.clone(),
            kind: first.meta.kind,
            train_fraction: opts.train_fraction,
            split_seed: opts.split_seed,
            params: params.clone(),
        },
        pairs,
        layer_stats,
        cross_layer: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            _ => Err(Error::invalid(format!("unknown export format {s:?} (csv or json)"))),
        }
    }
}

fn schema_line() -> String {
    format!("# analysis-schema: {ANALYSIS_SCHEMA}\n")
}

pub fn pairs_csv(pairs: &[PairEntry]) -> String {
    let mut out = schema_line();
    out.push_str(PAIRS_HEADER);
    out.push('\n');
    for p in pairs {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.layer, p.pair_src_seed, p.pair_dst_seed, p.method, p.raw, p.rel
        ));
    }
    out
}

pub fn stats_csv(stats: &[LayerStats]) -> String {
    let mut out = schema_line();
    out.push_str(STATS_HEADER);
    out.push('\n');
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.layer, s.count, s.min, s.q1, s.median, s.q3, s.max, s.mean, s.std
        ));
    }
    out
}

pub fn grid_csv(grid: &CrossLayerGrid) -> String {
    let mut out = schema_line();
    out.push_str(GRID_HEADER);
    out.push('\n');
    for (i, li) in grid.layers.iter().enumerate() {
        for (j, lj) in grid.layers.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                li, lj, grid.method, grid.pairs, grid.raw[i][j], grid.rel[i][j]
            ));
        }
    }
    out
}

fn write(path: PathBuf, contents: String) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Write the bundle into `dir` and return the files written.
///
/// CSV produces `analysis.csv` (pairs), `layer_stats.csv` when there are
/// statistics and `cross_layer.csv` when there is a grid; JSON produces a
/// single `analysis.json`.
pub fn export_report(bundle: &AnalysisBundle, dir: impl AsRef<Path>, format: ExportFormat) -> Result<Vec<PathBuf>> {
    if bundle.is_empty() {
        return Err(Error::EmptyBundle);
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    match format {
        ExportFormat::Json => {
            let text = serde_json::to_string_pretty(bundle).map_err(|e| Error::Json {
                path: dir.join("analysis.json"),
                source: e,
            })?;
            written.push(write(dir.join("analysis.json"), text + "\n")?);
        }
        ExportFormat::Csv => {
            if !bundle.pairs.is_empty() {
                written.push(write(dir.join("analysis.csv"), pairs_csv(&bundle.pairs))?);
            }
            if !bundle.layer_stats.is_empty() {
                written.push(write(dir.join("layer_stats.csv"), stats_csv(&bundle.layer_stats))?);
            }
            if let Some(grid) = bundle.cross_layer.as_ref().filter(|g| !g.layers.is_empty()) {
                written.push(write(dir.join("cross_layer.csv"), grid_csv(grid))?);
            }
        }
    }
    Ok(written)
}

/// Read a bundle written by the JSON export.
pub fn import_report(path: impl AsRef<Path>) -> Result<AnalysisBundle> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bundle: AnalysisBundle = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_owned(),
        source: e,
    })?;
    if bundle.schema != ANALYSIS_SCHEMA {
        return Err(Error::UnsupportedVersion(bundle.schema));
    }
    Ok(bundle)
}
