//! Embedding sets: pooled representations plus provenance, and the `EMB1`
//! on-disk format.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! b"EMB1" | u32 version | u64 n | u64 d | u8 dtype (0 = f32, 1 = f64) | n*d values, row-major
//! ```
//!
//! Metadata lives in a JSON sidecar next to the payload (`<payload>.manifest`)
//! together with an FNV-1a 64-bit checksum of the value bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::hash::Hasher;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, Vector};
use crate::rng::{self, Stream};

pub const EMB_MAGIC: &[u8; 4] = b"EMB1";
pub const EMB_VERSION: u32 = 1;
pub const MANIFEST_SCHEMA: u32 = 1;
pub const MAX_LAYER: u32 = 24;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
    Unsplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Hidden,
    Attention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Mean,
    None,
}

/// Storage precision of a set's values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::F64),
            _ => None,
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// Provenance of an embedding set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetMeta {
    pub model_id: String,
    pub seed: u64,
    pub layer: u32,
    pub dataset: String,
    pub split: Split,
    pub kind: Kind,
    pub pooling: Pooling,
    /// Free-form provenance notes (e.g. how attention maps were vectorised).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl SetMeta {
    pub fn new(model_id: impl Into<String>, seed: u64, layer: u32, dataset: impl Into<String>) -> Self {
        SetMeta {
            model_id: model_id.into(),
            seed,
            layer,
            dataset: dataset.into(),
            split: Split::Unsplit,
            kind: Kind::Hidden,
            pooling: Pooling::Mean,
            extra: BTreeMap::new(),
        }
    }

    /// Identity key; unique within a workspace.
    pub fn id(&self) -> String {
        format!(
            "{}/seed{}/layer{}/{}/{}/{}",
            self.model_id,
            self.seed,
            self.layer,
            self.dataset,
            enum_name(&self.split),
            enum_name(&self.kind)
        )
    }
}

fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// An `n x d` matrix of pooled representations with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    data: Matrix,
    dtype: Dtype,
    pub meta: SetMeta,
}

impl EmbeddingSet {
    pub fn new(data: Matrix, meta: SetMeta) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::invalid("embedding set needs n >= 1 and d >= 1"));
        }
        numerics::ensure_finite(&data, "embedding set")?;
        if meta.layer > MAX_LAYER {
            return Err(Error::invalid(format!(
                "layer {} outside [0, {MAX_LAYER}]",
                meta.layer
            )));
        }
        Ok(EmbeddingSet {
            data,
            dtype: Dtype::F64,
            meta,
        })
    }

    /// Build a single-precision set; values are rounded to `f32`.
    pub fn new_f32(data: Matrix, meta: SetMeta) -> Result<Self> {
        Ok(Self::new(data, meta)?.into_f32())
    }

    pub fn into_f32(mut self) -> Self {
        self.data.apply(|x| *x = *x as f32 as f64);
        self.dtype = Dtype::F32;
        self
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn id(&self) -> String {
        self.meta.id()
    }

    /// Same metadata and precision, new values.
    pub fn with_data(&self, data: Matrix) -> Result<Self> {
        let mut out = Self::new(data, self.meta.clone())?;
        if self.dtype == Dtype::F32 {
            out = out.into_f32();
        }
        Ok(out)
    }

    pub fn select_rows(&self, rows: &[usize], split: Split) -> Result<Self> {
        let mut meta = self.meta.clone();
        meta.split = split;
        let data = self.data.select_rows(rows.iter());
        Ok(EmbeddingSet {
            data,
            dtype: self.dtype,
            meta,
        })
    }
}

/// Token-wise embeddings of one sequence (`k x d`).
#[derive(Debug, Clone)]
pub struct TokenEmbeddings(Matrix);

impl TokenEmbeddings {
    pub fn new(tokens: Matrix) -> Result<Self> {
        if tokens.nrows() == 0 {
            return Err(Error::invalid("token embeddings need at least one token"));
        }
        Ok(TokenEmbeddings(tokens))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Sentence embedding as the mean over all token rows.
pub fn mean_pool(tokens: &TokenEmbeddings) -> Vector {
    let t = &tokens.0;
    let k = t.nrows() as f64;
    Vector::from_iterator(t.ncols(), t.column_iter().map(|c| c.sum() / k))
}

/// Subtract the column means; returns the centred set and the removed means.
pub fn center_columns(set: &EmbeddingSet) -> (EmbeddingSet, Vector) {
    let mean = numerics::column_means(&set.data);
    let centered = EmbeddingSet {
        data: numerics::subtract_row(&set.data, &mean),
        dtype: Dtype::F64,
        meta: set.meta.clone(),
    };
    (centered, mean)
}

/// Deterministic disjoint row partition. Train rows come first in the returned
/// tuple; both lists are sorted ascending. Applying the same `(n, fraction,
/// seed)` to paired sets keeps their rows aligned.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} on {n} rows leaves one side empty"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, Stream::Split));
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(
    set: &EmbeddingSet,
    train_fraction: f64,
    seed: u64,
) -> Result<(EmbeddingSet, EmbeddingSet)> {
    let (train, test) = split_indices(set.n(), train_fraction, seed)?;
    Ok((
        set.select_rows(&train, Split::Train)?,
        set.select_rows(&test, Split::Test)?,
    ))
}

/// Human-readable sidecar describing an `EMB1` payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub format: String,
    pub n: u64,
    pub d: u64,
    pub dtype: Dtype,
    #[serde(flatten)]
    pub meta: SetMeta,
    /// `fnv1a64:<16 hex digits>` over the row-major value bytes.
    pub checksum: String,
}

pub fn manifest_path(payload: &Path) -> PathBuf {
    let mut s = payload.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn checksum(bytes: &[u8]) -> String {
    let mut h = FnvHasher::default();
    h.write(bytes);
    format!("fnv1a64:{:016x}", h.finish())
}

fn encode_values(set: &EmbeddingSet) -> Vec<u8> {
    let (n, d) = set.data.shape();
    let mut out = Vec::with_capacity(n * d * set.dtype.width());
    for i in 0..n {
        for j in 0..d {
            let x = set.data[(i, j)];
            match set.dtype {
                Dtype::F32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
                Dtype::F64 => out.extend_from_slice(&x.to_le_bytes()),
            }
        }
    }
    out
}

/// Payload bytes, manifest and manifest text exactly as
/// [`save_embedding_set`] writes them.
pub fn encode_embedding_set(set: &EmbeddingSet) -> (Vec<u8>, Manifest, String) {
    let values = encode_values(set);
    let mut bytes = Vec::with_capacity(HEADER_LEN + values.len());
    bytes.extend_from_slice(EMB_MAGIC);
    bytes.extend_from_slice(&EMB_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(set.n() as u64).to_le_bytes());
    bytes.extend_from_slice(&(set.d() as u64).to_le_bytes());
    bytes.push(set.dtype.code());
    bytes.extend_from_slice(&values);

    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA,
        format: "EMB1".into(),
        n: set.n() as u64,
        d: set.d() as u64,
        dtype: set.dtype,
        meta: set.meta.clone(),
        checksum: checksum(&values),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    text.push('\n');
    (bytes, manifest, text)
}

pub fn save_embedding_set(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let (bytes, manifest, text) = encode_embedding_set(set);
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    let mpath = manifest_path(path);
    fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

pub fn load_manifest(payload: impl AsRef<Path>) -> Result<Manifest> {
    let mpath = manifest_path(payload.as_ref());
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: mpath.clone(),
        source: e,
    })?;
    if manifest.schema_version != MANIFEST_SCHEMA {
        return Err(Error::UnsupportedVersion(manifest.schema_version));
    }
    Ok(manifest)
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

pub fn load_embedding_set(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let manifest = load_manifest(path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != EMB_MAGIC {
        return Err(Error::corrupt(path, "missing EMB1 header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != EMB_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n = read_u64(&bytes, 8) as usize;
    let d = read_u64(&bytes, 16) as usize;
    let dtype = Dtype::from_code(bytes[24])
        .ok_or_else(|| Error::corrupt(path, format!("unknown dtype code {}", bytes[24])))?;
    let values = &bytes[HEADER_LEN..];
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(dtype.width()))
        .ok_or_else(|| Error::corrupt(path, "header dimensions overflow"))?;
    if values.len() != expected {
        return Err(Error::corrupt(
            path,
            format!("payload holds {} bytes, header implies {expected}", values.len()),
        ));
    }
    if checksum(values) != manifest.checksum {
        return Err(Error::corrupt(path, "checksum mismatch"));
    }
    if manifest.n as usize != n || manifest.d as usize != d || manifest.dtype != dtype {
        return Err(Error::corrupt(path, "manifest disagrees with payload header"));
    }

    let width = dtype.width();
    let data = Matrix::from_fn(n, d, |i, j| {
        let at = (i * d + j) * width;
        match dtype {
            Dtype::F32 => f32::from_le_bytes(values[at..at + 4].try_into().expect("4 bytes")) as f64,
            Dtype::F64 => f64::from_le_bytes(values[at..at + 8].try_into().expect("8 bytes")),
        }
    });
    let set = EmbeddingSet::new(data, manifest.meta).map_err(|e| Error::corrupt(path, e.to_string()))?;
    Ok(match dtype {
        Dtype::F32 => EmbeddingSet {
            dtype: Dtype::F32,
            ..set
        },
        Dtype::F64 => set,
    })
}

impl fmt::Display for EmbeddingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}x{}, {:?})", self.id(), self.n(), self.d(), self.dtype)
    }
}
