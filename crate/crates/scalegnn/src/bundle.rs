//! Dataset bundles: a directory holding `manifest.json`, `edges.bin`,
//! `features.bin`, `labels.bin`, `splits.bin` and optional hop caches under
//! `hops/<norm>_<K>/x_<l>.bin`.
//!
//! Symmetric graphs store each undirected edge once and are symmetrized on
//! load. Features and hops are stored as `f32`. `splits.bin` holds the
//! training, validation and test lists back to back.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scalegnn_core::adjacency::{NormKind, NormSpec};
use scalegnn_core::models::HopFeatures;
use scalegnn_core::{DataSplit, Dataset, Graph, LabelVector, Matrix};

use crate::binfmt::{self, EDGES_MAGIC, FEATURES_MAGIC, HOP_MAGIC, LABELS_MAGIC, SPLITS_MAGIC};
use crate::error::{io_err, json_err, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    pub num_nodes: u64,
    /// Stored CSR entries after loading.
    pub num_edges: u64,
    pub num_classes: u64,
    pub feature_dim: u64,
    pub train_size: u64,
    pub val_size: u64,
    pub test_size: u64,
    /// Whether `edges.bin` lists each undirected edge once.
    pub symmetrize: bool,
    /// Lowercase hex SHA-256 of every array file, keyed by file name.
    pub checksums: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn edge_list(g: &Graph) -> (Vec<u64>, bool) {
    let sym = g.is_symmetric();
    let pairs = g
        .edges()
        .filter(|&(u, v)| !sym || u <= v)
        .flat_map(|(u, v)| [u as u64, v as u64])
        .collect();
    (pairs, sym)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(json_err(path))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}

/// Writes `data` as a bundle in `dir`, creating it if needed. Output is a
/// pure function of `data` and `name`.
pub fn save_bundle(dir: &Path, name: &str, data: &Dataset) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (edges, symmetrize) = edge_list(&data.graph);
    let labels: Vec<u64> = data.labels.labels().iter().map(|&l| l as u64).collect();
    let s = &data.split;
    let splits: Vec<u64> = s.train.iter().chain(&s.val).chain(&s.test).map(|&v| v as u64).collect();
    let files = [
        ("edges.bin", binfmt::encode_u64(EDGES_MAGIC, &edges)),
        ("features.bin", binfmt::encode_f32(FEATURES_MAGIC, data.features.data())),
        ("labels.bin", binfmt::encode_u64(LABELS_MAGIC, &labels)),
        ("splits.bin", binfmt::encode_u64(SPLITS_MAGIC, &splits)),
    ];
    let mut checksums = BTreeMap::new();
    for (file, bytes) in &files {
        binfmt::write(&dir.join(file), bytes)?;
        checksums.insert(file.to_string(), sha256_hex(bytes));
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        num_nodes: data.num_nodes() as u64,
        num_edges: data.graph.num_edges() as u64,
        num_classes: data.num_classes() as u64,
        feature_dim: data.feature_dim() as u64,
        train_size: s.train.len() as u64,
        val_size: s.val.len() as u64,
        test_size: s.test.len() as u64,
        symmetrize,
        checksums,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let m: Manifest = read_json(&path)?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(Error::Version {
            path,
            expected: SCHEMA_VERSION,
            found: m.schema_version,
        });
    }
    Ok(m)
}

fn count_check(path: &Path, expected: u64, found: usize) -> Result<()> {
    if expected != found as u64 {
        return Err(Error::CountMismatch {
            path: path.to_path_buf(),
            expected,
            found: found as u64,
        });
    }
    Ok(())
}

fn checksum_check(manifest: &Manifest, file: &str, path: &Path, bytes: &[u8]) -> Result<()> {
    let expected = manifest.checksums.get(file).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: "no checksum in manifest".into(),
    })?;
    let found = sha256_hex(bytes);
    if &found != expected {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            expected: expected.clone(),
            found,
        });
    }
    Ok(())
}

/// Reads and validates one array file: header count first, then the
/// manifest checksum.
fn load_u64(dir: &Path, m: &Manifest, file: &str, magic: &[u8; 8]) -> Result<(PathBuf, Vec<u64>)> {
    let path = dir.join(file);
    let bytes = binfmt::read(&path)?;
    let values = binfmt::decode_u64(&path, &bytes, magic)?;
    checksum_check(m, file, &path, &bytes)?;
    Ok((path, values))
}

fn to_usize(path: &Path, v: &[u64], bound: u64) -> Result<Vec<usize>> {
    v.iter()
        .map(|&x| {
            if x < bound {
                Ok(x as usize)
            } else {
                Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("value {x} is not below {bound}"),
                })
            }
        })
        .collect()
}

pub fn load_bundle(dir: &Path) -> Result<Dataset> {
    let m = read_manifest(dir)?;
    let n = m.num_nodes;

    let (path, edges) = load_u64(dir, &m, "edges.bin", EDGES_MAGIC)?;
    if edges.len() % 2 != 0 {
        return Err(Error::Format {
            path,
            message: "odd number of edge endpoints".into(),
        });
    }
    let ends = to_usize(&path, &edges, n)?;
    let pairs: Vec<(usize, usize)> = ends.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let graph = Graph::from_edges(&pairs, n as usize, m.symmetrize)?;
    count_check(&path, m.num_edges, graph.num_edges())?;

    let path = dir.join("features.bin");
    let bytes = binfmt::read(&path)?;
    let feats = binfmt::decode_f32(&path, &bytes, FEATURES_MAGIC)?;
    count_check(&path, n * m.feature_dim, feats.len())?;
    checksum_check(&m, "features.bin", &path, &bytes)?;
    let features = Matrix::new(n as usize, m.feature_dim as usize, feats)?;

    let (path, labels) = load_u64(dir, &m, "labels.bin", LABELS_MAGIC)?;
    count_check(&path, n, labels.len())?;
    let labels = LabelVector::new(to_usize(&path, &labels, m.num_classes)?, m.num_classes as usize)?;

    let (path, splits) = load_u64(dir, &m, "splits.bin", SPLITS_MAGIC)?;
    count_check(&path, m.train_size + m.val_size + m.test_size, splits.len())?;
    let mut nodes = to_usize(&path, &splits, n)?;
    let test = nodes.split_off((m.train_size + m.val_size) as usize);
    let val = nodes.split_off(m.train_size as usize);
    let split = DataSplit { train: nodes, val, test };
    Ok(Dataset::new(graph, features, labels, split)?)
}

/// `"sym"`, `"row"` or `"col"`, with `-noloops` when self-loops are off.
pub fn norm_tag(norm: NormSpec) -> String {
    if norm.self_loops {
        norm.kind.as_str().to_string()
    } else {
        format!("{}-noloops", norm.kind.as_str())
    }
}

pub fn parse_norm_tag(tag: &str) -> Option<NormSpec> {
    let (kind, self_loops) = match tag.strip_suffix("-noloops") {
        Some(k) => (k, false),
        None => (tag, true),
    };
    Some(NormSpec {
        kind: NormKind::parse(kind)?,
        self_loops,
    })
}

pub fn hop_dir(bundle: &Path, norm: NormSpec, k: usize) -> PathBuf {
    bundle.join("hops").join(format!("{}_{k}", norm_tag(norm)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct HopManifest {
    schema_version: u32,
    norm: String,
    k: u64,
    rows: u64,
    cols: u64,
    checksums: BTreeMap<String, String>,
}

/// Writes hop matrices as `x_0.bin ..= x_K.bin` plus `hops.json`.
pub fn save_hops(bundle: &Path, hops: &HopFeatures) -> Result<PathBuf> {
    let dir = hop_dir(bundle, hops.norm(), hops.k());
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut checksums = BTreeMap::new();
    for (l, h) in hops.hops().iter().enumerate() {
        let file = format!("x_{l}.bin");
        let bytes = binfmt::encode_f32(HOP_MAGIC, h.data());
        binfmt::write(&dir.join(&file), &bytes)?;
        checksums.insert(file, sha256_hex(&bytes));
    }
    let m = HopManifest {
        schema_version: SCHEMA_VERSION,
        norm: norm_tag(hops.norm()),
        k: hops.k() as u64,
        rows: hops.num_rows() as u64,
        cols: hops.feature_dim() as u64,
        checksums,
    };
    write_json(&dir.join("hops.json"), &m)?;
    Ok(dir)
}

/// Loads a cache written by [`save_hops`], or `None` when absent.
pub fn load_hops(bundle: &Path, norm: NormSpec, k: usize) -> Result<Option<HopFeatures>> {
    let dir = hop_dir(bundle, norm, k);
    let mpath = dir.join("hops.json");
    if !mpath.exists() {
        return Ok(None);
    }
    let m: HopManifest = read_json(&mpath)?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(Error::Version {
            path: mpath,
            expected: SCHEMA_VERSION,
            found: m.schema_version,
        });
    }
    let mut hops = Vec::with_capacity(k + 1);
    for l in 0..=k {
        let file = format!("x_{l}.bin");
        let path = dir.join(&file);
        let bytes = binfmt::read(&path)?;
        let data = binfmt::decode_f32(&path, &bytes, HOP_MAGIC)?;
        count_check(&path, m.rows * m.cols, data.len())?;
        let expected = m.checksums.get(&file).cloned().unwrap_or_default();
        let found = sha256_hex(&bytes);
        if found != expected {
            return Err(Error::Checksum { path, expected, found });
        }
        hops.push(Matrix::new(m.rows as usize, m.cols as usize, data)?);
    }
    Ok(Some(HopFeatures::from_hops(hops, norm)?))
}
