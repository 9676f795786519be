//! Corpus mining, angle normalization and the on-disk record format.
//!
//! A corpus is two files: `NAME.jsonl` holds one [`TrainingRecord`] per line,
//! and the sibling `NAME.manifest.json` holds the generation [`Manifest`].

use std::f64::consts::PI;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{brute_force_maxcut, generate_random_graph, Graph};
use crate::qaoa_opt::{multi_start_optimize, OptimizerConfig};
use crate::qsim::{wrap_angle, ParamVector, QaoaCircuit, NUM_PARAMS};
use crate::seed::{derive_seed, rng_from_seed, stream};

pub const FORMAT_VERSION: u32 = 1;

/// Slack allowed when checking `best_energy >= ground_energy`.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub count: usize,
    /// Inclusive node-count range.
    pub n_range: [usize; 2],
    /// Edge-probability range, sampled uniformly.
    pub p_range: [f64; 2],
    pub n_starts: usize,
    pub optimizer: OptimizerConfig,
    pub master_seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            count: 3500,
            n_range: [4, 8],
            p_range: [0.3, 0.75],
            n_starts: 10,
            optimizer: OptimizerConfig::default(),
            master_seed: 0,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Parameter("corpus count must be at least 1".into()));
        }
        let [lo, hi] = self.n_range;
        if lo < 2 || lo > hi || hi > crate::qsim::MAX_QUBITS {
            return Err(Error::Parameter(format!("invalid node range {lo}..={hi}")));
        }
        let [plo, phi] = self.p_range;
        if !(plo > 0.0 && plo <= phi && phi <= 1.0) {
            return Err(Error::Parameter(format!(
                "invalid edge-probability range [{plo}, {phi}]"
            )));
        }
        if self.n_starts == 0 {
            return Err(Error::Parameter("n_starts must be at least 1".into()));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    #[serde(flatten)]
    pub config: CorpusConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenMeta {
    pub seed: u64,
    pub p_edge: f64,
    pub n_starts: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingRecord {
    pub index: usize,
    pub graph: Graph,
    /// Wrapped into `[-π, π)`.
    pub best_params: ParamVector,
    pub best_energy: f64,
    pub ground_energy: i64,
    pub gen_meta: GenMeta,
}

impl TrainingRecord {
    pub fn validate(&self) -> Result<()> {
        if !self.best_energy.is_finite() {
            return Err(Error::Invariant(format!(
                "record {}: best_energy is not finite",
                self.index
            )));
        }
        if self.best_energy < self.ground_energy as f64 - ENERGY_TOLERANCE {
            return Err(Error::Invariant(format!(
                "record {}: best_energy {} is below ground_energy {}",
                self.index, self.best_energy, self.ground_energy
            )));
        }
        if self
            .best_params
            .to_array()
            .iter()
            .any(|x| !(-PI..PI).contains(x))
        {
            return Err(Error::Invariant(format!(
                "record {}: best_params not wrapped into [-pi, pi)",
                self.index
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub manifest: Manifest,
    pub records: Vec<TrainingRecord>,
}

impl Corpus {
    /// Normalized diffusion-training vectors. Labels are first mapped to
    /// [`ParamVector::canonical`] so equivalent optima share one mode.
    pub fn training_vectors(&self) -> Result<Vec<Vec<f64>>> {
        self.records
            .iter()
            .map(|r| normalize_params(&r.best_params.canonical()).map(|a| a.to_vec()))
            .collect()
    }
}

/// Wrap every angle into `[-π, π)` and divide by `π`.
pub fn normalize_params(pv: &ParamVector) -> Result<[f64; NUM_PARAMS]> {
    if !pv.is_finite() {
        return Err(Error::Parameter(
            "cannot normalize non-finite angles".into(),
        ));
    }
    Ok(pv.wrapped().to_array().map(|x| x / PI))
}

/// Multiply by `π` and wrap into `[-π, π)`.
pub fn denormalize_params(x: &[f64]) -> Result<ParamVector> {
    let arr: [f64; NUM_PARAMS] = x.try_into().map_err(|_| {
        Error::Parameter(format!("expected {NUM_PARAMS} components, got {}", x.len()))
    })?;
    if arr.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter(
            "cannot denormalize non-finite values".into(),
        ));
    }
    Ok(ParamVector::from(arr.map(|v| wrap_angle(v * PI))))
}

/// The graph drawn for record `index`: node count, edge probability and
/// graph, all from the record's derived seed.
pub fn record_instance(cfg: &CorpusConfig, index: usize) -> Result<(u64, f64, Graph)> {
    let seed = derive_seed(cfg.master_seed, stream::RECORD, index as u64);
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(cfg.n_range[0]..=cfg.n_range[1]);
    let p = rng.random_range(cfg.p_range[0]..=cfg.p_range[1]);
    let g = generate_random_graph(n, p, derive_seed(seed, stream::GRAPH, 0))?;
    Ok((seed, p, g))
}

/// Mine one record: draw the instance, run the multi-start search, attach
/// the brute-force ground energy.
pub fn generate_record(cfg: &CorpusConfig, index: usize) -> Result<TrainingRecord> {
    let (seed, p_edge, graph) = record_instance(cfg, index)?;
    let circuit = QaoaCircuit::new(&graph)?;
    let opt = OptimizerConfig {
        seed: derive_seed(seed, stream::RECORD_OPT, 0),
        ..cfg.optimizer
    };
    let trace = multi_start_optimize(&circuit, cfg.n_starts, &opt)?;
    let ground_energy = brute_force_maxcut(&graph)?.ground_energy;
    let record = TrainingRecord {
        index,
        graph,
        best_params: trace.best_params.wrapped(),
        best_energy: trace.best_energy,
        ground_energy,
        gen_meta: GenMeta {
            seed,
            p_edge,
            n_starts: cfg.n_starts,
            iterations: cfg.optimizer.max_iters,
        },
    };
    record.validate()?;
    Ok(record)
}

/// Build a whole corpus in memory.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Corpus> {
    cfg.validate()?;
    let records = (0..cfg.count)
        .into_par_iter()
        .map(|i| generate_record(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        manifest: Manifest {
            version: FORMAT_VERSION,
            config: *cfg,
        },
        records,
    })
}

pub fn manifest_path(corpus_path: &Path) -> PathBuf {
    corpus_path.with_extension("manifest.json")
}

fn manifest_json(m: &Manifest) -> String {
    let mut s = serde_json::to_string_pretty(m).expect("manifest serialization is infallible");
    s.push('\n');
    s
}

fn record_line(r: &TrainingRecord) -> String {
    let mut s = serde_json::to_string(r).expect("record serialization is infallible");
    s.push('\n');
    s
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::parse(path.display().to_string(), "missing version field"))?;
    if version > FORMAT_VERSION as u64 || version == 0 {
        return Err(Error::Version {
            found: version as u32,
            supported: FORMAT_VERSION,
        });
    }
    let manifest: Manifest =
        serde_json::from_value(value).map_err(|e| Error::parse(path.display().to_string(), e))?;
    manifest.config.validate()?;
    Ok(manifest)
}

/// Parse complete lines; a final line without a newline is reported as
/// `partial` rather than parsed.
fn read_records(path: &Path, allow_partial_tail: bool) -> Result<(Vec<TrainingRecord>, u64)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut durable_bytes = 0u64;
    let mut line = String::new();
    let ctx = |i: usize| format!("{} line {}", path.display(), i + 1);
    loop {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::io(path, e))?;
        if read == 0 {
            break;
        }
        let i = records.len();
        if !line.ends_with('\n') {
            if allow_partial_tail {
                break;
            }
            return Err(Error::parse(
                ctx(i),
                "truncated record (no trailing newline)",
            ));
        }
        let record: TrainingRecord =
            serde_json::from_str(line.trim_end()).map_err(|e| Error::parse(ctx(i), e))?;
        if record.index != i {
            return Err(Error::Invariant(format!(
                "{}: record index {} out of sequence",
                ctx(i),
                record.index
            )));
        }
        record.validate()?;
        records.push(record);
        durable_bytes += read as u64;
    }
    Ok((records, durable_bytes))
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mpath = manifest_path(path);
    fs::write(&mpath, manifest_json(&corpus.manifest)).map_err(|e| Error::io(&mpath, e))?;
    let body: String = corpus.records.iter().map(record_line).collect();
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Load and fully validate a completed corpus.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let manifest = read_manifest(&manifest_path(path))?;
    let (records, _) = read_records(path, false)?;
    if records.len() != manifest.config.count {
        return Err(Error::Invariant(format!(
            "corpus holds {} records, manifest expects {}",
            records.len(),
            manifest.config.count
        )));
    }
    Ok(Corpus { manifest, records })
}

/// Generate a corpus on disk, appending records in index order and syncing
/// after every batch. An interrupted run with the same configuration resumes
/// at the first missing index; `progress` sees `(done, total)` after each
/// batch.
pub fn generate_corpus_to(
    cfg: &CorpusConfig,
    path: &Path,
    mut progress: impl FnMut(usize, usize),
) -> Result<Corpus> {
    cfg.validate()?;
    let manifest = Manifest {
        version: FORMAT_VERSION,
        config: *cfg,
    };
    let mpath = manifest_path(path);
    let mut records = Vec::new();
    let mut durable_bytes = 0;
    if mpath.exists() && path.exists() {
        let existing = read_manifest(&mpath)?;
        if existing != manifest {
            return Err(Error::Invariant(format!(
                "{} was generated with a different configuration",
                path.display()
            )));
        }
        (records, durable_bytes) = read_records(path, true)?;
        if records.len() > cfg.count {
            return Err(Error::Invariant(format!(
                "{} already holds more records than requested",
                path.display()
            )));
        }
    } else {
        fs::write(&mpath, manifest_json(&manifest)).map_err(|e| Error::io(&mpath, e))?;
        File::create(path).map_err(|e| Error::io(path, e))?;
    }

    let persist = |last_durable: usize| {
        move |source| Error::Persistence {
            last_durable,
            source,
        }
    };
    let file = OpenOptions::new()
        .write(true)
        .open(path)
        .map_err(persist(records.len()))?;
    // Drop any partially written tail line from an interrupted run.
    file.set_len(durable_bytes)
        .map_err(persist(records.len()))?;
    let mut file = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(persist(records.len()))?;

    progress(records.len(), cfg.count);
    let batch = rayon::current_num_threads().max(1) * 4;
    while records.len() < cfg.count {
        let start = records.len();
        let end = (start + batch).min(cfg.count);
        let fresh = (start..end)
            .into_par_iter()
            .map(|i| generate_record(cfg, i))
            .collect::<Result<Vec<_>>>()?;
        let body: String = fresh.iter().map(record_line).collect();
        file.write_all(body.as_bytes())
            .and_then(|_| file.sync_data())
            .map_err(persist(start))?;
        records.extend(fresh);
        progress(records.len(), cfg.count);
    }
    Ok(Corpus { manifest, records })
}
