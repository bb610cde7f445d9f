//! Split files on disk.
//!
//! A dataset directory holds `manifest.json` plus, per split, a binary signal
//! file `<split>.arim` and a ground-truth sidecar `<split>.scenarios.jsonl`.
//! The binary file is the magic `ARIM1\n`, a little-endian `u32` record
//! count, a `u32` sample count, then per record the interfered and the clean
//! signal as interleaved `(re, im)` little-endian `f32` pairs.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use urpca_core::scenario::{generate_pair, record_seed, GenerationRanges, SamplePair};
use urpca_core::signal::{RadarConfig, Scenario};

use crate::error::{Error, Result};
use crate::parallel::map_indexed;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 6] = b"ARIM1\n";
const MAGIC_STEM: &[u8; 4] = b"ARIM";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    /// Substream id; distinct ids keep the splits disjoint.
    pub fn stream(self) -> u64 {
        self as u64
    }

    pub fn signal_file(self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.arim", self.name()))
    }

    pub fn scenario_file(self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.scenarios.jsonl", self.name()))
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::Usage(format!("unknown split `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub seed: u64,
    pub counts: SplitCounts,
    pub ranges: GenerationRanges,
    pub radar: RadarConfig,
}

impl DatasetManifest {
    pub fn new(seed: u64, counts: SplitCounts, ranges: GenerationRanges, radar: RadarConfig) -> Self {
        Self { format_version: FORMAT_VERSION, seed, counts, ranges, radar }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                path,
                found: manifest.format_version.to_string(),
                expected: FORMAT_VERSION.to_string(),
            });
        }
        Ok(manifest)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(Error::io(&path))
    }

    /// Draws record `index` of `split`.
    pub fn generate_record(&self, split: Split, index: usize) -> Result<SamplePair> {
        let seed = record_seed(self.seed, split.stream(), index as u64);
        Ok(generate_pair(seed, &self.ranges, &self.radar)?)
    }
}

/// Generates every split into `dir` using up to `threads` workers. The bytes
/// written do not depend on `threads`.
pub fn generate(manifest: &DatasetManifest, dir: &Path, threads: usize) -> Result<()> {
    manifest.radar.validate()?;
    manifest.ranges.validate(&manifest.radar)?;
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    for split in Split::ALL {
        let n = manifest.counts.get(split);
        let pairs = map_indexed(n, threads, |i| manifest.generate_record(split, i))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        write_split(dir, split, manifest.radar.n_samples, &pairs)?;
    }
    manifest.save(dir)
}

pub fn write_split(dir: &Path, split: Split, n_samples: usize, pairs: &[SamplePair]) -> Result<()> {
    let path = split.signal_file(dir);
    let mut out = BufWriter::new(File::create(&path).map_err(Error::io(&path))?);
    let mut header = Vec::with_capacity(14);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&u32::try_from(pairs.len()).expect("record count fits u32").to_le_bytes());
    header.extend_from_slice(&u32::try_from(n_samples).expect("sample count fits u32").to_le_bytes());
    out.write_all(&header).map_err(Error::io(&path))?;
    let mut buf = Vec::with_capacity(n_samples * 16);
    for pair in pairs {
        if pair.interfered.len() != n_samples || pair.clean.len() != n_samples {
            return Err(Error::format(&path, "record length differs from the header"));
        }
        buf.clear();
        for z in pair.interfered.iter().chain(&pair.clean) {
            buf.extend_from_slice(&(z.re as f32).to_le_bytes());
            buf.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
        out.write_all(&buf).map_err(Error::io(&path))?;
    }
    out.flush().map_err(Error::io(&path))?;

    let path = split.scenario_file(dir);
    let mut out = BufWriter::new(File::create(&path).map_err(Error::io(&path))?);
    for pair in pairs {
        serde_json::to_writer(&mut out, &pair.scenario).expect("scenario serializes");
        out.write_all(b"\n").map_err(Error::io(&path))?;
    }
    out.flush().map_err(Error::io(&path))
}

/// Streaming reader over the binary records of one split.
pub struct SignalReader<R> {
    path: PathBuf,
    inner: R,
    count: usize,
    n_samples: usize,
    next: usize,
    buf: Vec<u8>,
}

impl SignalReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(Error::io(path))?;
        Self::new(path, BufReader::new(file))
    }
}

impl<R: Read> SignalReader<R> {
    pub fn new(path: &Path, mut inner: R) -> Result<Self> {
        let path = path.to_path_buf();
        let mut header = [0u8; 14];
        read_full(&mut inner, &mut header).map_err(|e| match e {
            ReadFail::Eof => Error::Truncated { path: path.clone(), record: 0 },
            ReadFail::Io(source) => Error::Io { path: path.clone(), source },
        })?;
        if &header[..6] != MAGIC {
            if &header[..4] == MAGIC_STEM && header[5] == b'\n' {
                return Err(Error::VersionMismatch {
                    path,
                    found: (header[4] as char).to_string(),
                    expected: (MAGIC[4] as char).to_string(),
                });
            }
            return Err(Error::BadMagic { path, expected: "ARIM signal" });
        }
        let count = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
        let n_samples = u32::from_le_bytes(header[10..14].try_into().unwrap()) as usize;
        Ok(Self { path, inner, count, n_samples, next: 0, buf: vec![0; n_samples * 16] })
    }

    pub fn records(&self) -> usize {
        self.count
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Next `(interfered, clean)` record, `None` after the last one.
    pub fn next_record(&mut self) -> Result<Option<(Vec<Complex64>, Vec<Complex64>)>> {
        if self.next == self.count {
            return Ok(None);
        }
        read_full(&mut self.inner, &mut self.buf).map_err(|e| match e {
            ReadFail::Eof => Error::Truncated { path: self.path.clone(), record: self.next },
            ReadFail::Io(source) => Error::Io { path: self.path.clone(), source },
        })?;
        self.next += 1;
        let values: Vec<Complex64> = self
            .buf
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        let clean = values[self.n_samples..].to_vec();
        let mut interfered = values;
        interfered.truncate(self.n_samples);
        Ok(Some((interfered, clean)))
    }
}

impl<R: Read> Iterator for SignalReader<R> {
    type Item = Result<(Vec<Complex64>, Vec<Complex64>)>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

enum ReadFail {
    Eof,
    Io(std::io::Error),
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::result::Result<(), ReadFail> {
    r.read_exact(buf).map_err(|e| if e.kind() == std::io::ErrorKind::UnexpectedEof { ReadFail::Eof } else { ReadFail::Io(e) })
}

pub fn read_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let file = File::open(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let s = serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        out.push(s);
    }
    Ok(out)
}

/// Loads a whole split and checks it against the manifest.
pub fn load_split(dir: &Path, split: Split) -> Result<Vec<SamplePair>> {
    let manifest = DatasetManifest::load(dir)?;
    let path = split.signal_file(dir);
    let reader = SignalReader::open(&path)?;
    if reader.records() != manifest.counts.get(split) || reader.n_samples() != manifest.radar.n_samples {
        return Err(Error::format(&path, "record or sample count disagrees with the manifest"));
    }
    let scenarios = read_scenarios(&split.scenario_file(dir))?;
    if scenarios.len() != reader.records() {
        return Err(Error::format(split.scenario_file(dir), "scenario count disagrees with the signal file"));
    }
    reader
        .zip(scenarios)
        .map(|(rec, scenario)| rec.map(|(interfered, clean)| SamplePair { interfered, clean, scenario }))
        .collect()
}

/// The pair as it reads back from disk: every component rounded to `f32`.
pub fn quantized(pair: &SamplePair) -> SamplePair {
    let q = |v: &[Complex64]| v.iter().map(|z| Complex64::new(z.re as f32 as f64, z.im as f32 as f64)).collect();
    SamplePair { interfered: q(&pair.interfered), clean: q(&pair.clean), scenario: pair.scenario.clone() }
}
