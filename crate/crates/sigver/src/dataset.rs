//! Dataset manifest and feature-file I/O, synthetic dataset generation,
//! and pooled per-class feature statistics.
//!
//! A dataset is a JSON manifest naming one feature file per writer. Feature
//! files come in two interchangeable encodings, sniffed by magic bytes:
//!
//! * text: one sample per line, `writer_id,sample_id,G|F,v1,...,vdim`,
//!   values in shortest round-trip decimal; `#` lines and blank lines are
//!   ignored;
//! * binary: magic `CSV1`, little-endian u32 dimension and sample count,
//!   then per sample a u32 length-prefixed id, one label byte (`G`/`F`),
//!   and `dimension` little-endian f64 values.
//!
//! A text file cannot start with the bytes `CSV1` because its first field
//! is a writer id followed by a comma, so the sniff is unambiguous for
//! files produced by this crate.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureVector, Label, SignatureSample, FORMAT_VERSION};
use crate::stats;

const BINARY_MAGIC: &[u8; 4] = b"CSV1";

/// One writer row of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriterEntry {
    pub writer_id: String,
    pub genuine_count: usize,
    pub forged_count: usize,
    /// Feature file path, relative to the manifest's directory.
    pub file: String,
}

/// On-disk index of a dataset: global metadata plus one entry per writer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub name: String,
    pub feature_model: String,
    pub dimension: usize,
    pub writers: Vec<WriterEntry>,
}

/// All samples of one writer, split by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriterSamples {
    pub writer_id: String,
    pub genuine: Vec<SignatureSample>,
    pub forged: Vec<SignatureSample>,
}

impl WriterSamples {
    pub fn all(&self) -> impl Iterator<Item = &SignatureSample> {
        self.genuine.iter().chain(self.forged.iter())
    }
}

/// A fully loaded dataset, writers in manifest order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub feature_model: String,
    pub dimension: usize,
    pub writers: Vec<WriterSamples>,
}

impl Dataset {
    pub fn writer(&self, id: &str) -> Option<&WriterSamples> {
        self.writers.iter().find(|w| w.writer_id == id)
    }

    pub fn num_samples(&self) -> usize {
        self.writers
            .iter()
            .map(|w| w.genuine.len() + w.forged.len())
            .sum()
    }
}

/// Feature-file encoding selector for [`save_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Text,
    Binary,
}

/// Loads a dataset from its manifest, validating dimensions, per-writer
/// counts, sample-id uniqueness, and feature finiteness along the way.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text =
        fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path.to_owned(), e))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::json(manifest_path.to_owned(), e))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported manifest format_version {}, expected {}",
            manifest.format_version, FORMAT_VERSION
        )));
    }
    if manifest.dimension == 0 {
        return Err(Error::invalid(
            "manifest dimension must be at least 1".to_string(),
        ));
    }
    let mut seen = HashSet::new();
    for w in &manifest.writers {
        if !seen.insert(w.writer_id.as_str()) {
            return Err(Error::invalid(format!(
                "manifest lists writer {:?} twice",
                w.writer_id
            )));
        }
    }

    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut writers = Vec::with_capacity(manifest.writers.len());
    for entry in &manifest.writers {
        let file = base.join(&entry.file);
        let bytes = fs::read(&file).map_err(|e| Error::io(file.clone(), e))?;
        let samples = if bytes.len() >= 4 && &bytes[..4] == BINARY_MAGIC {
            parse_binary_file(&file, &bytes, entry, manifest.dimension)?
        } else {
            parse_text_file(&file, &bytes, entry, manifest.dimension)?
        };
        let mut genuine = Vec::new();
        let mut forged = Vec::new();
        for s in samples {
            match s.label {
                Label::Genuine => genuine.push(s),
                Label::Forged => forged.push(s),
            }
        }
        if genuine.len() != entry.genuine_count {
            return Err(Error::CountMismatch {
                file,
                writer_id: entry.writer_id.clone(),
                what: "genuine",
                declared: entry.genuine_count,
                found: genuine.len(),
            });
        }
        if forged.len() != entry.forged_count {
            return Err(Error::CountMismatch {
                file,
                writer_id: entry.writer_id.clone(),
                what: "forged",
                declared: entry.forged_count,
                found: forged.len(),
            });
        }
        writers.push(WriterSamples {
            writer_id: entry.writer_id.clone(),
            genuine,
            forged,
        });
    }
    Ok(Dataset {
        name: manifest.name,
        feature_model: manifest.feature_model,
        dimension: manifest.dimension,
        writers,
    })
}

fn parse_text_file(
    file: &Path,
    bytes: &[u8],
    entry: &WriterEntry,
    dimension: usize,
) -> Result<Vec<SignatureSample>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        file: file.to_owned(),
        line: 0,
        message: format!("file is not valid UTF-8: {e}"),
    })?;
    let parse_err = |line: usize, message: String| Error::Parse {
        file: file.to_owned(),
        line,
        message,
    };
    let mut samples = Vec::new();
    let mut ids = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(parse_err(
                line_no,
                format!("expected writer_id,sample_id,label,values..., got {} fields", fields.len()),
            ));
        }
        let (writer_id, sample_id, label_field) = (fields[0], fields[1], fields[2]);
        if writer_id != entry.writer_id {
            return Err(parse_err(
                line_no,
                format!(
                    "row belongs to writer {writer_id:?} but the file is declared for {:?}",
                    entry.writer_id
                ),
            ));
        }
        let label = match label_field {
            "G" => Label::Genuine,
            "F" => Label::Forged,
            other => {
                return Err(parse_err(
                    line_no,
                    format!("invalid label {other:?}, expected G or F"),
                ))
            }
        };
        if !ids.insert(sample_id.to_string()) {
            return Err(parse_err(
                line_no,
                format!("duplicate sample_id {sample_id:?} for writer {:?}", entry.writer_id),
            ));
        }
        let sample_err = |source: Error| Error::Sample {
            file: file.to_owned(),
            line: line_no,
            sample_id: sample_id.to_string(),
            source: Box::new(source),
        };
        let value_fields = &fields[3..];
        if value_fields.len() != dimension {
            return Err(sample_err(Error::DimensionMismatch {
                expected: dimension,
                actual: value_fields.len(),
            }));
        }
        let mut values = Vec::with_capacity(dimension);
        for (k, field) in value_fields.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(line_no, format!("value {} ({field:?}) is not a number", k + 1))
            })?;
            values.push(v);
        }
        let feature = FeatureVector::new(values).map_err(sample_err)?;
        samples.push(SignatureSample {
            writer_id: entry.writer_id.clone(),
            sample_id: sample_id.to_string(),
            label,
            feature,
        });
    }
    Ok(samples)
}

fn parse_binary_file(
    file: &Path,
    bytes: &[u8],
    entry: &WriterEntry,
    dimension: usize,
) -> Result<Vec<SignatureSample>> {
    let mut cursor = Cursor {
        file,
        bytes,
        pos: 4,
    };
    let file_dim = cursor.read_u32(0)? as usize;
    if file_dim != dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            actual: file_dim,
        });
    }
    let count = cursor.read_u32(0)? as usize;
    let mut samples = Vec::with_capacity(count);
    let mut ids = HashSet::new();
    for record in 1..=count {
        let id_len = cursor.read_u32(record)? as usize;
        let id_bytes = cursor.read_slice(record, id_len)?.to_vec();
        let sample_id = std::str::from_utf8(&id_bytes)
            .map_err(|_| cursor.err(record, "sample id is not valid UTF-8".to_string()))?
            .to_string();
        let label_byte = cursor.read_slice(record, 1)?[0];
        let label = Label::from_code(label_byte as char).ok_or_else(|| {
            cursor.err(record, format!("invalid label byte 0x{label_byte:02x}"))
        })?;
        if !ids.insert(sample_id.clone()) {
            return Err(cursor.err(record, format!("duplicate sample_id {sample_id:?}")));
        }
        let mut values = Vec::with_capacity(dimension);
        for _ in 0..dimension {
            let raw = cursor.read_slice(record, 8)?;
            values.push(f64::from_le_bytes(raw.try_into().unwrap()));
        }
        let feature = FeatureVector::new(values).map_err(|source| Error::Sample {
            file: file.to_owned(),
            line: record,
            sample_id: sample_id.clone(),
            source: Box::new(source),
        })?;
        samples.push(SignatureSample {
            writer_id: entry.writer_id.clone(),
            sample_id,
            label,
            feature,
        });
    }
    if cursor.pos != bytes.len() {
        return Err(cursor.err(
            count,
            format!("{} trailing bytes after the last sample", bytes.len() - cursor.pos),
        ));
    }
    Ok(samples)
}

/// Byte reader for the binary feature format; `line` in errors is the
/// 1-based record index (0 for the header).
struct Cursor<'a> {
    file: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, record: usize, message: String) -> Error {
        Error::Parse {
            file: self.file.to_owned(),
            line: record,
            message,
        }
    }

    fn read_slice(&mut self, record: usize, len: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < len {
            return Err(self.err(
                record,
                format!(
                    "file truncated: needed {len} bytes at offset {}, {} remain",
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn read_u32(&mut self, record: usize) -> Result<u32> {
        let raw = self.read_slice(record, 4)?;
        Ok(u32::from_le_bytes(raw.try_into().unwrap()))
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// Writes a dataset as a manifest plus one feature file per writer into
/// `dir` (created if missing) and returns the manifest path.
///
/// Writer and sample ids are restricted to `[A-Za-z0-9._-]` so that text
/// rows and file names stay unambiguous.
pub fn save_dataset(dataset: &Dataset, dir: &Path, format: DatasetFormat) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.to_owned(), e))?;
    let mut entries = Vec::with_capacity(dataset.writers.len());
    for w in &dataset.writers {
        if !valid_id(&w.writer_id) {
            return Err(Error::invalid(format!(
                "writer id {:?} contains characters outside [A-Za-z0-9._-]",
                w.writer_id
            )));
        }
        for s in w.all() {
            if !valid_id(&s.sample_id) {
                return Err(Error::invalid(format!(
                    "sample id {:?} of writer {:?} contains characters outside [A-Za-z0-9._-]",
                    s.sample_id, w.writer_id
                )));
            }
            if s.feature.dim() != dataset.dimension {
                return Err(Error::DimensionMismatch {
                    expected: dataset.dimension,
                    actual: s.feature.dim(),
                });
            }
        }
        let file_name = match format {
            DatasetFormat::Text => format!("{}.feat", w.writer_id),
            DatasetFormat::Binary => format!("{}.featbin", w.writer_id),
        };
        let path = dir.join(&file_name);
        match format {
            DatasetFormat::Text => write_text_file(&path, w)?,
            DatasetFormat::Binary => write_binary_file(&path, w, dataset.dimension)?,
        }
        entries.push(WriterEntry {
            writer_id: w.writer_id.clone(),
            genuine_count: w.genuine.len(),
            forged_count: w.forged.len(),
            file: file_name,
        });
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        name: dataset.name.clone(),
        feature_model: dataset.feature_model.clone(),
        dimension: dataset.dimension,
        writers: entries,
    };
    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::json(manifest_path.clone(), e))?;
    fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(manifest_path.clone(), e))?;
    Ok(manifest_path)
}

fn write_text_file(path: &Path, writer: &WriterSamples) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.to_owned(), e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path.to_owned(), e);
    for s in writer.all() {
        write!(out, "{},{},{}", s.writer_id, s.sample_id, s.label.code()).map_err(io_err)?;
        for v in s.feature.values() {
            // f64 Display prints the shortest decimal that parses back to
            // the identical bits, so the text format round-trips exactly.
            write!(out, ",{v}").map_err(io_err)?;
        }
        writeln!(out).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn write_binary_file(path: &Path, writer: &WriterSamples, dimension: usize) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.to_owned(), e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path.to_owned(), e);
    out.write_all(BINARY_MAGIC).map_err(io_err)?;
    out.write_all(&(dimension as u32).to_le_bytes()).map_err(io_err)?;
    let count = writer.genuine.len() + writer.forged.len();
    out.write_all(&(count as u32).to_le_bytes()).map_err(io_err)?;
    for s in writer.all() {
        out.write_all(&(s.sample_id.len() as u32).to_le_bytes()).map_err(io_err)?;
        out.write_all(s.sample_id.as_bytes()).map_err(io_err)?;
        out.write_all(&[s.label.code() as u8]).map_err(io_err)?;
        for v in s.feature.values() {
            out.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

/// Parameters for the synthetic dataset generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub num_writers: usize,
    pub n_genuine: usize,
    pub n_forge: usize,
    pub dim: usize,
    /// Isotropic noise scale added to every sample.
    pub genuine_spread: f64,
    /// Distance between a writer's genuine prototype and the forgery
    /// center; 0 makes the two classes statistically identical.
    pub forge_offset: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.num_writers < 1 || self.n_genuine < 1 || self.n_forge < 1 {
            return Err(Error::invalid(format!(
                "synthetic counts must all be at least 1, got writers {}, genuine {}, forged {}",
                self.num_writers, self.n_genuine, self.n_forge
            )));
        }
        if self.dim < 2 {
            return Err(Error::invalid(format!(
                "synthetic dimension must be at least 2, got {}",
                self.dim
            )));
        }
        if !self.genuine_spread.is_finite() || self.genuine_spread <= 0.0 {
            return Err(Error::invalid(format!(
                "genuine_spread must be finite and > 0, got {}",
                self.genuine_spread
            )));
        }
        if !self.forge_offset.is_finite() || self.forge_offset < 0.0 {
            return Err(Error::invalid(format!(
                "forge_offset must be finite and >= 0, got {}",
                self.forge_offset
            )));
        }
        Ok(())
    }
}

fn random_unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generates a fully deterministic labeled dataset: per writer a random
/// unit-norm genuine prototype, a forgery center `forge_offset` away in a
/// random direction, and Gaussian noise of scale `genuine_spread` around
/// each center.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut writers = Vec::with_capacity(config.num_writers);
    for w in 1..=config.num_writers {
        let writer_id = format!("w{w:03}");
        let prototype = random_unit_vector(&mut rng, config.dim);
        let direction = random_unit_vector(&mut rng, config.dim);
        let shifted: Vec<f64> = prototype
            .iter()
            .zip(&direction)
            .map(|(p, d)| p + config.forge_offset * d)
            .collect();
        let shifted_norm = shifted.iter().map(|x| x * x).sum::<f64>().sqrt();
        let forge_center: Vec<f64> = if shifted_norm > 1e-9 {
            shifted.into_iter().map(|x| x / shifted_norm).collect()
        } else {
            // The offset landed on the antipode; fall back to the raw shift
            // so generation never fails.
            shifted
        };

        let mut draw = |center: &[f64], id: String, label: Label| -> Result<SignatureSample> {
            let values: Vec<f64> = center
                .iter()
                .map(|c| c + config.genuine_spread * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Ok(SignatureSample {
                writer_id: writer_id.clone(),
                sample_id: id,
                label,
                feature: FeatureVector::new(values)?,
            })
        };
        let mut genuine = Vec::with_capacity(config.n_genuine);
        for i in 1..=config.n_genuine {
            genuine.push(draw(&prototype, format!("g{i:03}"), Label::Genuine)?);
        }
        let mut forged = Vec::with_capacity(config.n_forge);
        for i in 1..=config.n_forge {
            forged.push(draw(&forge_center, format!("f{i:03}"), Label::Forged)?);
        }
        writers.push(WriterSamples {
            writer_id,
            genuine,
            forged,
        });
    }
    Ok(Dataset {
        name: "synthetic".to_string(),
        feature_model: "synthetic".to_string(),
        dimension: config.dim,
        writers,
    })
}

/// Mean and population standard deviation of one pooled scalar population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueStats {
    pub mean: f64,
    pub std: f64,
    /// Number of pooled scalar values (samples times dimension).
    pub count: usize,
}

/// Pooled feature statistics per class, plus their absolute differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub genuine: ValueStats,
    pub forged: ValueStats,
}

impl ClassStats {
    pub fn mean_difference(&self) -> f64 {
        (self.forged.mean - self.genuine.mean).abs()
    }

    pub fn std_difference(&self) -> f64 {
        (self.forged.std - self.genuine.std).abs()
    }
}

/// Pools every scalar feature value of each class across the given samples
/// and reports mean and population standard deviation per class.
pub fn class_feature_stats<'a, I>(samples: I) -> Result<ClassStats>
where
    I: IntoIterator<Item = &'a SignatureSample>,
{
    let mut genuine = Vec::new();
    let mut forged = Vec::new();
    for s in samples {
        let pool = match s.label {
            Label::Genuine => &mut genuine,
            Label::Forged => &mut forged,
        };
        pool.extend_from_slice(s.feature.values());
    }
    let stats_of = |pool: &Vec<f64>, label: &'static str| -> Result<ValueStats> {
        if pool.is_empty() {
            return Err(Error::EmptyClass { label });
        }
        Ok(ValueStats {
            mean: stats::mean(pool),
            std: stats::population_std(pool),
            count: pool.len(),
        })
    };
    Ok(ClassStats {
        genuine: stats_of(&genuine, "genuine")?,
        forged: stats_of(&forged, "forged")?,
    })
}

/// Minimal reader for NumPy `.npy` arrays, covering the subset the public
/// feature exports use: version 1.0/2.0 headers, C order, dtype `<f8` or
/// `<f4`, one- or two-dimensional shapes.
pub(crate) mod npy {
    use std::path::Path;

    use crate::error::{Error, Result};

    pub(crate) struct Array {
        pub rows: usize,
        pub cols: usize,
        /// Row-major values.
        pub values: Vec<f64>,
    }

    fn parse_err(path: &Path, message: String) -> Error {
        Error::Parse {
            file: path.to_owned(),
            line: 0,
            message,
        }
    }

    pub(crate) fn read_2d(path: &Path) -> Result<Array> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path.to_owned(), e))?;
        parse_bytes(path, &bytes)
    }

    pub(crate) fn parse_bytes(path: &Path, bytes: &[u8]) -> Result<Array> {
        if bytes.len() < 10 || &bytes[..6] != b"\x93NUMPY" {
            return Err(parse_err(path, "not an npy file (bad magic)".to_string()));
        }
        let major = bytes[6];
        let (header_start, header_len) = match major {
            1 => {
                let len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
                (10, len)
            }
            2 => {
                if bytes.len() < 12 {
                    return Err(parse_err(path, "truncated v2 header".to_string()));
                }
                let len =
                    u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
                (12, len)
            }
            other => {
                return Err(parse_err(
                    path,
                    format!("unsupported npy major version {other}"),
                ))
            }
        };
        let header_end = header_start + header_len;
        if bytes.len() < header_end {
            return Err(parse_err(path, "truncated header".to_string()));
        }
        let header = std::str::from_utf8(&bytes[header_start..header_end])
            .map_err(|_| parse_err(path, "header is not valid UTF-8".to_string()))?;

        let descr = dict_value(header, "descr")
            .ok_or_else(|| parse_err(path, "header lacks a descr entry".to_string()))?;
        let width = match descr.trim_matches(['\'', '"']) {
            "<f8" => 8,
            "<f4" => 4,
            other => {
                return Err(parse_err(
                    path,
                    format!("unsupported dtype {other:?}, expected <f8 or <f4"),
                ))
            }
        };
        let fortran = dict_value(header, "fortran_order")
            .ok_or_else(|| parse_err(path, "header lacks fortran_order".to_string()))?;
        if fortran.trim() != "False" {
            return Err(parse_err(path, "only C-order arrays are supported".to_string()));
        }
        let shape_raw = dict_value(header, "shape")
            .ok_or_else(|| parse_err(path, "header lacks a shape entry".to_string()))?;
        let dims: Vec<usize> = shape_raw
            .trim()
            .trim_start_matches('(')
            .trim_end_matches(')')
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| parse_err(path, format!("bad shape component {p:?}")))
            })
            .collect::<Result<_>>()?;
        let (rows, cols) = match dims.as_slice() {
            [n] => (1usize, *n),
            [r, c] => (*r, *c),
            other => {
                return Err(parse_err(
                    path,
                    format!("expected a 1-d or 2-d array, got {} dims", other.len()),
                ))
            }
        };

        let data = &bytes[header_end..];
        let expected = rows * cols * width;
        if data.len() != expected {
            return Err(parse_err(
                path,
                format!(
                    "payload is {} bytes but shape ({rows}, {cols}) with {width}-byte floats needs {expected}",
                    data.len()
                ),
            ));
        }
        let values: Vec<f64> = match width {
            8 => data
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            _ => data
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
        };
        Ok(Array { rows, cols, values })
    }

    /// Pulls the raw value text for one key out of the header's Python
    /// dict literal, up to the next top-level comma or the closing brace.
    fn dict_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
        let needle = format!("'{key}':");
        let start = header.find(&needle)? + needle.len();
        let rest = &header[start..];
        let mut depth = 0usize;
        for (i, c) in rest.char_indices() {
            match c {
                '(' | '[' => depth += 1,
                ')' | ']' => depth = depth.saturating_sub(1),
                ',' | '}' if depth == 0 => return Some(rest[..i].trim()),
                _ => {}
            }
        }
        Some(rest.trim())
    }
}

/// Outcome of a directory conversion: the written manifest plus anything
/// that was skipped along the way.
#[derive(Debug)]
pub struct ConvertReport {
    pub manifest: PathBuf,
    pub writers: usize,
    pub samples: usize,
    pub warnings: Vec<String>,
}

/// Converts a directory of per-writer `.npy` feature exports into the
/// canonical dataset layout.
///
/// File names are expected to look like `{writer}_{class}.npy` where the
/// class suffix marks genuine samples (`g`, `gen`, `genuine`, `real`) or
/// forgeries (`f`, `forg`, `forgery`, `forgeries`, `fake`, `skilled`).
/// Unrecognized files are skipped with a warning rather than failing the
/// whole conversion.
pub fn convert_npy_dir(
    input_dir: &Path,
    out_dir: &Path,
    name: &str,
    feature_model: &str,
    format: DatasetFormat,
) -> Result<ConvertReport> {
    let mut files: Vec<PathBuf> = fs::read_dir(input_dir)
        .map_err(|e| Error::io(input_dir.to_owned(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "npy"))
        .collect();
    files.sort();

    let mut warnings = Vec::new();
    let mut grouped: BTreeMap<String, (Vec<PathBuf>, Vec<PathBuf>)> = BTreeMap::new();
    for path in files {
        let stem = match path.file_stem().and_then(|s| s.to_str()) {
            Some(s) => s,
            None => {
                warnings.push(format!("skipping {}: non-UTF-8 file name", path.display()));
                continue;
            }
        };
        let Some((writer, suffix)) = stem.rsplit_once('_') else {
            warnings.push(format!(
                "skipping {}: expected a writer_class.npy name",
                path.display()
            ));
            continue;
        };
        let label = match suffix.to_ascii_lowercase().as_str() {
            "g" | "gen" | "genuine" | "real" => Label::Genuine,
            "f" | "forg" | "forgery" | "forgeries" | "fake" | "skilled" => Label::Forged,
            other => {
                warnings.push(format!(
                    "skipping {}: unrecognized class suffix {other:?}",
                    path.display()
                ));
                continue;
            }
        };
        if !valid_id(writer) {
            warnings.push(format!(
                "skipping {}: writer id {writer:?} has characters outside [A-Za-z0-9._-]",
                path.display()
            ));
            continue;
        }
        let slot = grouped.entry(writer.to_string()).or_default();
        match label {
            Label::Genuine => slot.0.push(path),
            Label::Forged => slot.1.push(path),
        }
    }
    if grouped.is_empty() {
        return Err(Error::invalid(format!(
            "no convertible .npy files in {}",
            input_dir.display()
        )));
    }

    let mut dimension = 0usize;
    let mut writers = Vec::new();
    let mut total = 0usize;
    for (writer_id, (genuine_files, forged_files)) in &grouped {
        let mut load_class = |paths: &[PathBuf], label: Label| -> Result<Vec<SignatureSample>> {
            let mut out = Vec::new();
            for path in paths {
                let array = npy::read_2d(path)?;
                if dimension == 0 {
                    dimension = array.cols;
                } else if array.cols != dimension {
                    return Err(Error::DimensionMismatch {
                        expected: dimension,
                        actual: array.cols,
                    });
                }
                for row in 0..array.rows {
                    let values =
                        array.values[row * array.cols..(row + 1) * array.cols].to_vec();
                    let index = out.len() + 1;
                    let sample_id = match label {
                        Label::Genuine => format!("g{index:03}"),
                        Label::Forged => format!("f{index:03}"),
                    };
                    let feature = FeatureVector::new(values).map_err(|source| Error::Sample {
                        file: path.clone(),
                        line: row + 1,
                        sample_id: sample_id.clone(),
                        source: Box::new(source),
                    })?;
                    out.push(SignatureSample {
                        writer_id: writer_id.clone(),
                        sample_id,
                        label,
                        feature,
                    });
                }
            }
            Ok(out)
        };
        let genuine = load_class(genuine_files, Label::Genuine)?;
        let forged = load_class(forged_files, Label::Forged)?;
        total += genuine.len() + forged.len();
        writers.push(WriterSamples {
            writer_id: writer_id.clone(),
            genuine,
            forged,
        });
    }

    let dataset = Dataset {
        name: name.to_string(),
        feature_model: feature_model.to_string(),
        dimension,
        writers,
    };
    let manifest = save_dataset(&dataset, out_dir, format)?;
    Ok(ConvertReport {
        manifest,
        writers: dataset.writers.len(),
        samples: total,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SyntheticConfig {
        SyntheticConfig {
            num_writers: 3,
            n_genuine: 5,
            n_forge: 4,
            dim: 6,
            genuine_spread: 0.05,
            forge_offset: 0.8,
            seed: 17,
        }
    }

    fn assert_bit_equal(a: &Dataset, b: &Dataset) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.feature_model, b.feature_model);
        assert_eq!(a.dimension, b.dimension);
        assert_eq!(a.writers.len(), b.writers.len());
        for (wa, wb) in a.writers.iter().zip(&b.writers) {
            assert_eq!(wa.writer_id, wb.writer_id);
            for (sa, sb) in wa.all().zip(wb.all()) {
                assert_eq!(sa.writer_id, sb.writer_id);
                assert_eq!(sa.sample_id, sb.sample_id);
                assert_eq!(sa.label, sb.label);
                let bits_a: Vec<u64> = sa.feature.values().iter().map(|v| v.to_bits()).collect();
                let bits_b: Vec<u64> = sb.feature.values().iter().map(|v| v.to_bits()).collect();
                assert_eq!(bits_a, bits_b);
            }
        }
    }

    #[test]
    fn synthetic_generation_is_deterministic() {
        let a = generate_synthetic(&small_config()).unwrap();
        let b = generate_synthetic(&small_config()).unwrap();
        assert_bit_equal(&a, &b);
        assert_eq!(a.writers.len(), 3);
        assert_eq!(a.writers[0].genuine.len(), 5);
        assert_eq!(a.writers[0].forged.len(), 4);
        assert_eq!(a.dimension, 6);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn synthetic_seeds_differ() {
        let a = generate_synthetic(&small_config()).unwrap();
        let mut other = small_config();
        other.seed = 18;
        let b = generate_synthetic(&other).unwrap();
        assert_ne!(
            a.writers[0].genuine[0].feature.values(),
            b.writers[0].genuine[0].feature.values()
        );
    }

    #[test]
    fn synthetic_validation_rejects_bad_parameters() {
        let mut c = small_config();
        c.dim = 1;
        assert!(generate_synthetic(&c).is_err());
        let mut c = small_config();
        c.n_forge = 0;
        assert!(generate_synthetic(&c).is_err());
        let mut c = small_config();
        c.genuine_spread = 0.0;
        assert!(generate_synthetic(&c).is_err());
        let mut c = small_config();
        c.forge_offset = -1.0;
        assert!(generate_synthetic(&c).is_err());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let dataset = generate_synthetic(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_dataset(&dataset, dir.path(), DatasetFormat::Text).unwrap();
        let back = load_dataset(&manifest).unwrap();
        assert_bit_equal(&dataset, &back);
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dataset = generate_synthetic(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_dataset(&dataset, dir.path(), DatasetFormat::Binary).unwrap();
        let back = load_dataset(&manifest).unwrap();
        assert_bit_equal(&dataset, &back);
    }

    fn write_fixture(dir: &Path, rows: &str, genuine: usize, forged: usize) -> PathBuf {
        let manifest = serde_json::json!({
            "format_version": 1,
            "name": "fixture",
            "feature_model": "toy",
            "dimension": 4,
            "writers": [{
                "writer_id": "w001",
                "genuine_count": genuine,
                "forged_count": forged,
                "file": "w001.feat",
            }],
        });
        let manifest_path = dir.join("manifest.json");
        fs::write(&manifest_path, manifest.to_string()).unwrap();
        fs::write(dir.join("w001.feat"), rows).unwrap();
        manifest_path
    }

    #[test]
    fn minimal_text_dataset_loads() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_fixture(
            dir.path(),
            "# toy fixture\nw001,g001,G,1,0,0,0\nw001,g002,G,0.5,0.25,0.125,1e-3\n",
            2,
            0,
        );
        let dataset = load_dataset(&manifest).unwrap();
        assert_eq!(dataset.writers.len(), 1);
        assert_eq!(dataset.writers[0].genuine.len(), 2);
        assert!(dataset.writers[0].forged.is_empty());
        assert_eq!(dataset.writers[0].genuine[1].feature.values()[3], 1e-3);
    }

    #[test]
    fn wrong_dimension_row_is_rejected_at_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_fixture(dir.path(), "w001,g001,G,1,0,0\n", 1, 0);
        match load_dataset(&manifest) {
            Err(Error::Sample { line, source, .. }) => {
                assert_eq!(line, 1);
                assert!(matches!(
                    *source,
                    Error::DimensionMismatch {
                        expected: 4,
                        actual: 3
                    }
                ));
            }
            other => panic!("expected a per-sample dimension error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            "w001,g001,X,1,0,0,0\n",
            "w001,g001\n",
            "w002,g001,G,1,0,0,0\n",
            "w001,g001,G,1,0,zero,0\n",
            "w001,g001,G,1,0,0,0\nw001,g001,G,1,0,0,0\n",
        ];
        for rows in cases {
            let manifest = write_fixture(dir.path(), rows, 2, 0);
            assert!(
                matches!(load_dataset(&manifest), Err(Error::Parse { .. })),
                "rows {rows:?} should fail to parse"
            );
        }
    }

    #[test]
    fn non_finite_feature_is_rejected_with_sample_context() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_fixture(dir.path(), "w001,g001,G,1,0,NaN,0\n", 1, 0);
        match load_dataset(&manifest) {
            Err(Error::Sample {
                sample_id, source, ..
            }) => {
                assert_eq!(sample_id, "g001");
                assert!(matches!(*source, Error::NonFiniteFeature));
            }
            other => panic!("expected a per-sample finiteness error, got {other:?}"),
        }
    }

    #[test]
    fn count_mismatch_names_the_class() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_fixture(dir.path(), "w001,g001,G,1,0,0,0\n", 2, 0);
        match load_dataset(&manifest) {
            Err(Error::CountMismatch {
                what,
                declared,
                found,
                ..
            }) => {
                assert_eq!(what, "genuine");
                assert_eq!(declared, 2);
                assert_eq!(found, 1);
            }
            other => panic!("expected a count mismatch, got {other:?}"),
        }
    }

    #[test]
    fn truncated_binary_file_is_rejected() {
        let dataset = generate_synthetic(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_dataset(&dataset, dir.path(), DatasetFormat::Binary).unwrap();
        let file = dir.path().join("w001.featbin");
        let bytes = fs::read(&file).unwrap();
        fs::write(&file, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_dataset(&manifest), Err(Error::Parse { .. })));
    }

    #[test]
    fn save_rejects_hostile_ids() {
        let mut dataset = generate_synthetic(&small_config()).unwrap();
        dataset.writers[0].writer_id = "w/001".to_string();
        let dir = tempfile::tempdir().unwrap();
        assert!(save_dataset(&dataset, dir.path(), DatasetFormat::Text).is_err());
    }

    #[test]
    fn class_stats_hand_example() {
        let samples = vec![
            SignatureSample {
                writer_id: "w001".into(),
                sample_id: "g001".into(),
                label: Label::Genuine,
                feature: FeatureVector::new(vec![0.0, 1.0]).unwrap(),
            },
            SignatureSample {
                writer_id: "w001".into(),
                sample_id: "f001".into(),
                label: Label::Forged,
                feature: FeatureVector::new(vec![1.0, 1.0]).unwrap(),
            },
        ];
        let stats = class_feature_stats(&samples).unwrap();
        assert_eq!(stats.genuine.mean, 0.5);
        assert_eq!(stats.genuine.std, 0.5);
        assert_eq!(stats.genuine.count, 2);
        assert_eq!(stats.forged.mean, 1.0);
        assert_eq!(stats.forged.std, 0.0);
        assert_eq!(stats.mean_difference(), 0.5);
        assert_eq!(stats.std_difference(), 0.5);
    }

    #[test]
    fn class_stats_constant_features_have_zero_std() {
        let samples: Vec<SignatureSample> = [Label::Genuine, Label::Forged]
            .into_iter()
            .enumerate()
            .map(|(i, label)| SignatureSample {
                writer_id: "w001".into(),
                sample_id: format!("s{i}"),
                label,
                feature: FeatureVector::new(vec![0.25; 8]).unwrap(),
            })
            .collect();
        let stats = class_feature_stats(&samples).unwrap();
        assert_eq!(stats.genuine.mean, 0.25);
        assert_eq!(stats.genuine.std, 0.0);
        assert_eq!(stats.forged.mean, 0.25);
        assert_eq!(stats.forged.std, 0.0);
    }

    #[test]
    fn class_stats_is_permutation_invariant() {
        let dataset = generate_synthetic(&small_config()).unwrap();
        let writer = &dataset.writers[0];
        let forward: Vec<&SignatureSample> = writer.all().collect();
        let mut reversed = forward.clone();
        reversed.reverse();
        let a = class_feature_stats(forward).unwrap();
        let b = class_feature_stats(reversed).unwrap();
        assert!((a.genuine.mean - b.genuine.mean).abs() < 1e-12);
        assert!((a.genuine.std - b.genuine.std).abs() < 1e-12);
        assert!((a.forged.mean - b.forged.mean).abs() < 1e-12);
        assert!((a.forged.std - b.forged.std).abs() < 1e-12);
    }

    #[test]
    fn class_stats_requires_both_classes() {
        let samples = vec![SignatureSample {
            writer_id: "w001".into(),
            sample_id: "g001".into(),
            label: Label::Genuine,
            feature: FeatureVector::new(vec![1.0, 2.0]).unwrap(),
        }];
        assert!(matches!(
            class_feature_stats(&samples),
            Err(Error::EmptyClass { label: "forged" })
        ));
    }

    fn npy_bytes(descr: &str, shape: &str, payload: &[u8]) -> Vec<u8> {
        let header = format!("{{'descr': {descr}, 'fortran_order': False, 'shape': {shape}, }}");
        let mut padded = header.into_bytes();
        while (10 + padded.len() + 1) % 64 != 0 {
            padded.push(b' ');
        }
        padded.push(b'\n');
        let mut bytes = b"\x93NUMPY\x01\x00".to_vec();
        bytes.extend_from_slice(&(padded.len() as u16).to_le_bytes());
        bytes.extend_from_slice(&padded);
        bytes.extend_from_slice(payload);
        bytes
    }

    #[test]
    fn npy_parses_f8_and_f4() {
        let values = [1.0f64, 2.5, -3.0, 0.5, 4.0, 8.0];
        let payload: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let bytes = npy_bytes("'<f8'", "(2, 3)", &payload);
        let array = npy::parse_bytes(Path::new("test.npy"), &bytes).unwrap();
        assert_eq!((array.rows, array.cols), (2, 3));
        assert_eq!(array.values, values);

        let payload: Vec<u8> = values
            .iter()
            .flat_map(|v| (*v as f32).to_le_bytes())
            .collect();
        let bytes = npy_bytes("'<f4'", "(2, 3)", &payload);
        let array = npy::parse_bytes(Path::new("test.npy"), &bytes).unwrap();
        assert_eq!(array.values, values);

        let payload: Vec<u8> = values[..3].iter().flat_map(|v| v.to_le_bytes()).collect();
        let bytes = npy_bytes("'<f8'", "(3,)", &payload);
        let array = npy::parse_bytes(Path::new("test.npy"), &bytes).unwrap();
        assert_eq!((array.rows, array.cols), (1, 3));
    }

    #[test]
    fn npy_rejects_unsupported_layouts() {
        let bytes = npy_bytes("'<i8'", "(1, 1)", &1i64.to_le_bytes());
        assert!(npy::parse_bytes(Path::new("t.npy"), &bytes).is_err());
        let bytes = npy_bytes("'<f8'", "(2, 2)", &1.0f64.to_le_bytes());
        assert!(npy::parse_bytes(Path::new("t.npy"), &bytes).is_err());
        assert!(npy::parse_bytes(Path::new("t.npy"), b"not numpy").is_err());
    }

    #[test]
    fn convert_npy_dir_builds_a_loadable_dataset() {
        let input = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let genuine = [0.4f64, 0.3, 0.2, 0.5, 0.4, 0.25];
        let forged = [0.9f64, 0.1, 0.3];
        let g_payload: Vec<u8> = genuine.iter().flat_map(|v| v.to_le_bytes()).collect();
        let f_payload: Vec<u8> = forged.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(
            input.path().join("writer9_genuine.npy"),
            npy_bytes("'<f8'", "(2, 3)", &g_payload),
        )
        .unwrap();
        fs::write(
            input.path().join("writer9_forgeries.npy"),
            npy_bytes("'<f8'", "(1, 3)", &f_payload),
        )
        .unwrap();
        fs::write(input.path().join("notes.txt"), "ignored").unwrap();
        fs::write(input.path().join("oddname.npy"), "ignored").unwrap();

        let report = convert_npy_dir(
            input.path(),
            out.path(),
            "converted",
            "signet",
            DatasetFormat::Text,
        )
        .unwrap();
        assert_eq!(report.writers, 1);
        assert_eq!(report.samples, 3);
        assert_eq!(report.warnings.len(), 1);

        let dataset = load_dataset(&report.manifest).unwrap();
        assert_eq!(dataset.dimension, 3);
        let writer = dataset.writer("writer9").unwrap();
        assert_eq!(writer.genuine.len(), 2);
        assert_eq!(writer.forged.len(), 1);
        assert_eq!(writer.genuine[0].feature.values(), &genuine[..3]);
        assert_eq!(writer.forged[0].feature.values(), &forged[..]);
    }
}
