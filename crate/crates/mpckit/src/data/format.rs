//! Columnar trajectory container. Episodes share a fixed column schema but
//! have individual lengths; each episode stores one variation block plus a
//! contiguous little-endian slab per column, so any step window is two seeks
//! away. A crc32 over the payload is verified when a file is opened.
//!
//! Layout: magic, version, column schema, variation layout, episode count,
//! per-episode index (step count plus absolute offsets), payload, crc32.

use std::fs::File;
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

pub const MAGIC: &[u8; 4] = b"SWMT";
pub const VERSION: u16 = 1;

const MAX_RANK: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("not a trajectory file (bad magic)")]
    BadMagic,
    #[error("unsupported trajectory version {0}")]
    BadVersion(u16),
    #[error("truncated trajectory file")]
    Truncated,
    #[error("payload checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("episode {episode} out of range ({count} episodes)")]
    NoSuchEpisode { episode: u64, count: u64 },
    #[error("window [{start}, {end}) out of range for episode {episode} with {steps} steps")]
    WindowOutOfRange {
        episode: u64,
        start: u32,
        end: u64,
        steps: u32,
    },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("schema: {0}")]
    Schema(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32,
    I32,
    U8,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 | Dtype::I32 => 4,
            Dtype::U8 => 1,
        }
    }

    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::I32 => 1,
            Dtype::U8 => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::I32),
            2 => Some(Dtype::U8),
            _ => None,
        }
    }
}

impl std::fmt::Display for Dtype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Dtype::F32 => "f32",
            Dtype::I32 => "i32",
            Dtype::U8 => "u8",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnSpec {
    pub name: String,
    pub dtype: Dtype,
    pub dims: Vec<u32>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, dtype: Dtype, dims: &[u32]) -> Self {
        Self {
            name: name.into(),
            dtype,
            dims: dims.to_vec(),
        }
    }

    pub fn elems_per_step(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    pub fn bytes_per_step(&self) -> usize {
        self.elems_per_step() * self.dtype.size()
    }
}

/// Column layout plus the per-episode variation block layout (key and value
/// count per factor, keys in a fixed order shared by every episode).
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySchema {
    pub columns: Vec<ColumnSpec>,
    pub variation_layout: Vec<(String, u16)>,
}

impl TrajectorySchema {
    pub fn column(&self, name: &str) -> Option<(usize, &ColumnSpec)> {
        self.columns
            .iter()
            .enumerate()
            .find(|(_, c)| c.name == name)
    }

    pub fn variation_len(&self) -> usize {
        self.variation_layout
            .iter()
            .map(|(_, n)| *n as usize)
            .sum()
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.columns.is_empty() {
            return Err(DataError::Schema("at least one column required".into()));
        }
        if self.columns.len() > u16::MAX as usize {
            return Err(DataError::Schema("too many columns".into()));
        }
        for col in &self.columns {
            if col.name.is_empty() {
                return Err(DataError::Schema("empty column name".into()));
            }
            if col.dims.is_empty() || col.dims.len() > MAX_RANK {
                return Err(DataError::Schema(format!(
                    "column {:?} rank must be 1..={MAX_RANK}",
                    col.name
                )));
            }
            if col.dims.iter().any(|&d| d == 0) {
                return Err(DataError::Schema(format!(
                    "column {:?} has a zero dim",
                    col.name
                )));
            }
        }
        let mut names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.columns.len() {
            return Err(DataError::Schema("duplicate column name".into()));
        }
        if self.variation_layout.len() > u16::MAX as usize {
            return Err(DataError::Schema("too many variation factors".into()));
        }
        Ok(())
    }
}

/// One column's values for a run of steps, flattened step-major.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    F32(Vec<f32>),
    I32(Vec<i32>),
    U8(Vec<u8>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::F32(v) => v.len(),
            ColumnData::I32(v) => v.len(),
            ColumnData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match self {
            ColumnData::F32(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_i32(&self) -> Option<&[i32]> {
        match self {
            ColumnData::I32(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u8(&self) -> Option<&[u8]> {
        match self {
            ColumnData::U8(v) => Some(v),
            _ => None,
        }
    }

    fn dtype(&self) -> Dtype {
        match self {
            ColumnData::F32(_) => Dtype::F32,
            ColumnData::I32(_) => Dtype::I32,
            ColumnData::U8(_) => Dtype::U8,
        }
    }

    fn write_le(&self, out: &mut Vec<u8>) {
        match self {
            ColumnData::F32(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            ColumnData::I32(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            ColumnData::U8(v) => out.extend_from_slice(v),
        }
    }
}

/// One episode ready for appending: a variation block matching the schema's
/// layout plus one data block per column, in schema order.
#[derive(Clone, Debug)]
pub struct EpisodeData {
    pub variation: Vec<f64>,
    pub columns: Vec<ColumnData>,
}

/// A window read result: one column's block plus its per-step shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnBlock {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: ColumnData,
}

#[derive(Clone, Debug)]
struct EpisodeEntry {
    steps: u32,
    variation_offset: u64,
    column_offsets: Vec<u64>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct FileSummary {
    pub path: PathBuf,
    pub episodes: u64,
    pub total_steps: u64,
    pub bytes: u64,
}

/// Buffers episodes in memory and lays the whole file down at `finish`, so
/// the index can sit ahead of the payload.
pub struct TrajectoryWriter {
    path: PathBuf,
    file: File,
    schema: TrajectorySchema,
    entries: Vec<EpisodeEntry>,
    payload: Vec<u8>,
}

impl TrajectoryWriter {
    pub fn create(path: impl AsRef<Path>, schema: TrajectorySchema) -> Result<Self, DataError> {
        schema.validate()?;
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path)?;
        Ok(Self {
            path,
            file,
            schema,
            entries: Vec::new(),
            payload: Vec::new(),
        })
    }

    pub fn schema(&self) -> &TrajectorySchema {
        &self.schema
    }

    pub fn append(&mut self, episode: &EpisodeData) -> Result<(), DataError> {
        if episode.columns.len() != self.schema.columns.len() {
            return Err(DataError::Schema(format!(
                "episode has {} columns, schema has {}",
                episode.columns.len(),
                self.schema.columns.len()
            )));
        }
        if episode.variation.len() != self.schema.variation_len() {
            return Err(DataError::Schema(format!(
                "variation block has {} values, layout wants {}",
                episode.variation.len(),
                self.schema.variation_len()
            )));
        }
        let mut steps: Option<u32> = None;
        for (spec, data) in self.schema.columns.iter().zip(&episode.columns) {
            if data.dtype() != spec.dtype {
                return Err(DataError::Schema(format!(
                    "column {:?} expects {}, got {}",
                    spec.name,
                    spec.dtype,
                    data.dtype()
                )));
            }
            let elems = spec.elems_per_step();
            if data.len() % elems != 0 {
                return Err(DataError::Schema(format!(
                    "column {:?} length {} is not a multiple of {} per step",
                    spec.name,
                    data.len(),
                    elems
                )));
            }
            let this = u32::try_from(data.len() / elems)
                .map_err(|_| DataError::Schema(format!("column {:?} too long", spec.name)))?;
            match steps {
                None => steps = Some(this),
                Some(prev) if prev != this => {
                    return Err(DataError::Schema(format!(
                        "column {:?} has {} steps, expected {}",
                        spec.name, this, prev
                    )));
                }
                Some(_) => {}
            }
        }
        let steps = steps.unwrap_or(0);

        let variation_offset = self.payload.len() as u64;
        for v in &episode.variation {
            self.payload.extend_from_slice(&v.to_le_bytes());
        }
        let mut column_offsets = Vec::with_capacity(episode.columns.len());
        for data in &episode.columns {
            column_offsets.push(self.payload.len() as u64);
            data.write_le(&mut self.payload);
        }
        self.entries.push(EpisodeEntry {
            steps,
            variation_offset,
            column_offsets,
        });
        Ok(())
    }

    pub fn finish(mut self) -> Result<FileSummary, DataError> {
        let mut head = Vec::new();
        head.extend_from_slice(MAGIC);
        head.extend_from_slice(&VERSION.to_le_bytes());
        head.extend_from_slice(&(self.schema.columns.len() as u16).to_le_bytes());
        for col in &self.schema.columns {
            head.extend_from_slice(&(col.name.len() as u16).to_le_bytes());
            head.extend_from_slice(col.name.as_bytes());
            head.push(col.dtype.code());
            head.push(col.dims.len() as u8);
            for &d in &col.dims {
                head.extend_from_slice(&d.to_le_bytes());
            }
        }
        head.extend_from_slice(&(self.schema.variation_layout.len() as u16).to_le_bytes());
        for (key, n) in &self.schema.variation_layout {
            head.extend_from_slice(&(key.len() as u16).to_le_bytes());
            head.extend_from_slice(key.as_bytes());
            head.extend_from_slice(&n.to_le_bytes());
        }
        head.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        let index_bytes: usize = self
            .entries
            .iter()
            .map(|e| 4 + 8 + 8 * e.column_offsets.len())
            .sum();
        let payload_start = (head.len() + index_bytes) as u64;
        for entry in &self.entries {
            head.extend_from_slice(&entry.steps.to_le_bytes());
            head.extend_from_slice(&(payload_start + entry.variation_offset).to_le_bytes());
            for &off in &entry.column_offsets {
                head.extend_from_slice(&(payload_start + off).to_le_bytes());
            }
        }

        let mut hasher = crc32fast::Hasher::new();
        hasher.update(&self.payload);
        let crc = hasher.finalize();

        self.file.write_all(&head)?;
        self.file.write_all(&self.payload)?;
        self.file.write_all(&crc.to_le_bytes())?;
        self.file.flush()?;
        let bytes = head.len() as u64 + self.payload.len() as u64 + 4;
        Ok(FileSummary {
            path: self.path,
            episodes: self.entries.len() as u64,
            total_steps: self.entries.iter().map(|e| e.steps as u64).sum(),
            bytes,
        })
    }
}

/// Parses the header once, checks the payload crc once, then serves windows
/// with positioned reads so latency does not depend on the offset.
pub struct TrajectoryReader {
    file: File,
    schema: TrajectorySchema,
    entries: Vec<EpisodeEntry>,
    file_len: u64,
}

struct HeaderCursor<R> {
    inner: R,
    consumed: u64,
}

impl<R: Read> HeaderCursor<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>, DataError> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                DataError::Truncated
            } else {
                DataError::Io(e)
            }
        })?;
        self.consumed += n as u64;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8, DataError> {
        Ok(self.bytes(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DataError> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DataError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn string(&mut self, n: usize) -> Result<String, DataError> {
        String::from_utf8(self.bytes(n)?)
            .map_err(|_| DataError::Schema("non-utf8 name in header".into()))
    }
}

impl TrajectoryReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let mut file = File::open(path.as_ref())?;
        let file_len = file.metadata()?.len();
        let mut cur = HeaderCursor {
            inner: io::BufReader::new(&mut file),
            consumed: 0,
        };

        if cur.bytes(4)? != MAGIC {
            return Err(DataError::BadMagic);
        }
        let version = cur.u16()?;
        if version != VERSION {
            return Err(DataError::BadVersion(version));
        }
        let n_cols = cur.u16()? as usize;
        let mut columns = Vec::with_capacity(n_cols);
        for _ in 0..n_cols {
            let name_len = cur.u16()? as usize;
            let name = cur.string(name_len)?;
            let dtype = Dtype::from_code(cur.u8()?)
                .ok_or_else(|| DataError::Schema(format!("bad dtype for column {name:?}")))?;
            let rank = cur.u8()? as usize;
            if rank == 0 || rank > MAX_RANK {
                return Err(DataError::Schema(format!("bad rank for column {name:?}")));
            }
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(cur.u32()?);
            }
            columns.push(ColumnSpec { name, dtype, dims });
        }
        let n_factors = cur.u16()? as usize;
        let mut variation_layout = Vec::with_capacity(n_factors);
        for _ in 0..n_factors {
            let key_len = cur.u16()? as usize;
            let key = cur.string(key_len)?;
            let n = cur.u16()?;
            variation_layout.push((key, n));
        }
        let schema = TrajectorySchema {
            columns,
            variation_layout,
        };
        schema.validate()?;

        let episode_count = cur.u64()?;
        let mut entries = Vec::with_capacity(episode_count.min(1 << 20) as usize);
        for _ in 0..episode_count {
            let steps = cur.u32()?;
            let variation_offset = cur.u64()?;
            let mut column_offsets = Vec::with_capacity(schema.columns.len());
            for _ in 0..schema.columns.len() {
                column_offsets.push(cur.u64()?);
            }
            entries.push(EpisodeEntry {
                steps,
                variation_offset,
                column_offsets,
            });
        }
        let payload_start = cur.consumed;
        drop(cur);
        if file_len < payload_start + 4 {
            return Err(DataError::Truncated);
        }
        let payload_len = file_len - payload_start - 4;

        // Whole-payload scan: any flipped payload byte fails the open.
        let mut hasher = crc32fast::Hasher::new();
        let mut remaining = payload_len;
        let mut buf = vec![0u8; 64 * 1024];
        file.seek(SeekFrom::Start(payload_start))?;
        while remaining > 0 {
            let take = remaining.min(buf.len() as u64) as usize;
            file.read_exact(&mut buf[..take])?;
            hasher.update(&buf[..take]);
            remaining -= take as u64;
        }
        let computed = hasher.finalize();
        let mut crc_buf = [0u8; 4];
        file.read_exact(&mut crc_buf)?;
        let stored = u32::from_le_bytes(crc_buf);
        if stored != computed {
            return Err(DataError::ChecksumMismatch { stored, computed });
        }

        let reader = Self {
            file,
            schema,
            entries,
            file_len,
        };
        reader.validate_index(payload_start)?;
        Ok(reader)
    }

    fn validate_index(&self, payload_start: u64) -> Result<(), DataError> {
        let payload_end = self.file_len - 4;
        let variation_bytes = (self.schema.variation_len() * 8) as u64;
        for entry in &self.entries {
            let v_end = entry.variation_offset + variation_bytes;
            if entry.variation_offset < payload_start || v_end > payload_end {
                return Err(DataError::Schema("variation offset out of bounds".into()));
            }
            for (spec, &off) in self.schema.columns.iter().zip(&entry.column_offsets) {
                let end = off + entry.steps as u64 * spec.bytes_per_step() as u64;
                if off < payload_start || end > payload_end {
                    return Err(DataError::Schema(format!(
                        "column {:?} offset out of bounds",
                        spec.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> &TrajectorySchema {
        &self.schema
    }

    pub fn episode_count(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn file_len(&self) -> u64 {
        self.file_len
    }

    fn entry(&self, episode: u64) -> Result<&EpisodeEntry, DataError> {
        self.entries
            .get(episode as usize)
            .ok_or(DataError::NoSuchEpisode {
                episode,
                count: self.entries.len() as u64,
            })
    }

    pub fn episode_len(&self, episode: u64) -> Result<u32, DataError> {
        Ok(self.entry(episode)?.steps)
    }

    /// Reads steps `[start, start + len)` of one episode. `columns` narrows
    /// and orders the result; `None` returns every column in schema order.
    /// Two positioned reads per column, independent of `start`.
    pub fn read_window(
        &self,
        episode: u64,
        start: u32,
        len: u32,
        columns: Option<&[&str]>,
    ) -> Result<Vec<ColumnBlock>, DataError> {
        let entry = self.entry(episode)?;
        let end = start as u64 + len as u64;
        if end > entry.steps as u64 {
            return Err(DataError::WindowOutOfRange {
                episode,
                start,
                end,
                steps: entry.steps,
            });
        }
        let picks: Vec<usize> = match columns {
            Some(names) => names
                .iter()
                .map(|name| {
                    self.schema
                        .column(name)
                        .map(|(i, _)| i)
                        .ok_or_else(|| DataError::UnknownColumn((*name).into()))
                })
                .collect::<Result<_, _>>()?,
            None => (0..self.schema.columns.len()).collect(),
        };
        let mut blocks = Vec::with_capacity(picks.len());
        for ci in picks {
            let spec = &self.schema.columns[ci];
            let row = spec.bytes_per_step();
            let offset = entry.column_offsets[ci] + start as u64 * row as u64;
            let mut raw = vec![0u8; len as usize * row];
            self.file.read_exact_at(&mut raw, offset)?;
            let data = match spec.dtype {
                Dtype::F32 => ColumnData::F32(
                    raw.chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                Dtype::I32 => ColumnData::I32(
                    raw.chunks_exact(4)
                        .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                Dtype::U8 => ColumnData::U8(raw),
            };
            blocks.push(ColumnBlock {
                name: spec.name.clone(),
                dims: spec.dims.clone(),
                data,
            });
        }
        Ok(blocks)
    }

    /// The episode's variation block, keyed per the layout.
    pub fn read_variation(&self, episode: u64) -> Result<Vec<(String, Vec<f64>)>, DataError> {
        let entry = self.entry(episode)?;
        let total = self.schema.variation_len();
        let mut raw = vec![0u8; total * 8];
        self.file.read_exact_at(&mut raw, entry.variation_offset)?;
        let mut values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut out = Vec::with_capacity(self.schema.variation_layout.len());
        for (key, n) in &self.schema.variation_layout {
            out.push((key.clone(), (0..*n).map(|_| values.next().unwrap()).collect()));
        }
        Ok(out)
    }

    pub fn inspect(&self) -> FileReport {
        let lengths: Vec<u32> = self.entries.iter().map(|e| e.steps).collect();
        let total_steps: u64 = lengths.iter().map(|&s| s as u64).sum();
        FileReport {
            episodes: self.entries.len() as u64,
            total_steps,
            min_steps: lengths.iter().copied().min().unwrap_or(0),
            max_steps: lengths.iter().copied().max().unwrap_or(0),
            mean_steps: if lengths.is_empty() {
                0.0
            } else {
                total_steps as f64 / lengths.len() as f64
            },
            columns: self
                .schema
                .columns
                .iter()
                .map(|c| ColumnReport {
                    name: c.name.clone(),
                    dtype: c.dtype.to_string(),
                    dims: c.dims.clone(),
                })
                .collect(),
            variation_keys: self
                .schema
                .variation_layout
                .iter()
                .map(|(k, _)| k.clone())
                .collect(),
            total_bytes: self.file_len,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ColumnReport {
    pub name: String,
    pub dtype: String,
    pub dims: Vec<u32>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct FileReport {
    pub episodes: u64,
    pub total_steps: u64,
    pub min_steps: u32,
    pub max_steps: u32,
    pub mean_steps: f64,
    pub columns: Vec<ColumnReport>,
    pub variation_keys: Vec<String>,
    pub total_bytes: u64,
}

impl std::fmt::Display for FileReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "episodes: {}  steps: {} (min {}, mean {:.2}, max {})  bytes: {}",
            self.episodes,
            self.total_steps,
            self.min_steps,
            self.mean_steps,
            self.max_steps,
            self.total_bytes
        )?;
        for col in &self.columns {
            writeln!(f, "  column {} {} {:?}", col.name, col.dtype, col.dims)?;
        }
        write!(f, "  variation: {}", self.variation_keys.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::make_rng;
    use std::time::Instant;

    fn demo_schema() -> TrajectorySchema {
        TrajectorySchema {
            columns: vec![
                ColumnSpec::new("state", Dtype::F32, &[3]),
                ColumnSpec::new("action", Dtype::I32, &[1]),
                ColumnSpec::new("terminated", Dtype::U8, &[1]),
            ],
            variation_layout: vec![("physics.k".into(), 1), ("agent.start".into(), 2)],
        }
    }

    fn demo_episode(steps: usize, salt: f32) -> EpisodeData {
        EpisodeData {
            variation: vec![salt as f64, 0.25, 0.75],
            columns: vec![
                ColumnData::F32((0..steps * 3).map(|i| salt + i as f32).collect()),
                ColumnData::I32((0..steps).map(|i| i as i32 % 5).collect()),
                ColumnData::U8((0..steps).map(|i| (i == steps - 1) as u8).collect()),
            ],
        }
    }

    #[test]
    fn a_round_trip_reproduces_every_byte_of_every_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demo.swmt");
        let episodes = [demo_episode(7, 0.5), demo_episode(13, 2.0), demo_episode(1, -3.0)];
        let mut writer = TrajectoryWriter::create(&path, demo_schema()).unwrap();
        for ep in &episodes {
            writer.append(ep).unwrap();
        }
        let summary = writer.finish().unwrap();
        assert_eq!(summary.episodes, 3);
        assert_eq!(summary.total_steps, 21);
        assert_eq!(summary.bytes, std::fs::metadata(&path).unwrap().len());

        let reader = TrajectoryReader::open(&path).unwrap();
        assert_eq!(reader.schema(), &demo_schema());
        for (e, ep) in episodes.iter().enumerate() {
            let steps = reader.episode_len(e as u64).unwrap();
            let blocks = reader.read_window(e as u64, 0, steps, None).unwrap();
            for (block, original) in blocks.iter().zip(&ep.columns) {
                assert_eq!(&block.data, original);
            }
            let variation = reader.read_variation(e as u64).unwrap();
            let flat: Vec<f64> = variation.iter().flat_map(|(_, v)| v.clone()).collect();
            assert_eq!(flat, ep.variation);
            assert_eq!(variation[0].0, "physics.k");
            assert_eq!(variation[1].0, "agent.start");
        }
    }

    #[test]
    fn random_windows_match_an_in_memory_reference() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fuzz.swmt");
        let episodes = [demo_episode(31, 1.0), demo_episode(4, 9.0), demo_episode(17, -1.0)];
        let mut writer = TrajectoryWriter::create(&path, demo_schema()).unwrap();
        for ep in &episodes {
            writer.append(ep).unwrap();
        }
        writer.finish().unwrap();
        let reader = TrajectoryReader::open(&path).unwrap();

        let mut rng = make_rng(17);
        for _ in 0..200 {
            let e = rng.choice(episodes.len());
            let steps = episodes[e].columns[1].len();
            let start = rng.choice(steps);
            let len = 1 + rng.choice(steps - start);
            let blocks = reader
                .read_window(e as u64, start as u32, len as u32, Some(&["action", "state"]))
                .unwrap();
            assert_eq!(blocks[0].name, "action");
            assert_eq!(blocks[1].name, "state");
            let want_actions = &episodes[e].columns[1].as_i32().unwrap()[start..start + len];
            assert_eq!(blocks[0].data.as_i32().unwrap(), want_actions);
            let want_state =
                &episodes[e].columns[0].as_f32().unwrap()[start * 3..(start + len) * 3];
            assert_eq!(blocks[1].data.as_f32().unwrap(), want_state);
        }
    }

    #[test]
    fn any_payload_byte_flip_fails_the_open() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flip.swmt");
        let mut writer = TrajectoryWriter::create(&path, demo_schema()).unwrap();
        writer.append(&demo_episode(20, 1.5)).unwrap();
        let summary = writer.finish().unwrap();

        let clean = std::fs::read(&path).unwrap();
        let payload_bytes = 3 * 8 + 20 * (3 * 4 + 4 + 1);
        let payload_start = summary.bytes as usize - 4 - payload_bytes;
        let mut rng = make_rng(4);
        for _ in 0..20 {
            let mut bad = clean.clone();
            let at = payload_start + rng.choice(payload_bytes);
            bad[at] ^= 0x10;
            std::fs::write(&path, &bad).unwrap();
            assert!(matches!(
                TrajectoryReader::open(&path),
                Err(DataError::ChecksumMismatch { .. })
            ));
        }
        std::fs::write(&path, &clean).unwrap();
        TrajectoryReader::open(&path).unwrap();
    }

    #[test]
    fn window_reads_cost_the_same_at_both_ends_of_a_long_episode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("long.swmt");
        let steps = 100_000usize;
        let mut writer = TrajectoryWriter::create(&path, demo_schema()).unwrap();
        writer.append(&demo_episode(steps, 0.0)).unwrap();
        writer.finish().unwrap();
        let reader = TrajectoryReader::open(&path).unwrap();

        let window = 16u32;
        let median = |at: u32| {
            let mut times: Vec<f64> = (0..101)
                .map(|_| {
                    let t0 = Instant::now();
                    let blocks = reader.read_window(0, at, window, None).unwrap();
                    assert_eq!(blocks[0].data.len(), window as usize * 3);
                    t0.elapsed().as_secs_f64()
                })
                .collect();
            times.sort_by(f64::total_cmp);
            times[times.len() / 2]
        };
        let near = median(0);
        let far = median(steps as u32 - window);
        let ratio = far.max(near) / near.min(far).max(1e-9);
        assert!(ratio < 2.0, "window latency ratio {ratio:.2} (near {near:.3e}, far {far:.3e})");
    }

    #[test]
    fn out_of_range_requests_name_the_episode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("range.swmt");
        let mut writer = TrajectoryWriter::create(&path, demo_schema()).unwrap();
        writer.append(&demo_episode(5, 1.0)).unwrap();
        writer.finish().unwrap();
        let reader = TrajectoryReader::open(&path).unwrap();

        let err = reader.read_window(0, 3, 4, None).unwrap_err();
        assert!(err.to_string().contains("episode 0"));
        assert!(matches!(err, DataError::WindowOutOfRange { steps: 5, .. }));
        assert!(matches!(
            reader.read_window(2, 0, 1, None),
            Err(DataError::NoSuchEpisode { episode: 2, count: 1 })
        ));
        assert!(matches!(
            reader.read_window(0, 0, 1, Some(&["reward"])),
            Err(DataError::UnknownColumn(_))
        ));
    }

    #[test]
    fn writers_reject_shape_and_layout_mismatches() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.swmt");
        let mut writer = TrajectoryWriter::create(&path, demo_schema()).unwrap();

        let mut wrong_steps = demo_episode(4, 0.0);
        wrong_steps.columns[1] = ColumnData::I32(vec![0; 3]);
        assert!(matches!(writer.append(&wrong_steps), Err(DataError::Schema(_))));

        let mut wrong_dtype = demo_episode(4, 0.0);
        wrong_dtype.columns[1] = ColumnData::F32(vec![0.0; 4]);
        assert!(matches!(writer.append(&wrong_dtype), Err(DataError::Schema(_))));

        let mut wrong_variation = demo_episode(4, 0.0);
        wrong_variation.variation.pop();
        assert!(matches!(writer.append(&wrong_variation), Err(DataError::Schema(_))));
    }

    #[test]
    fn inspect_totals_agree_with_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inspect.swmt");
        let mut writer = TrajectoryWriter::create(&path, demo_schema()).unwrap();
        for steps in [5usize, 9, 2] {
            writer.append(&demo_episode(steps, 0.5)).unwrap();
        }
        writer.finish().unwrap();
        let reader = TrajectoryReader::open(&path).unwrap();
        let report = reader.inspect();
        assert_eq!(report.episodes, 3);
        assert_eq!(report.total_steps, 16);
        assert_eq!(report.min_steps, 2);
        assert_eq!(report.max_steps, 9);
        assert!((report.mean_steps - 16.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.total_bytes, std::fs::metadata(&path).unwrap().len());
        assert_eq!(report.variation_keys, vec!["physics.k", "agent.start"]);
    }

    #[test]
    fn junk_and_stale_versions_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.swmt");
        std::fs::write(&junk, b"JUNKJUNKJUNK").unwrap();
        assert!(matches!(TrajectoryReader::open(&junk), Err(DataError::BadMagic)));

        let stale = dir.path().join("stale.swmt");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&7u16.to_le_bytes());
        std::fs::write(&stale, &bytes).unwrap();
        assert!(matches!(
            TrajectoryReader::open(&stale),
            Err(DataError::BadVersion(7))
        ));

        let short = dir.path().join("short.swmt");
        std::fs::write(&short, b"SW").unwrap();
        assert!(matches!(TrajectoryReader::open(&short), Err(DataError::Truncated)));
    }
}
