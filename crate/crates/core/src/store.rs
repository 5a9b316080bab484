//! Core descriptor data types and the VDSC on-disk format.
//!
//! A [`DescriptorSet`] holds one video's frame descriptors: an `n x d` f32
//! matrix plus per-frame timestamps. A [`Corpus`] is a collection of sets
//! sharing one descriptor dimension. The VDSC format is bit-exact: matrix
//! and timestamp payloads are 32-bit little-endian floats with no padding,
//! so a write/read round-trip reproduces every payload bit.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use thiserror::Error;

pub const MAX_DIM: usize = 512;
pub const VDSC_MAGIC: [u8; 4] = *b"VDSC";
pub const VDSC_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {found}, expected {expected}")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("truncated payload while reading {context}")]
    Truncated { context: &'static str },
    #[error("non-finite entry in video {video_id} at frame {frame}")]
    NonFinite { video_id: String, frame: usize },
    #[error("non-finite timestamp in video {video_id} at frame {frame}")]
    NonFiniteTimestamp { video_id: String, frame: usize },
    #[error("descriptor dim {dim} outside 1..={MAX_DIM}")]
    DimOutOfRange { dim: usize },
    #[error("video {video_id} has no frames")]
    EmptySet { video_id: String },
    #[error("video {video_id} has {timestamps} timestamps for {frames} frames")]
    TimestampCountMismatch {
        video_id: String,
        timestamps: usize,
        frames: usize,
    },
    #[error("timestamps of video {video_id} decrease at frame {frame}")]
    UnsortedTimestamps { video_id: String, frame: usize },
    #[error("duplicate video id {video_id}")]
    DuplicateVideoId { video_id: String },
    #[error("corpus dim is {expected} but video {video_id} has dim {found}")]
    MixedDims {
        video_id: String,
        expected: usize,
        found: usize,
    },
    #[error("video id of {len} bytes exceeds the u16 length field")]
    IdTooLong { len: usize },
    #[error("video id is not valid UTF-8")]
    IdNotUtf8,
}

/// Which side of the detection task a corpus plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorpusRole {
    Query,
    Reference,
    Noise,
}

impl CorpusRole {
    pub fn as_str(self) -> &'static str {
        match self {
            CorpusRole::Query => "query",
            CorpusRole::Reference => "reference",
            CorpusRole::Noise => "noise",
        }
    }
}

/// One video's frame descriptors: non-decreasing timestamps (seconds) and an
/// `n x d` matrix with one row per frame. Repeated timestamps are legal; they
/// arise when multiple crop views of the same frame are stored as extra rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    video_id: String,
    timestamps: Vec<f32>,
    matrix: Array2<f32>,
}

impl DescriptorSet {
    pub fn new(
        video_id: String,
        timestamps: Vec<f32>,
        matrix: Array2<f32>,
    ) -> Result<Self, StoreError> {
        let set = DescriptorSet {
            video_id,
            timestamps,
            matrix,
        };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<(), StoreError> {
        let (n, d) = self.matrix.dim();
        if n == 0 {
            return Err(StoreError::EmptySet {
                video_id: self.video_id.clone(),
            });
        }
        if d == 0 || d > MAX_DIM {
            return Err(StoreError::DimOutOfRange { dim: d });
        }
        if self.timestamps.len() != n {
            return Err(StoreError::TimestampCountMismatch {
                video_id: self.video_id.clone(),
                timestamps: self.timestamps.len(),
                frames: n,
            });
        }
        for (i, &t) in self.timestamps.iter().enumerate() {
            if !t.is_finite() {
                return Err(StoreError::NonFiniteTimestamp {
                    video_id: self.video_id.clone(),
                    frame: i,
                });
            }
            if i > 0 && t < self.timestamps[i - 1] {
                return Err(StoreError::UnsortedTimestamps {
                    video_id: self.video_id.clone(),
                    frame: i,
                });
            }
        }
        for (i, row) in self.matrix.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(StoreError::NonFinite {
                    video_id: self.video_id.clone(),
                    frame: i,
                });
            }
        }
        Ok(())
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn timestamps(&self) -> &[f32] {
        &self.timestamps
    }

    pub fn matrix(&self) -> &Array2<f32> {
        &self.matrix
    }

    pub fn n_frames(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Same video, new descriptor payload. Timestamps carry over; the new
    /// matrix must keep the frame count and stay finite.
    pub fn with_matrix(&self, matrix: Array2<f32>) -> Result<Self, StoreError> {
        DescriptorSet::new(self.video_id.clone(), self.timestamps.clone(), matrix)
    }

    /// Rename without touching payloads (used when per-view sets carry
    /// suffixed ids on disk).
    pub fn with_video_id(&self, video_id: String) -> Self {
        DescriptorSet {
            video_id,
            timestamps: self.timestamps.clone(),
            matrix: self.matrix.clone(),
        }
    }
}

/// An ordered collection of descriptor sets with unique video ids and a
/// shared descriptor dimension. Iteration order is insertion order, which
/// for loaded corpora is file order.
#[derive(Debug, Clone)]
pub struct Corpus {
    role: CorpusRole,
    sets: Vec<DescriptorSet>,
    by_id: HashMap<String, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.role == other.role && self.sets == other.sets
    }
}

impl Corpus {
    pub fn new(role: CorpusRole) -> Self {
        Corpus {
            role,
            sets: Vec::new(),
            by_id: HashMap::new(),
        }
    }

    pub fn from_sets(role: CorpusRole, sets: Vec<DescriptorSet>) -> Result<Self, StoreError> {
        let mut corpus = Corpus::new(role);
        for set in sets {
            corpus.push(set)?;
        }
        Ok(corpus)
    }

    pub fn push(&mut self, set: DescriptorSet) -> Result<(), StoreError> {
        set.validate()?;
        if let Some(d) = self.dim() {
            if set.dim() != d {
                return Err(StoreError::MixedDims {
                    video_id: set.video_id.clone(),
                    expected: d,
                    found: set.dim(),
                });
            }
        }
        if self.by_id.contains_key(&set.video_id) {
            return Err(StoreError::DuplicateVideoId {
                video_id: set.video_id.clone(),
            });
        }
        self.by_id.insert(set.video_id.clone(), self.sets.len());
        self.sets.push(set);
        Ok(())
    }

    pub fn role(&self) -> CorpusRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Shared descriptor dimension, or `None` for an empty corpus.
    pub fn dim(&self) -> Option<usize> {
        self.sets.first().map(|s| s.dim())
    }

    pub fn get(&self, video_id: &str) -> Option<&DescriptorSet> {
        self.by_id.get(video_id).map(|&i| &self.sets[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &DescriptorSet> {
        self.sets.iter()
    }

    pub fn total_frames(&self) -> usize {
        self.sets.iter().map(|s| s.n_frames()).sum()
    }

    /// Rebuild with the same sets under a different role tag.
    pub fn with_role(mut self, role: CorpusRole) -> Self {
        self.role = role;
        self
    }
}

pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<(), StoreError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_corpus_to(corpus, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_corpus_to<W: Write>(corpus: &Corpus, w: &mut W) -> Result<(), StoreError> {
    w.write_all(&VDSC_MAGIC)?;
    w.write_u32::<LittleEndian>(VDSC_VERSION)?;
    w.write_u32::<LittleEndian>(corpus.dim().unwrap_or(0) as u32)?;
    w.write_u32::<LittleEndian>(corpus.len() as u32)?;
    for set in corpus.iter() {
        let id = set.video_id.as_bytes();
        if id.len() > u16::MAX as usize {
            return Err(StoreError::IdTooLong { len: id.len() });
        }
        w.write_u16::<LittleEndian>(id.len() as u16)?;
        w.write_all(id)?;
        w.write_u32::<LittleEndian>(set.n_frames() as u32)?;
        for &t in &set.timestamps {
            w.write_f32::<LittleEndian>(t)?;
        }
        // Row-major payload; the matrix is stored in standard layout.
        for &v in set.matrix.iter() {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

pub fn read_corpus(path: &Path, role: CorpusRole) -> Result<Corpus, StoreError> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    read_corpus_from(&mut r, role)
}

fn eof_as_truncated(e: io::Error, context: &'static str) -> StoreError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        StoreError::Truncated { context }
    } else {
        StoreError::Io(e)
    }
}

pub(crate) fn read_exact_ctx<R: Read>(
    r: &mut R,
    buf: &mut [u8],
    context: &'static str,
) -> Result<(), StoreError> {
    r.read_exact(buf).map_err(|e| eof_as_truncated(e, context))
}

pub(crate) fn read_u16_ctx<R: Read>(r: &mut R, context: &'static str) -> Result<u16, StoreError> {
    r.read_u16::<LittleEndian>()
        .map_err(|e| eof_as_truncated(e, context))
}

pub(crate) fn read_u32_ctx<R: Read>(r: &mut R, context: &'static str) -> Result<u32, StoreError> {
    r.read_u32::<LittleEndian>()
        .map_err(|e| eof_as_truncated(e, context))
}

pub(crate) fn read_f32_vec_ctx<R: Read>(
    r: &mut R,
    len: usize,
    context: &'static str,
) -> Result<Vec<f32>, StoreError> {
    let mut out = vec![0f32; len];
    r.read_f32_into::<LittleEndian>(&mut out)
        .map_err(|e| eof_as_truncated(e, context))?;
    Ok(out)
}

pub fn read_corpus_from<R: Read>(r: &mut R, role: CorpusRole) -> Result<Corpus, StoreError> {
    let mut magic = [0u8; 4];
    read_exact_ctx(r, &mut magic, "magic")?;
    if magic != VDSC_MAGIC {
        return Err(StoreError::BadMagic {
            expected: VDSC_MAGIC,
            found: magic,
        });
    }
    let version = read_u32_ctx(r, "version")?;
    if version != VDSC_VERSION {
        return Err(StoreError::VersionMismatch {
            expected: VDSC_VERSION,
            found: version,
        });
    }
    let dim = read_u32_ctx(r, "dim")? as usize;
    let count = read_u32_ctx(r, "video count")? as usize;
    let mut corpus = Corpus::new(role);
    for _ in 0..count {
        let id_len = read_u16_ctx(r, "video id length")? as usize;
        let mut id_bytes = vec![0u8; id_len];
        read_exact_ctx(r, &mut id_bytes, "video id")?;
        let video_id = String::from_utf8(id_bytes).map_err(|_| StoreError::IdNotUtf8)?;
        let n = read_u32_ctx(r, "frame count")? as usize;
        let timestamps = read_f32_vec_ctx(r, n, "timestamps")?;
        let values = read_f32_vec_ctx(r, n * dim, "matrix")?;
        let matrix = Array2::from_shape_vec((n, dim), values)
            .expect("shape matches the vector length by construction");
        let set = DescriptorSet::new(video_id, timestamps, matrix)?;
        corpus.push(set)?;
    }
    Ok(corpus)
}
