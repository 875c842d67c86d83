//! Local-disk stand-in for a distributed file system.
//!
//! Files live at `<root>/<iteration>/<kind>-<partition>.bin`. Each file is
//! a 5-byte header (`IGDF` + format version) followed by length-prefixed
//! records: a LEB128 varint byte length, then the record bytes. The read
//! and write counters track exact file bytes moved.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use super::CostModel;
use crate::codec::{put_varint, varint_len, CodecError, Wire};

pub const MAGIC: &[u8; 4] = b"IGDF";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: u64 = 5;

#[derive(Debug, Error)]
pub enum DfsError {
    #[error("missing DFS file {0}")]
    Missing(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt record in {path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: CodecError,
    },
    #[error("{0} is not a DFS file or has an unsupported version")]
    BadHeader(PathBuf),
    #[error("concurrent write to {0}")]
    ConcurrentWrite(PathBuf),
}

/// Address of one DFS file.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DfsFile {
    pub iteration: usize,
    pub kind: String,
    pub partition: usize,
}

impl DfsFile {
    pub fn new(iteration: usize, kind: impl Into<String>, partition: usize) -> Self {
        Self {
            iteration,
            kind: kind.into(),
            partition,
        }
    }

    pub fn relative_path(&self) -> PathBuf {
        PathBuf::from(self.iteration.to_string()).join(format!("{}-{}.bin", self.kind, self.partition))
    }
}

#[derive(Debug, Default)]
struct Counters {
    read: AtomicU64,
    written: AtomicU64,
}

#[derive(Debug)]
pub struct SimulatedDfs {
    root: PathBuf,
    counters: Arc<Counters>,
    cost: CostModel,
    open_writes: Arc<Mutex<HashSet<PathBuf>>>,
}

impl SimulatedDfs {
    pub fn new(root: impl Into<PathBuf>, cost: CostModel) -> Result<Self, DfsError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| DfsError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(Self {
            root,
            counters: Arc::default(),
            cost,
            open_writes: Arc::default(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, file: &DfsFile) -> PathBuf {
        self.root.join(file.relative_path())
    }

    pub fn read_bytes(&self) -> u64 {
        self.counters.read.load(Ordering::Acquire)
    }

    pub fn write_bytes(&self) -> u64 {
        self.counters.written.load(Ordering::Acquire)
    }

    pub fn exists(&self, file: &DfsFile) -> bool {
        self.path(file).is_file()
    }

    /// Opens a streaming writer. Two live writers on one file are an error.
    pub fn create(&self, file: &DfsFile) -> Result<RecordWriter, DfsError> {
        let path = self.path(file);
        if !self.open_writes.lock().expect("dfs lock").insert(path.clone()) {
            return Err(DfsError::ConcurrentWrite(path));
        }
        let guard = WriteGuard {
            path: path.clone(),
            open_writes: Arc::clone(&self.open_writes),
        };
        let io_err = |source| DfsError::Io {
            path: path.clone(),
            source,
        };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
        let mut out = BufWriter::with_capacity(1 << 16, File::create(&path).map_err(io_err)?);
        out.write_all(MAGIC).map_err(io_err)?;
        out.write_all(&[FORMAT_VERSION]).map_err(io_err)?;
        Ok(RecordWriter {
            out,
            bytes: HEADER_LEN,
            records: 0,
            scratch: Vec::new(),
            prefix: Vec::with_capacity(10),
            counters: Arc::clone(&self.counters),
            cost: self.cost,
            _guard: guard,
        })
    }

    pub fn open(&self, file: &DfsFile) -> Result<RecordReader, DfsError> {
        let path = self.path(file);
        let handle = File::open(&path).map_err(|source| {
            if source.kind() == io::ErrorKind::NotFound {
                DfsError::Missing(path.clone())
            } else {
                DfsError::Io {
                    path: path.clone(),
                    source,
                }
            }
        })?;
        let mut input = BufReader::with_capacity(1 << 16, handle);
        let mut header = [0u8; HEADER_LEN as usize];
        input
            .read_exact(&mut header)
            .map_err(|_| DfsError::BadHeader(path.clone()))?;
        if &header[..4] != MAGIC || header[4] != FORMAT_VERSION {
            return Err(DfsError::BadHeader(path));
        }
        Ok(RecordReader {
            input,
            path,
            bytes: HEADER_LEN,
            counters: Arc::clone(&self.counters),
            cost: self.cost,
        })
    }

    /// Writes all records to a new file; returns the file's byte length.
    pub fn write_records<'a, R, I>(&self, file: &DfsFile, records: I) -> Result<u64, DfsError>
    where
        R: Wire + 'a,
        I: IntoIterator<Item = &'a R>,
    {
        let mut w = self.create(file)?;
        for r in records {
            w.append(r)?;
        }
        w.finish()
    }

    pub fn read_records<R: Wire>(&self, file: &DfsFile) -> Result<Vec<R>, DfsError> {
        let mut reader = self.open(file)?;
        let mut out = Vec::new();
        while let Some(r) = reader.next_record()? {
            out.push(r);
        }
        Ok(out)
    }

    /// Deletes a file if present; counters are unaffected.
    pub fn remove(&self, file: &DfsFile) -> Result<(), DfsError> {
        let path = self.path(file);
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(source) => Err(DfsError::Io { path, source }),
        }
    }

    /// Removes a whole iteration directory.
    pub fn remove_iteration(&self, iteration: usize) -> Result<(), DfsError> {
        let path = self.root.join(iteration.to_string());
        match fs::remove_dir_all(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(source) => Err(DfsError::Io { path, source }),
        }
    }
}

#[derive(Debug)]
struct WriteGuard {
    path: PathBuf,
    open_writes: Arc<Mutex<HashSet<PathBuf>>>,
}

impl Drop for WriteGuard {
    fn drop(&mut self) {
        if let Ok(mut set) = self.open_writes.lock() {
            set.remove(&self.path);
        }
    }
}

#[derive(Debug)]
pub struct RecordWriter {
    out: BufWriter<File>,
    bytes: u64,
    records: u64,
    scratch: Vec<u8>,
    prefix: Vec<u8>,
    counters: Arc<Counters>,
    cost: CostModel,
    _guard: WriteGuard,
}

impl RecordWriter {
    pub fn append<R: Wire>(&mut self, record: &R) -> Result<(), DfsError> {
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.clear();
        record.encode(&mut scratch);
        let result = self.append_raw(&scratch);
        self.scratch = scratch;
        result
    }

    /// Appends pre-encoded record bytes.
    pub fn append_raw(&mut self, record: &[u8]) -> Result<(), DfsError> {
        self.prefix.clear();
        put_varint(&mut self.prefix, record.len() as u64);
        self.out
            .write_all(&self.prefix)
            .and_then(|_| self.out.write_all(record))
            .map_err(|source| DfsError::Io {
                path: self._guard.path.clone(),
                source,
            })?;
        self.bytes += (varint_len(record.len() as u64) + record.len()) as u64;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    /// Flushes and closes the file; returns its byte length.
    pub fn finish(mut self) -> Result<u64, DfsError> {
        self.out.flush().map_err(|source| DfsError::Io {
            path: self._guard.path.clone(),
            source,
        })?;
        self.counters.written.fetch_add(self.bytes, Ordering::AcqRel);
        self.cost.charge_disk(self.bytes);
        Ok(self.bytes)
    }
}

#[derive(Debug)]
pub struct RecordReader {
    input: BufReader<File>,
    path: PathBuf,
    bytes: u64,
    counters: Arc<Counters>,
    cost: CostModel,
}

impl RecordReader {
    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Reads the next record's bytes into `buf`; `false` at end of file.
    pub fn next_raw(&mut self, buf: &mut Vec<u8>) -> Result<bool, DfsError> {
        let mut len: u64 = 0;
        let mut shift = 0;
        let mut prefix_len = 0;
        loop {
            let mut byte = [0u8; 1];
            match self.input.read(&mut byte) {
                Ok(0) if prefix_len == 0 => return Ok(false),
                Ok(0) => {
                    return Err(self.codec_error(CodecError::Truncated { needed: 1 }));
                }
                Ok(_) => {}
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(source) => {
                    return Err(DfsError::Io {
                        path: self.path.clone(),
                        source,
                    })
                }
            }
            prefix_len += 1;
            len |= u64::from(byte[0] & 0x7f) << shift;
            if byte[0] & 0x80 == 0 {
                break;
            }
            shift += 7;
            if shift >= 70 {
                return Err(self.codec_error(CodecError::VarintOverflow));
            }
        }
        buf.clear();
        buf.resize(len as usize, 0);
        self.input.read_exact(buf).map_err(|source| {
            if source.kind() == io::ErrorKind::UnexpectedEof {
                self.codec_error(CodecError::Truncated { needed: len as usize })
            } else {
                DfsError::Io {
                    path: self.path.clone(),
                    source,
                }
            }
        })?;
        self.bytes += prefix_len + len;
        Ok(true)
    }

    pub fn next_record<R: Wire>(&mut self) -> Result<Option<R>, DfsError> {
        let mut buf = Vec::new();
        if !self.next_raw(&mut buf)? {
            return Ok(None);
        }
        R::from_bytes(&buf).map(Some).map_err(|e| self.codec_error(e))
    }

    pub fn codec_error(&self, source: CodecError) -> DfsError {
        DfsError::Codec {
            path: self.path.clone(),
            source,
        }
    }
}

impl Drop for RecordReader {
    fn drop(&mut self) {
        self.counters.read.fetch_add(self.bytes, Ordering::AcqRel);
        self.cost.charge_disk(self.bytes);
    }
}
