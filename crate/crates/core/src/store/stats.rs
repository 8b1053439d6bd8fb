use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

/// Byte and file counters for one read session. Safe to share across threads.
#[derive(Debug, Default)]
pub struct IoStats {
    bytes_read: AtomicU64,
    files_opened: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IoSnapshot {
    pub bytes_read: u64,
    pub files_opened: u64,
}

impl IoStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes_read(&self) -> u64 {
        self.bytes_read.load(Ordering::Relaxed)
    }

    pub fn files_opened(&self) -> u64 {
        self.files_opened.load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> IoSnapshot {
        IoSnapshot {
            bytes_read: self.bytes_read(),
            files_opened: self.files_opened(),
        }
    }

    pub(crate) fn add_bytes(&self, n: u64) {
        self.bytes_read.fetch_add(n, Ordering::Relaxed);
    }

    pub(crate) fn open(&self, path: &Path) -> std::io::Result<File> {
        let f = File::open(path)?;
        self.files_opened.fetch_add(1, Ordering::Relaxed);
        Ok(f)
    }

    /// Reads a whole file, counting one open and every byte.
    pub(crate) fn read_file(&self, path: &Path) -> std::io::Result<Vec<u8>> {
        let mut f = self.open(path)?;
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)?;
        self.add_bytes(buf.len() as u64);
        Ok(buf)
    }
}

/// `Read` adapter that counts bytes into an [`IoStats`].
pub(crate) struct CountingReader<'a, R> {
    pub inner: R,
    pub stats: &'a IoStats,
}

impl<R: Read> Read for CountingReader<'_, R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.stats.add_bytes(n as u64);
        Ok(n)
    }
}
