//! Append-only write-ahead journal of [`Event`]s, one JSON object per line.
//!
//! An event is committed once its line, including the trailing newline, is
//! on disk. On open, a trailing partial line (a write torn by a crash) is
//! dropped and the file truncated back to the last committed event.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;

use crate::error::CurationError;
use crate::state::Event;

pub trait Journal: Send + Sync {
    fn append(&self, event: &Event) -> Result<(), CurationError>;
}

/// Keeps nothing; state lives only in memory.
#[derive(Debug, Default)]
pub struct NullJournal;

impl Journal for NullJournal {
    fn append(&self, _event: &Event) -> Result<(), CurationError> {
        Ok(())
    }
}

#[derive(Debug)]
pub struct FileJournal {
    path: PathBuf,
    inner: Mutex<JournalFile>,
    sync: bool,
}

#[derive(Debug)]
struct JournalFile {
    file: File,
    len: u64,
}

impl FileJournal {
    /// Opens (or creates) the journal and returns the committed events.
    /// `sync` forces an fsync after every append.
    pub fn open(path: impl AsRef<Path>, sync: bool) -> Result<(Self, Vec<Event>), CurationError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let mut events = Vec::new();
        let mut committed = 0usize;
        let mut line_no = 0usize;
        while let Some(nl) = bytes[committed..].iter().position(|&b| b == b'\n') {
            line_no += 1;
            let line = &bytes[committed..committed + nl];
            if !line.iter().all(u8::is_ascii_whitespace) {
                let event: Event = serde_json::from_slice(line).map_err(|e| {
                    CurationError::Storage(format!(
                        "{}: corrupt journal line {line_no}: {e}",
                        path.display()
                    ))
                })?;
                events.push(event);
            }
            committed += nl + 1;
        }
        if committed < bytes.len() {
            log_torn_tail(&path, bytes.len() - committed);
            file.set_len(committed as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::Start(committed as u64))?;
        Ok((
            Self {
                path,
                inner: Mutex::new(JournalFile {
                    file,
                    len: committed as u64,
                }),
                sync,
            },
            events,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn log_torn_tail(path: &Path, bytes: usize) {
    eprintln!(
        "journal {}: dropping {bytes} bytes of an uncommitted trailing write",
        path.display()
    );
}

impl Journal for FileJournal {
    fn append(&self, event: &Event) -> Result<(), CurationError> {
        let mut line = serde_json::to_vec(event)
            .map_err(|e| CurationError::Storage(format!("serializing event: {e}")))?;
        line.push(b'\n');
        let mut inner = self.inner.lock();
        let start = inner.len;
        let written = inner.file.write_all(&line).and_then(|_| {
            if self.sync {
                inner.file.sync_data()
            } else {
                inner.file.flush()
            }
        });
        match written {
            Ok(()) => {
                inner.len = start + line.len() as u64;
                Ok(())
            }
            Err(e) => {
                // Roll back a partial line so later appends stay parseable.
                let _ = inner.file.set_len(start);
                let _ = inner.file.seek(SeekFrom::Start(start));
                Err(e.into())
            }
        }
    }
}
