//! Content-addressed snapshots of a workspace's tracked files, used to roll
//! back abandoned lifts. Blobs live in a run-local store keyed by content
//! hash; no external version-control tool is involved.

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot io on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("snapshot {id} is missing blob {hash} for {path}")]
    MissingBlob {
        id: String,
        hash: String,
        path: PathBuf,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SnapshotError + '_ {
    move |source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Files that participate in snapshots and digests: Rust sources plus the
/// manifest and lockfile. Build artifacts under `target/` are untracked, so
/// restores leave them alone. Paths are workspace-relative and sorted.
pub fn tracked_files(root: &Path) -> Result<Vec<PathBuf>, SnapshotError> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root) {
        let entry = entry.map_err(|e| SnapshotError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf()),
            source: e.into_io_error().unwrap_or_else(|| io::Error::other("walk failed")),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walker stays under root")
            .to_path_buf();
        if rel.components().any(|c| c.as_os_str() == "target" || c.as_os_str() == ".git") {
            continue;
        }
        let name = rel.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let is_rust = rel.extension().is_some_and(|x| x == "rs");
        if is_rust || name == "Cargo.toml" || name == "Cargo.lock" {
            files.push(rel);
        }
    }
    files.sort();
    Ok(files)
}

/// A point-in-time manifest: tracked path -> content hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub id: String,
    pub manifest: BTreeMap<PathBuf, String>,
}

/// Blob store backing snapshots. Taking a snapshot copies every tracked
/// file's bytes into the store under their hash; restoring writes those
/// bytes back and deletes tracked files the snapshot does not know.
#[derive(Debug)]
pub struct SnapshotStore {
    dir: PathBuf,
    counter: u64,
}

impl SnapshotStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SnapshotStore {
            dir: dir.into(),
            counter: 0,
        }
    }

    fn blob_path(&self, hash: &str) -> PathBuf {
        self.dir.join("blobs").join(hash)
    }

    pub fn take(&mut self, root: &Path) -> Result<Snapshot, SnapshotError> {
        let blobs = self.dir.join("blobs");
        std::fs::create_dir_all(&blobs).map_err(io_err(&blobs))?;
        self.counter += 1;
        let mut manifest = BTreeMap::new();
        for rel in tracked_files(root)? {
            let abs = root.join(&rel);
            let bytes = std::fs::read(&abs).map_err(io_err(&abs))?;
            let hash = hex_digest(&bytes);
            let blob = self.blob_path(&hash);
            if !blob.exists() {
                std::fs::write(&blob, &bytes).map_err(io_err(&blob))?;
            }
            manifest.insert(rel, hash);
        }
        Ok(Snapshot {
            id: format!("snap_{:04}", self.counter),
            manifest,
        })
    }

    /// Put every tracked file back to its snapshot content. Files already
    /// matching their hash are left untouched (keeps rebuilds incremental);
    /// tracked files created after the snapshot are removed.
    pub fn restore(&self, root: &Path, snapshot: &Snapshot) -> Result<(), SnapshotError> {
        for rel in tracked_files(root)? {
            if !snapshot.manifest.contains_key(&rel) {
                let abs = root.join(&rel);
                std::fs::remove_file(&abs).map_err(io_err(&abs))?;
            }
        }
        for (rel, hash) in &snapshot.manifest {
            let abs = root.join(rel);
            if let Ok(bytes) = std::fs::read(&abs) {
                if hex_digest(&bytes) == *hash {
                    continue;
                }
            }
            let blob = self.blob_path(hash);
            let bytes = std::fs::read(&blob).map_err(|_| SnapshotError::MissingBlob {
                id: snapshot.id.clone(),
                hash: hash.clone(),
                path: rel.clone(),
            })?;
            if let Some(parent) = abs.parent() {
                std::fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            std::fs::write(&abs, bytes).map_err(io_err(&abs))?;
        }
        Ok(())
    }
}

/// One hash over all tracked files (paths and contents), for cheap
/// "workspace unchanged" comparisons.
pub fn workspace_digest(root: &Path) -> Result<String, SnapshotError> {
    let mut hasher = Sha256::new();
    for rel in tracked_files(root)? {
        let abs = root.join(&rel);
        let bytes = std::fs::read(&abs).map_err(io_err(&abs))?;
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update([0u8]);
        hasher.update(hex_digest(&bytes).as_bytes());
        hasher.update([0u8]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

fn hex_digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
