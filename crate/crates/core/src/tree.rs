//! In-memory file trees.
//!
//! A [`FileTree`] maps `/`-separated relative paths to file contents. It is the
//! unit every stage works on: fetched sources, patch overlays, installed
//! environments and the final layout are all trees.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Component, Path};

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("path {0:?} is not a normalized relative path")]
    InvalidPath(String),
}

/// Ordered mapping of relative paths to file contents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FileTree {
    files: BTreeMap<String, Vec<u8>>,
}

/// Returns true if `path` is a non-empty relative path with no `.`/`..`
/// components, no empty segments and no leading or trailing slash.
pub fn is_normalized_path(path: &str) -> bool {
    !path.is_empty()
        && !path.starts_with('/')
        && path
            .split('/')
            .all(|seg| !seg.is_empty() && seg != "." && seg != "..")
}

impl FileTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads every regular file below `dir`. Symlinks are followed.
    pub fn from_dir(dir: &Path) -> Result<Self, TreeError> {
        let mut tree = FileTree::new();
        for entry in walkdir::WalkDir::new(dir)
            .follow_links(true)
            .sort_by_file_name()
        {
            let entry = entry.map_err(|e| TreeError::Read {
                path: e
                    .path()
                    .unwrap_or(dir)
                    .display()
                    .to_string(),
                source: e.into(),
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(dir)
                .expect("walkdir yields children of its root");
            let key = relative_key(rel)
                .ok_or_else(|| TreeError::InvalidPath(rel.display().to_string()))?;
            let bytes = fs::read(entry.path()).map_err(|source| TreeError::Read {
                path: entry.path().display().to_string(),
                source,
            })?;
            tree.files.insert(key, bytes);
        }
        Ok(tree)
    }

    /// Writes the tree below `dir`, creating parent directories as needed.
    pub fn write_to(&self, dir: &Path) -> Result<(), TreeError> {
        for (rel, bytes) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|source| TreeError::Write {
                    path: parent.display().to_string(),
                    source,
                })?;
            }
            fs::write(&path, bytes).map_err(|source| TreeError::Write {
                path: path.display().to_string(),
                source,
            })?;
        }
        Ok(())
    }

    /// Inserts a file, returning the previous contents if any.
    ///
    /// Panics if `path` is not normalized; callers validate untrusted paths
    /// with [`is_normalized_path`] first.
    pub fn insert(&mut self, path: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Option<Vec<u8>> {
        let path = path.into();
        assert!(is_normalized_path(&path), "bad tree path {path:?}");
        self.files.insert(path, bytes.into())
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files.get(path).map(Vec::as_slice)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.files.contains_key(path)
    }

    pub fn remove(&mut self, path: &str) -> Option<Vec<u8>> {
        self.files.remove(path)
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[u8])> {
        self.files.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// Copies every file of `other` below `prefix`, overwriting existing files.
    pub fn graft(&mut self, prefix: &str, other: &FileTree) {
        for (path, bytes) in other.iter() {
            self.files.insert(join(prefix, path), bytes.to_vec());
        }
    }

    /// Returns the files below `prefix`, with the prefix stripped.
    pub fn subtree(&self, prefix: &str) -> FileTree {
        let dir = format!("{}/", prefix.trim_end_matches('/'));
        let files = self
            .files
            .range(dir.clone()..)
            .take_while(|(k, _)| k.starts_with(&dir))
            .map(|(k, v)| (k[dir.len()..].to_string(), v.clone()))
            .collect();
        FileTree { files }
    }

    /// True if some file lives at or below `prefix`.
    pub fn has_dir(&self, prefix: &str) -> bool {
        let dir = format!("{}/", prefix.trim_end_matches('/'));
        self.files
            .range(dir.clone()..)
            .next()
            .is_some_and(|(k, _)| k.starts_with(&dir))
    }

    /// Lines of `<sha256> <path>`, sorted by path.
    pub fn digest_manifest(&self) -> String {
        let mut out = String::new();
        for (path, bytes) in &self.files {
            out.push_str(&sha256_hex(bytes));
            out.push(' ');
            out.push_str(path);
            out.push('\n');
        }
        out
    }
}

impl<K: Into<String>, V: Into<Vec<u8>>> FromIterator<(K, V)> for FileTree {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        let mut tree = FileTree::new();
        for (k, v) in iter {
            tree.insert(k, v);
        }
        tree
    }
}

pub fn join(prefix: &str, path: &str) -> String {
    let prefix = prefix.trim_end_matches('/');
    if prefix.is_empty() {
        path.to_string()
    } else {
        format!("{prefix}/{path}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn relative_key(rel: &Path) -> Option<String> {
    let mut parts = Vec::new();
    for comp in rel.components() {
        match comp {
            Component::Normal(s) => parts.push(s.to_str()?.to_string()),
            _ => return None,
        }
    }
    let key = parts.join("/");
    is_normalized_path(&key).then_some(key)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subtree_strips_prefix_and_ignores_siblings() {
        let tree: FileTree = [
            ("a/x", "1"),
            ("a/y/z", "2"),
            ("ab/q", "3"),
            ("a", "4"),
        ]
        .into_iter()
        .collect();
        let sub = tree.subtree("a");
        assert_eq!(sub.paths().collect::<Vec<_>>(), vec!["x", "y/z"]);
        assert!(tree.has_dir("a/y"));
        assert!(!tree.has_dir("a/x"));
    }

    #[test]
    fn disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let tree: FileTree = [("bin/tool", "#!/bin/sh\n"), ("lib/m.py", "x = 1\n")]
            .into_iter()
            .collect();
        tree.write_to(dir.path()).unwrap();
        assert_eq!(FileTree::from_dir(dir.path()).unwrap(), tree);
    }

    #[test]
    fn normalized_paths() {
        assert!(is_normalized_path("a/b.txt"));
        for bad in ["", "/a", "a//b", "a/../b", "./a", "a/"] {
            assert!(!is_normalized_path(bad), "{bad}");
        }
    }
}
