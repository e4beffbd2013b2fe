//! Offline stand-ins for package indexes and git hosts.
//!
//! On disk a registry looks like
//!
//! ```text
//! registry/<py|js>/<name>/<version>/meta
//! registry/<py|js>/<name>/<version>/files/...
//! ```
//!
//! where `meta` is line oriented:
//!
//! ```text
//! # comment
//! requires: numpy>=1.24
//! entrypoint: garak:bin/garak
//! ```
//!
//! and `files/` is the install image copied into the environment. A git store
//! holds one tree per pinned commit at `gitstore/<url-key>/<commit>/`, with
//! `url-key` from [`url_key`].

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::manifest::{is_commit_hash, Ecosystem, Entrypoint};
use crate::tree::{sha256_hex, FileTree, TreeError};
use crate::verspec::{normalize_name, parse_requirement, parse_version, AvailableVersions, Requirement, Version};

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

fn invalid(path: &Path, message: impl Into<String>) -> SourceError {
    SourceError::Invalid { path: path.display().to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PackageRecord {
    pub files: FileTree,
    pub requirements: Vec<Requirement>,
    pub entrypoints: Vec<Entrypoint>,
}

impl PackageRecord {
    /// Parses the `meta` format described in the module docs.
    pub fn parse_meta(text: &str, files: FileTree) -> Result<Self, String> {
        let mut rec = PackageRecord { files, ..Default::default() };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| format!("line {}: expected `key: value`", i + 1))?;
            let value = value.trim();
            match key.trim() {
                "requires" => rec
                    .requirements
                    .push(parse_requirement(value).map_err(|e| format!("line {}: {e}", i + 1))?),
                "entrypoint" => {
                    let (cli, entry) = value
                        .split_once(':')
                        .ok_or_else(|| format!("line {}: expected `entrypoint: <cli>:<path>`", i + 1))?;
                    rec.entrypoints.push(Entrypoint::new(cli.trim(), entry.trim()));
                }
                other => return Err(format!("line {}: unknown key {other:?}", i + 1)),
            }
        }
        Ok(rec)
    }
}

fn package_key(eco: Ecosystem, name: &str) -> (Ecosystem, String) {
    match eco {
        Ecosystem::Py => (eco, normalize_name(name)),
        Ecosystem::Js => (eco, name.to_string()),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegistryIndex {
    packages: BTreeMap<(Ecosystem, String), BTreeMap<Version, PackageRecord>>,
}

impl RegistryIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, eco: Ecosystem, name: &str, version: Version, record: PackageRecord) {
        self.packages.entry(package_key(eco, name)).or_default().insert(version, record);
    }

    pub fn get(&self, eco: Ecosystem, name: &str, version: &str) -> Option<&PackageRecord> {
        let v = parse_version(version).ok()?;
        self.packages.get(&package_key(eco, name))?.get(&v)
    }

    pub fn versions(&self, eco: Ecosystem, name: &str) -> Vec<Version> {
        self.packages
            .get(&package_key(eco, name))
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.packages.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.packages.is_empty()
    }

    pub fn load(dir: &Path) -> Result<Self, SourceError> {
        if !dir.is_dir() {
            return Err(invalid(dir, "registry directory not found"));
        }
        let mut index = RegistryIndex::new();
        for eco in [Ecosystem::Py, Ecosystem::Js] {
            let eco_dir = dir.join(eco.as_str());
            if !eco_dir.exists() {
                continue;
            }
            for name_dir in sorted_dirs(&eco_dir)? {
                let name = file_name(&name_dir);
                for ver_dir in sorted_dirs(&name_dir)? {
                    let ver_name = file_name(&ver_dir);
                    let version = parse_version(&ver_name).map_err(|e| invalid(&ver_dir, e.to_string()))?;
                    let files = FileTree::from_dir(&ver_dir.join("files"))?;
                    if files.is_empty() {
                        return Err(invalid(&ver_dir, "empty files/ tree"));
                    }
                    let meta_path = ver_dir.join("meta");
                    let meta = if meta_path.exists() {
                        fs::read_to_string(&meta_path).map_err(|e| invalid(&meta_path, e.to_string()))?
                    } else {
                        String::new()
                    };
                    let record = PackageRecord::parse_meta(&meta, files).map_err(|m| invalid(&meta_path, m))?;
                    index.insert(eco, &name, version, record);
                }
            }
        }
        Ok(index)
    }
}

impl AvailableVersions for RegistryIndex {
    fn available_versions(&self, package: &str) -> Option<Vec<Version>> {
        self.packages
            .get(&package_key(Ecosystem::Py, package))
            .map(|m| m.keys().cloned().collect())
    }
}

/// First 16 hex digits of the SHA-256 of `url`.
pub fn url_key(url: &str) -> String {
    sha256_hex(url.as_bytes())[..16].to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GitStore {
    trees: BTreeMap<(String, String), FileTree>,
}

impl GitStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, url: &str, commit: &str, tree: FileTree) {
        self.trees.insert((url_key(url), commit.to_string()), tree);
    }

    pub fn get(&self, url: &str, commit: &str) -> Option<&FileTree> {
        self.trees.get(&(url_key(url), commit.to_string()))
    }

    /// Drops one commit, returning its tree.
    pub fn remove(&mut self, url: &str, commit: &str) -> Option<FileTree> {
        self.trees.remove(&(url_key(url), commit.to_string()))
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn load(dir: &Path) -> Result<Self, SourceError> {
        if !dir.is_dir() {
            return Err(invalid(dir, "git store directory not found"));
        }
        let mut store = GitStore::new();
        for key_dir in sorted_dirs(dir)? {
            let key = file_name(&key_dir);
            if key.len() != 16 || !key.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()) {
                return Err(invalid(&key_dir, "expected a 16-digit lowercase hex url key"));
            }
            for commit_dir in sorted_dirs(&key_dir)? {
                let commit = file_name(&commit_dir);
                if !is_commit_hash(&commit) {
                    return Err(invalid(&commit_dir, "expected a 40-digit commit hash"));
                }
                store.trees.insert((key.clone(), commit), FileTree::from_dir(&commit_dir)?);
            }
        }
        Ok(store)
    }
}

fn sorted_dirs(dir: &Path) -> Result<Vec<std::path::PathBuf>, SourceError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| invalid(dir, e.to_string()))? {
        let path = entry.map_err(|e| invalid(dir, e.to_string()))?.path();
        if path.is_dir() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_format() {
        let rec = PackageRecord::parse_meta(
            "# garak\nrequires: numpy>=1.24\n\nentrypoint: garak:bin/garak\n",
            FileTree::new(),
        )
        .unwrap();
        assert_eq!(rec.requirements[0].to_string(), "numpy>=1.24");
        assert_eq!(rec.entrypoints, vec![Entrypoint::new("garak", "bin/garak")]);
        assert!(PackageRecord::parse_meta("wheel: yes\n", FileTree::new()).is_err());
        assert!(PackageRecord::parse_meta("requires: ???\n", FileTree::new()).is_err());
    }

    #[test]
    fn lookup_by_equal_version() {
        let mut idx = RegistryIndex::new();
        idx.insert(Ecosystem::Py, "Foo_Bar", parse_version("1.0").unwrap(), PackageRecord::default());
        assert!(idx.get(Ecosystem::Py, "foo-bar", "1").is_some());
        assert!(idx.get(Ecosystem::Js, "foo-bar", "1").is_none());
        assert_eq!(idx.available_versions("foo-bar").unwrap().len(), 1);
    }

    #[test]
    fn load_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let tree: FileTree = [
            ("registry/py/pkg/1.2.0/meta", "requires: dep<2\n"),
            ("registry/py/pkg/1.2.0/files/lib/pkg.py", "x\n"),
            ("registry/js/ui/0.1.0/files/index.js", "y\n"),
        ]
        .into_iter()
        .collect();
        let url = "https://example.com/r";
        let commit = "0123456789abcdef0123456789abcdef01234567";
        let mut tree = tree;
        tree.insert(format!("gitstore/{}/{commit}/README", url_key(url)), "hi\n");
        tree.write_to(dir.path()).unwrap();

        let idx = RegistryIndex::load(&dir.path().join("registry")).unwrap();
        assert_eq!(idx.len(), 2);
        assert_eq!(idx.get(Ecosystem::Py, "pkg", "1.2").unwrap().requirements.len(), 1);
        let store = GitStore::load(&dir.path().join("gitstore")).unwrap();
        assert_eq!(store.get(url, commit).unwrap().len(), 1);
        assert!(RegistryIndex::load(&dir.path().join("nope")).is_err());
    }
}
