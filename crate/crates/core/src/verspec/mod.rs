//! Versions, requirement specifiers and the global requirements merge.
//!
//! The version grammar is a subset of the Python scheme: dotted release
//! numbers, an optional `a`/`b`/`rc` pre-release and an optional `.postN`.
//! Epochs, dev releases and local segments are rejected.

mod merge;
mod requirement;
mod version;

use thiserror::Error;

pub use merge::{
    check_pins, merge_global_requirements, parse_lockfile, render_lockfile, AvailableVersions,
    Conflict, Contribution, MergeResult, MergeStatus, Unsatisfied,
};
pub use requirement::{
    normalize_name, parse_requirement, satisfies, Operator, Requirement, Specifier,
};
pub use version::{compare_versions, parse_version, PrePhase, PreRelease, Version};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VersionError {
    #[error("malformed version {input:?}: {reason}")]
    Malformed { input: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RequirementError {
    #[error("malformed requirement {input:?}: {reason}")]
    Malformed { input: String, reason: String },
    #[error(transparent)]
    Version(#[from] VersionError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MergeError {
    #[error("package {package} (required by {}) is not in the index", tools.join(", "))]
    UnknownPackage { package: String, tools: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("lockfile line {line}: {reason}")]
pub struct LockfileError {
    pub line: usize,
    pub reason: String,
}
