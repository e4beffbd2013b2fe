//! Source patching: unified diffs plus overlay files.
//!
//! Patches for a tool live in `patches/<tool>/`: every `*.diff` file at the top
//! level is a unified diff, and everything under `overlay/` is copied verbatim
//! into the source tree. Overlays are copied first, then diffs are applied in
//! lexicographic filename order with exact context matching (no fuzz, no
//! offset search).

mod apply;
mod collect;
mod parse;

use std::fmt;
use std::io;

use thiserror::Error;

pub use apply::{apply_patch, apply_patchset};
pub use collect::{collect_all_patch_sets, collect_patch_sets, collect_patches};
pub use parse::parse_unified_diff;

pub const DEV_NULL: &str = "/dev/null";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LineTag {
    Context,
    Delete,
    Add,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HunkLine {
    pub tag: LineTag,
    /// Line contents without the trailing `\n` (a `\r` is kept).
    pub text: String,
    /// False when the line is the last of its file and has no newline.
    pub newline: bool,
}

impl HunkLine {
    pub fn new(tag: LineTag, text: impl Into<String>) -> Self {
        HunkLine { tag, text: text.into(), newline: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    pub lines: Vec<HunkLine>,
}

impl Hunk {
    /// Zero-based index of the first old line covered by the hunk. An empty
    /// old range means "insert after line `old_start`".
    pub fn old_offset(&self) -> usize {
        if self.old_len == 0 {
            self.old_start
        } else {
            self.old_start.saturating_sub(1)
        }
    }

    fn reverse(&self) -> Hunk {
        Hunk {
            old_start: self.new_start,
            old_len: self.new_len,
            new_start: self.old_start,
            new_len: self.old_len,
            lines: self
                .lines
                .iter()
                .map(|l| HunkLine {
                    tag: match l.tag {
                        LineTag::Context => LineTag::Context,
                        LineTag::Delete => LineTag::Add,
                        LineTag::Add => LineTag::Delete,
                    },
                    text: l.text.clone(),
                    newline: l.newline,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FilePatch {
    pub old_path: String,
    pub new_path: String,
    pub hunks: Vec<Hunk>,
}

impl FilePatch {
    pub fn is_creation(&self) -> bool {
        self.old_path == DEV_NULL
    }

    pub fn is_deletion(&self) -> bool {
        self.new_path == DEV_NULL
    }

    /// 1 for git-style `a/` and `b/` prefixed paths, otherwise 0.
    pub fn strip_level(&self) -> usize {
        let prefixed = |p: &str| p == DEV_NULL || p.starts_with("a/") || p.starts_with("b/");
        let both_null = self.is_creation() && self.is_deletion();
        usize::from(!both_null && prefixed(&self.old_path) && prefixed(&self.new_path))
    }

    fn stripped(&self, path: &str) -> String {
        if self.strip_level() == 1 {
            path.split_once('/').map_or(path, |(_, rest)| rest).to_string()
        } else {
            path.to_string()
        }
    }

    /// Path of the file before the patch, relative to the tree root.
    pub fn source(&self) -> Option<String> {
        (!self.is_creation()).then(|| self.stripped(&self.old_path))
    }

    /// Path of the file after the patch, relative to the tree root.
    pub fn target(&self) -> Option<String> {
        (!self.is_deletion()).then(|| self.stripped(&self.new_path))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Patch {
    pub file_patches: Vec<FilePatch>,
}

impl Patch {
    pub fn is_empty(&self) -> bool {
        self.file_patches.is_empty()
    }

    /// The patch that undoes this one.
    pub fn reverse(&self) -> Patch {
        Patch {
            file_patches: self
                .file_patches
                .iter()
                .map(|fp| FilePatch {
                    old_path: fp.new_path.clone(),
                    new_path: fp.old_path.clone(),
                    hunks: fp.hunks.iter().map(Hunk::reverse).collect(),
                })
                .collect(),
        }
    }

    /// Strip level shared by all file patches, as passed to `patch -p`.
    pub fn strip_level(&self) -> usize {
        self.file_patches.first().map_or(0, FilePatch::strip_level)
    }
}

/// Renders the patch in unified format. Parsing the output yields an equal
/// [`Patch`].
impl fmt::Display for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fp in &self.file_patches {
            writeln!(f, "--- {}", fp.old_path)?;
            writeln!(f, "+++ {}", fp.new_path)?;
            for h in &fp.hunks {
                writeln!(f, "@@ -{},{} +{},{} @@", h.old_start, h.old_len, h.new_start, h.new_len)?;
                for l in &h.lines {
                    let tag = match l.tag {
                        LineTag::Context => ' ',
                        LineTag::Delete => '-',
                        LineTag::Add => '+',
                    };
                    writeln!(f, "{tag}{}", l.text)?;
                    if !l.newline {
                        writeln!(f, "\\ No newline at end of file")?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Everything found under `patches/<tool>/`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchSet {
    pub tool: String,
    /// Overlay files, sorted by relative path.
    pub overlays: Vec<(String, Vec<u8>)>,
    /// Diffs, sorted by filename.
    pub diffs: Vec<(String, Patch)>,
}

impl PatchSet {
    pub fn empty(tool: &str) -> Self {
        PatchSet { tool: tool.to_string(), overlays: Vec::new(), diffs: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.overlays.is_empty() && self.diffs.is_empty()
    }

    /// Short content digest identifying the overlays and diffs.
    pub fn digest(&self) -> String {
        let mut text = String::new();
        for (path, bytes) in &self.overlays {
            text.push_str(&format!("overlay {path} {}\n", crate::tree::sha256_hex(bytes)));
        }
        for (name, patch) in &self.diffs {
            text.push_str(&format!("diff {name} {}\n", crate::tree::sha256_hex(patch.to_string().as_bytes())));
        }
        crate::tree::sha256_hex(text.as_bytes())[..16].to_string()
    }
}

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("malformed diff at line {line}: {message}")]
    MalformedDiff { line: usize, message: String },
    #[error("hunk at line {line} does not match its header counts: {message}")]
    HunkCountMismatch { line: usize, message: String },
    #[error("patch target {path} does not exist")]
    TargetMissing { path: String },
    #[error("patch would create {path}, which already exists")]
    TargetExists { path: String },
    #[error("context mismatch in {file}, hunk {hunk}, line {line}: expected {expected:?}, found {found:?}")]
    ContextMismatch {
        file: String,
        /// One-based hunk index within the file patch.
        hunk: usize,
        /// One-based line number in the file being patched.
        line: usize,
        expected: String,
        found: Option<String>,
    },
    #[error("{diff}: {source}")]
    InDiff {
        diff: String,
        #[source]
        source: Box<PatchError>,
    },
    #[error("cannot read patch tree {path}: {source}")]
    UnreadableTree {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl PatchError {
    /// The error with any [`PatchError::InDiff`] wrappers removed.
    pub fn root(&self) -> &PatchError {
        match self {
            PatchError::InDiff { source, .. } => source.root(),
            other => other,
        }
    }
}
