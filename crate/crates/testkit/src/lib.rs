//! Test support for iceforge: fixture locations, reference data, and oracles
//! that re-derive expected results without sharing code with the crates
//! under test.

pub mod diffs;
pub mod merge;
pub mod versions;

use std::path::PathBuf;

/// Root of the bundled 14-tool fixture.
pub fn fixture_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/redteam");
    dir.canonicalize().unwrap_or(dir)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Filled circle: CLI-driven.
    Static,
    /// Half circle: library given a CLI, counted as static.
    Half,
    /// Empty circle: imported from the shared interpreter.
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    GitHub,
    PyPI,
    Npm,
}

pub struct ToolRow {
    pub name: &'static str,
    pub kind: Kind,
    pub origin: Origin,
    /// Dynamic, but kept out of the shared environment because of legacy
    /// dependency pins.
    pub forced_isolated: bool,
}

const fn row(name: &'static str, kind: Kind, origin: Origin, forced_isolated: bool) -> ToolRow {
    ToolRow { name, kind, origin, forced_isolated }
}

/// The published tool overview, transcribed by hand.
pub const TOOL_TABLE: [ToolRow; 14] = [
    row("lm-evaluation-harness", Kind::Static, Origin::GitHub, false),
    row("promptfoo", Kind::Static, Origin::Npm, false),
    row("cleverhans", Kind::Dynamic, Origin::GitHub, true),
    row("garak", Kind::Static, Origin::PyPI, false),
    row("adversarial-robustness-toolbox", Kind::Dynamic, Origin::PyPI, true),
    row("giskard", Kind::Half, Origin::PyPI, false),
    row("cyberseceval", Kind::Static, Origin::GitHub, false),
    row("pyrit", Kind::Dynamic, Origin::PyPI, false),
    row("easyedit", Kind::Dynamic, Origin::GitHub, true),
    row("promptmap", Kind::Static, Origin::GitHub, false),
    row("fuzzyai", Kind::Static, Origin::GitHub, false),
    row("fickling", Kind::Half, Origin::PyPI, false),
    row("rigging", Kind::Dynamic, Origin::PyPI, false),
    row("judges", Kind::Half, Origin::PyPI, false),
];

/// Expected per-kind step counts for a build of [`TOOL_TABLE`], derived from
/// the table alone: `(isolated envs, project dirs, global installs, git
/// fetches, index fetches)`.
pub fn expected_plan_counts() -> (usize, usize, usize, usize, usize) {
    let global = |r: &&ToolRow| r.kind == Kind::Dynamic && !r.forced_isolated;
    let npm = |r: &&ToolRow| r.origin == Origin::Npm;
    let isolated = TOOL_TABLE.iter().filter(|r| !global(r) && !npm(r)).count();
    let projects = TOOL_TABLE.iter().filter(npm).count();
    let globals = TOOL_TABLE.iter().filter(global).count();
    let git = TOOL_TABLE.iter().filter(|r| r.origin == Origin::GitHub).count();
    (isolated, projects, globals, git, TOOL_TABLE.len() - git)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_counts() {
        assert_eq!(expected_plan_counts(), (11, 1, 2, 6, 8));
        assert_eq!(TOOL_TABLE.iter().filter(|r| r.kind == Kind::Static).count(), 6);
        assert_eq!(TOOL_TABLE.iter().filter(|r| r.kind == Kind::Half).count(), 3);
        assert!(fixture_dir().join("tools.toml").is_file());
    }
}
