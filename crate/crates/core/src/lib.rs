//! Core of iceforge: turns a declarative tool manifest into a deterministic
//! build plan, then emits it as a container build file or shell script, or
//! runs it against an offline sandbox.
//!
//! The pipeline per tool is: create the environment (isolated Python
//! environment or Node project, nothing for tools in the shared environment),
//! fetch the source from a package index or a pinned git commit, apply
//! patches, install. After all tools, the shared environment's requirements
//! are merged and installed, then CLI wrappers and `bin` symlinks are written
//! for every static tool.

pub mod emitter;
pub mod executor;
pub mod manifest;
pub mod patchkit;
pub mod planner;
pub mod tree;
pub mod verspec;

pub use emitter::{emit_buildfile, emit_shell, render_wrapper, EmitError};
pub use executor::{
    execute, verify_layout, ActionLog, ExecError, Execution, GitStore, Layout, LayoutViolation, RegistryIndex,
    Sources, VerificationReport,
};
pub use manifest::{
    classify_tool, parse_manifest, render_manifest, validate_manifest, Ecosystem, Entrypoint,
    Environment, Manifest, ManifestError, Source, ToolClass, ToolSpec, ValidationReport,
    Violation,
};
pub use patchkit::{apply_patch, apply_patchset, parse_unified_diff, Patch, PatchError, PatchSet};
pub use planner::{plan_build, plan_custom_scripts, BuildPlan, LayoutPaths, PlanError, Step, StepKind};
pub use tree::FileTree;
pub use verspec::{parse_requirement, parse_version, Requirement, Version};
