//! Sandbox execution of build plans.
//!
//! [`execute`] runs a [`BuildPlan`] against an in-memory [`Layout`] using the
//! offline sources from [`sources`]. Installing means copying the fetched
//! tree into place. No interpreter or package manager is ever invoked.
//!
//! Steps run in plan order and execution stops at the first failure. Each
//! step works on a copy of the layout that is only kept when the step
//! succeeds, so a failed step leaves nothing behind.

mod sources;
mod verify;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::emitter::wrapper_text;
use crate::manifest::{classify_tool, Ecosystem, Entrypoint, Manifest, ToolClass};
use crate::patchkit::{apply_patchset, PatchError, PatchSet};
use crate::planner::{BuildPlan, LayoutPaths, Step, StepKind};
use crate::tree::{sha256_hex, FileTree};
use crate::verspec::{
    merge_global_requirements, normalize_name, parse_requirement, render_lockfile, Conflict, MergeError,
    Requirement, RequirementError, Version,
};

pub use sources::{url_key, GitStore, PackageRecord, RegistryIndex, SourceError};
pub use verify::{verify_layout, LayoutViolation, VerificationReport};

/// Contributor name for the manifest's curated requirements in merges.
pub const CURATED_CONTRIBUTOR: &str = "global_requirements.txt";

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("fetch miss: {coordinate} is not available")]
    FetchMiss { coordinate: String },
    #[error("no patch set matching digest {digest} for {tool}")]
    PatchSetMismatch { tool: String, digest: String },
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error("{tool}: {source}")]
    BadRequirement {
        tool: String,
        #[source]
        source: RequirementError,
    },
    #[error("merge conflict: {}", render_conflicts(.0))]
    MergeConflict(Vec<Conflict>),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error("{path} does not exist")]
    Missing { path: String },
    #[error("{path} already exists")]
    PathExists { path: String },
    #[error("nothing staged for {tool}")]
    NotStaged { tool: String },
    #[error("wrapper exec target {target} does not exist")]
    MissingExecTarget { target: String },
    #[error("bin/{cli_name} already exists (pointing to {existing})")]
    SymlinkCollision { cli_name: String, existing: String },
    #[error("{path} is outside the layout root")]
    OutsideRoot { path: String },
}

fn render_conflicts(c: &[Conflict]) -> String {
    c.iter().map(ToString::to_string).collect::<Vec<_>>().join(" | ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Failed,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Ok => "OK",
            Outcome::Failed => "FAILED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionEntry {
    /// 1-based plan index.
    pub index: usize,
    pub kind: StepKind,
    pub tool: Option<String>,
    pub outcome: Outcome,
    pub detail: String,
}

impl fmt::Display for ActionEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}. {} {}", self.index, self.outcome, self.kind)?;
        if let Some(tool) = &self.tool {
            write!(f, " tool={tool}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Append-only record of executed steps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionLog {
    entries: Vec<ActionEntry>,
}

impl ActionLog {
    pub fn entries(&self) -> &[ActionEntry] {
        &self.entries
    }

    pub fn kinds(&self) -> Vec<StepKind> {
        self.entries.iter().map(|e| e.kind).collect()
    }

    pub fn last(&self) -> Option<&ActionEntry> {
        self.entries.last()
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|e| format!("{e}\n")).collect()
    }

    fn push(&mut self, entry: ActionEntry) {
        self.entries.push(entry);
    }
}

/// Result of a sandbox build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub paths: LayoutPaths,
    /// Every file, keyed relative to the layout root.
    pub root: FileTree,
    pub global_env_packages: BTreeMap<String, Version>,
    /// CLI name to absolute link target.
    pub symlinks: BTreeMap<String, String>,
    /// Tool name to its install directory, relative to the root.
    pub installed: BTreeMap<String, String>,
    /// Requirement sets that fed the global merge, by contributor.
    pub contributions: BTreeMap<String, Vec<Requirement>>,
}

impl Layout {
    pub fn new(paths: LayoutPaths) -> Self {
        Layout {
            paths,
            root: FileTree::new(),
            global_env_packages: BTreeMap::new(),
            symlinks: BTreeMap::new(),
            installed: BTreeMap::new(),
            contributions: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_empty() && self.global_env_packages.is_empty() && self.symlinks.is_empty() && self.installed.is_empty()
    }

    /// Root-relative form of an absolute layout path.
    pub fn rel<'a>(&self, abs: &'a str) -> Result<&'a str, ExecError> {
        self.paths.relative(abs).ok_or_else(|| ExecError::OutsideRoot { path: abs.to_string() })
    }

    /// Sorted text manifest of the whole layout, used for golden tests and
    /// the layout digest.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (path, bytes) in self.root.iter() {
            out.push_str(&format!("file {} {path}\n", sha256_hex(bytes)));
        }
        for (name, target) in &self.symlinks {
            out.push_str(&format!("link {name} -> {target}\n"));
        }
        for (name, v) in &self.global_env_packages {
            out.push_str(&format!("pin {name}=={v}\n"));
        }
        for (tool, dir) in &self.installed {
            out.push_str(&format!("tool {tool} {dir}\n"));
        }
        out
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.export().as_bytes())
    }
}

/// Everything a sandbox build reads besides the plan.
#[derive(Debug, Clone, Copy)]
pub struct Sources<'a> {
    pub registry: &'a RegistryIndex,
    pub gitstore: &'a GitStore,
    pub patches: &'a BTreeMap<String, PatchSet>,
    /// Custom CLI scripts keyed `<tool>/<name>`.
    pub scripts: &'a FileTree,
}

#[derive(Debug)]
pub struct Execution {
    pub log: ActionLog,
    pub layout: Layout,
    /// 1-based index and cause of the failed step, if any.
    pub failure: Option<(usize, ExecError)>,
}

impl Execution {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, Default)]
struct Staged {
    tree: FileTree,
    requirements: Vec<Requirement>,
    entrypoints: Vec<Entrypoint>,
    self_pin: Option<Requirement>,
}

#[derive(Debug, Clone)]
struct State {
    layout: Layout,
    staging: BTreeMap<String, Staged>,
    global_reqs: BTreeMap<String, Vec<Requirement>>,
}

pub fn execute(plan: &BuildPlan, src: &Sources<'_>) -> Execution {
    let mut state = State { layout: Layout::new(plan.layout.clone()), staging: BTreeMap::new(), global_reqs: BTreeMap::new() };
    let mut log = ActionLog::default();

    for (i, step) in plan.steps.iter().enumerate() {
        let mut next = state.clone();
        let result = run_step(&mut next, step, src);
        let (outcome, detail) = match &result {
            Ok(d) => (Outcome::Ok, d.clone()),
            Err(e) => (Outcome::Failed, e.to_string()),
        };
        log.push(ActionEntry { index: i + 1, kind: step.kind(), tool: step.tool().map(str::to_string), outcome, detail });
        match result {
            Ok(_) => state = next,
            Err(e) => return Execution { log, layout: state.layout, failure: Some((i + 1, e)) },
        }
    }
    Execution { log, layout: state.layout, failure: None }
}

fn run_step(st: &mut State, step: &Step, src: &Sources<'_>) -> Result<String, ExecError> {
    match step {
        Step::CreateIsolatedEnv { env, .. } => {
            let env = st.layout.rel(env)?.to_string();
            create_venv(&mut st.layout.root, &env)?;
            Ok(format!("created {env}"))
        }
        Step::CreateProjectDir { tool, project } => {
            let dir = st.layout.rel(project)?.to_string();
            if st.layout.root.has_dir(&dir) {
                return Err(ExecError::PathExists { path: project.clone() });
            }
            st.layout
                .root
                .insert(format!("{dir}/package.json"), format!("{{\n  \"name\": \"{tool}-project\",\n  \"private\": true\n}}\n"));
            Ok(format!("created {dir}"))
        }
        Step::FetchIndex { tool, ecosystem, version, .. } => {
            let rec = src.registry.get(*ecosystem, tool, version).ok_or_else(|| ExecError::FetchMiss {
                coordinate: match ecosystem {
                    Ecosystem::Py => format!("py:{tool}=={version}"),
                    Ecosystem::Js => format!("js:{tool}@{version}"),
                },
            })?;
            let self_pin = parse_requirement(&format!("{tool}=={version}"))
                .map_err(|source| ExecError::BadRequirement { tool: tool.clone(), source })?;
            st.staging.insert(
                tool.clone(),
                Staged {
                    tree: rec.files.clone(),
                    requirements: rec.requirements.clone(),
                    entrypoints: rec.entrypoints.clone(),
                    self_pin: Some(self_pin),
                },
            );
            Ok(format!("fetched {} files", rec.files.len()))
        }
        Step::FetchGit { tool, url, commit, .. } => {
            let mut tree = src
                .gitstore
                .get(url, commit)
                .cloned()
                .ok_or_else(|| ExecError::FetchMiss { coordinate: format!("git:{url}@{commit}") })?;
            let requirements = match tree.remove("requirements.txt") {
                Some(bytes) => parse_requirements_txt(&String::from_utf8_lossy(&bytes))
                    .map_err(|source| ExecError::BadRequirement { tool: tool.clone(), source })?,
                None => Vec::new(),
            };
            let n = tree.len();
            st.staging.insert(tool.clone(), Staged { tree, requirements, ..Default::default() });
            Ok(format!("cloned {} files at {}", n, &commit[..12]))
        }
        Step::ApplyPatches { tool, digest, .. } => {
            let ps = src
                .patches
                .get(tool)
                .filter(|ps| &ps.digest() == digest)
                .ok_or_else(|| ExecError::PatchSetMismatch { tool: tool.clone(), digest: digest.clone() })?;
            let staged = st.staging.get_mut(tool).ok_or_else(|| ExecError::NotStaged { tool: tool.clone() })?;
            staged.tree = apply_patchset(&staged.tree, ps)?;
            Ok(format!("applied {} overlay file(s) and {} diff(s)", ps.overlays.len(), ps.diffs.len()))
        }
        Step::InstallIsolated { tool, env, .. } => {
            let env = st.layout.rel(env)?.to_string();
            if !st.layout.root.contains(&format!("{env}/pyvenv.cfg")) {
                return Err(ExecError::Missing { path: format!("{}/{env}", st.layout.paths.root()) });
            }
            let staged = st.staging.remove(tool).ok_or_else(|| ExecError::NotStaged { tool: tool.clone() })?;
            let interp = format!("{}/{env}/bin/python", st.layout.paths.root());
            install(&mut st.layout.root, &env, &env, &staged, &format!("#!{interp}"));
            st.layout.installed.insert(tool.clone(), env.clone());
            Ok(format!("installed {} files into {env}", staged.tree.len()))
        }
        Step::InstallGlobal { tool, env, .. } => {
            let env = st.layout.rel(env)?.to_string();
            ensure_venv(&mut st.layout.root, &env);
            let staged = st.staging.remove(tool).ok_or_else(|| ExecError::NotStaged { tool: tool.clone() })?;
            install(&mut st.layout.root, &env, &env, &staged, "#!/usr/bin/python3");
            let mut reqs: Vec<Requirement> = staged.self_pin.iter().cloned().collect();
            reqs.extend(staged.requirements.iter().cloned());
            st.global_reqs.insert(tool.clone(), reqs);
            st.layout.installed.insert(tool.clone(), env.clone());
            Ok(format!("installed {} files into {env}", staged.tree.len()))
        }
        Step::InstallProject { tool, project, .. } => {
            let dir = st.layout.rel(project)?.to_string();
            if !st.layout.root.contains(&format!("{dir}/package.json")) {
                return Err(ExecError::Missing { path: project.clone() });
            }
            let staged = st.staging.remove(tool).ok_or_else(|| ExecError::NotStaged { tool: tool.clone() })?;
            let pkg = format!("{dir}/node_modules/{tool}");
            install(&mut st.layout.root, &pkg, &dir, &staged, "#!/usr/bin/env node");
            st.layout.installed.insert(tool.clone(), dir.clone());
            Ok(format!("installed {} files into {pkg}", staged.tree.len()))
        }
        Step::InstallGlobalRequirements { env, lockfile, tools, requirements } => {
            let mut sets: BTreeMap<String, Vec<Requirement>> = BTreeMap::new();
            for tool in tools {
                sets.insert(tool.clone(), st.global_reqs.get(tool).cloned().unwrap_or_default());
            }
            if !requirements.is_empty() {
                let curated = requirements
                    .iter()
                    .map(|r| parse_requirement(r))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|source| ExecError::BadRequirement { tool: CURATED_CONTRIBUTOR.into(), source })?;
                sets.insert(CURATED_CONTRIBUTOR.into(), curated);
            }
            let merged = merge_global_requirements(&sets, src.registry)?;
            if !merged.is_ok() {
                return Err(ExecError::MergeConflict(merged.conflicts));
            }

            let env = st.layout.rel(env)?.to_string();
            let lock = st.layout.rel(lockfile)?.to_string();
            let tool_names: Vec<String> = tools.iter().map(|t| normalize_name(t)).collect();
            let mut grafted = 0;
            for (name, v) in &merged.pins {
                if tool_names.contains(name) {
                    continue;
                }
                let rec = src
                    .registry
                    .get(Ecosystem::Py, name, &v.to_string())
                    .ok_or_else(|| ExecError::FetchMiss { coordinate: format!("py:{name}=={v}") })?;
                ensure_venv(&mut st.layout.root, &env);
                st.layout.root.graft(&env, &rec.files);
                grafted += 1;
            }
            if st.layout.root.has_dir(&env) {
                st.layout.root.insert(lock, render_lockfile(&merged.pins));
            }
            let n = merged.pins.len();
            st.layout.global_env_packages = merged.pins;
            st.layout.contributions = sets;
            Ok(format!("pinned {n} package(s), {grafted} added to the global environment"))
        }
        Step::WriteWrapper { path, launcher, .. } => {
            let target = launcher.resolved_target();
            if !st.layout.root.contains(st.layout.rel(&target)?) {
                return Err(ExecError::MissingExecTarget { target });
            }
            let rel = st.layout.rel(path)?.to_string();
            if st.layout.root.contains(&rel) {
                return Err(ExecError::PathExists { path: path.clone() });
            }
            st.layout.root.insert(rel.clone(), wrapper_text(launcher));
            Ok(format!("wrote {rel}"))
        }
        Step::CreateSymlink { cli_name, link, target, script, .. } => {
            let target_rel = st.layout.rel(target)?.to_string();
            if let Some(script) = script {
                let body = src
                    .scripts
                    .get(script)
                    .ok_or_else(|| ExecError::FetchMiss { coordinate: format!("script:{script}") })?;
                if st.layout.root.contains(&target_rel) {
                    return Err(ExecError::PathExists { path: target.clone() });
                }
                st.layout.root.insert(target_rel.clone(), body.to_vec());
            }
            if let Some(existing) = st.layout.symlinks.get(cli_name) {
                return Err(ExecError::SymlinkCollision { cli_name: cli_name.clone(), existing: existing.clone() });
            }
            let link_rel = st.layout.rel(link)?;
            if st.layout.root.contains(link_rel) || st.layout.root.has_dir(link_rel) {
                return Err(ExecError::SymlinkCollision { cli_name: cli_name.clone(), existing: link.clone() });
            }
            if !st.layout.root.contains(&target_rel) {
                return Err(ExecError::Missing { path: target.clone() });
            }
            st.layout.symlinks.insert(cli_name.clone(), target.clone());
            Ok(format!("linked bin/{cli_name} -> {target_rel}"))
        }
    }
}

fn venv_files(env_abs: &str) -> [(String, String); 2] {
    [
        ("bin/python".into(), format!("#!/bin/sh\n# interpreter for {env_abs}\nexec python3 \"$@\"\n")),
        ("pyvenv.cfg".into(), "home = /usr/bin\ninclude-system-site-packages = false\n".into()),
    ]
}

fn create_venv(root: &mut FileTree, env: &str) -> Result<(), ExecError> {
    if root.has_dir(env) {
        return Err(ExecError::PathExists { path: env.to_string() });
    }
    ensure_venv(root, env);
    Ok(())
}

fn ensure_venv(root: &mut FileTree, env: &str) {
    if root.contains(&format!("{env}/pyvenv.cfg")) {
        return;
    }
    for (rel, body) in venv_files(env) {
        root.insert(format!("{env}/{rel}"), body);
    }
}

/// Copies the staged tree below `dest` and generates a launcher stub for
/// every registered entrypoint the tree does not already ship. Entry paths
/// are relative to `entry_base`.
fn install(root: &mut FileTree, dest: &str, entry_base: &str, staged: &Staged, shebang: &str) {
    root.graft(dest, &staged.tree);
    for ep in &staged.entrypoints {
        let path = format!("{entry_base}/{}", ep.entry);
        if !root.contains(&path) {
            root.insert(path, format!("{shebang}\n# console entry point {}\n", ep.cli_name));
        }
    }
}

/// The requirement sets a build of `m` feeds into the global merge, read
/// straight from the sources: each shared-environment tool pins itself and
/// adds its declared requirements, and the curated list counts as one more
/// contributor. Patches are not applied, so a patched `requirements.txt`
/// is only seen by [`execute`].
pub fn global_requirement_sets(
    m: &Manifest,
    registry: &RegistryIndex,
    gitstore: &GitStore,
) -> Result<BTreeMap<String, Vec<Requirement>>, ExecError> {
    let mut sets = BTreeMap::new();
    for tool in m.tools() {
        if classify_tool(m, &tool.name).ok() != Some(ToolClass::DynamicGlobal) {
            continue;
        }
        let bad = |source| ExecError::BadRequirement { tool: tool.name.clone(), source };
        let reqs = match (&tool.version_pin, tool.git_pin()) {
            (_, Some(pin)) => {
                let tree = gitstore
                    .get(&pin.url, &pin.commit)
                    .ok_or_else(|| ExecError::FetchMiss { coordinate: format!("git:{}@{}", pin.url, pin.commit) })?;
                match tree.get("requirements.txt") {
                    Some(b) => parse_requirements_txt(&String::from_utf8_lossy(b)).map_err(bad)?,
                    None => Vec::new(),
                }
            }
            (Some(v), None) => {
                let rec = registry
                    .get(tool.ecosystem, &tool.name, v)
                    .ok_or_else(|| ExecError::FetchMiss { coordinate: format!("py:{}=={v}", tool.name) })?;
                let mut reqs = vec![parse_requirement(&format!("{}=={v}", tool.name)).map_err(bad)?];
                reqs.extend(rec.requirements.iter().cloned());
                reqs
            }
            (None, None) => Vec::new(),
        };
        sets.insert(tool.name.clone(), reqs);
    }
    if !m.global_requirements.is_empty() {
        let curated = m
            .global_requirements
            .iter()
            .map(|r| parse_requirement(r))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| ExecError::BadRequirement { tool: CURATED_CONTRIBUTOR.into(), source })?;
        sets.insert(CURATED_CONTRIBUTOR.into(), curated);
    }
    Ok(sets)
}

/// One requirement per line; blank lines and `#` comments are skipped.
pub fn parse_requirements_txt(text: &str) -> Result<Vec<Requirement>, RequirementError> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(parse_requirement)
        .collect()
}
