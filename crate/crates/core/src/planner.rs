//! Build planning.
//!
//! [`plan_build`] turns a validated manifest and its patch sets into a single
//! ordered list of [`Step`]s. For each tool, in manifest order:
//!
//! 1. create the isolated environment or Node project (tools in the shared
//!    environment skip this),
//! 2. fetch from the package index or clone the pinned commit,
//! 3. apply patches, if the tool has any,
//! 4. install.
//!
//! Then the shared environment's requirements are installed once, and finally
//! every static tool entrypoint gets a wrapper script and a `bin` symlink.

use std::collections::BTreeMap;
use std::fmt;

use crate::manifest::{classify_tool, validate_manifest, Ecosystem, Manifest, Source, ToolClass, ValidationReport};
use crate::patchkit::PatchSet;
use crate::tree::FileTree;
use crate::verspec::parse_requirement;

pub const DEFAULT_LAYOUT_ROOT: &str = "/opt/iceforge";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanError {
    InvalidManifest(ValidationReport),
    UnknownPatchTarget(String),
    CliNameCollision { cli_name: String, owners: Vec<String> },
    MalformedScriptPath(String),
    InvalidLayoutRoot(String),
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::InvalidManifest(report) => {
                write!(f, "manifest has {} violation(s)", report.violations.len())?;
                for v in &report.violations {
                    write!(f, "\n  {v}")?;
                }
                Ok(())
            }
            PlanError::UnknownPatchTarget(tool) => write!(f, "patches given for {tool}, which is not in the manifest"),
            PlanError::CliNameCollision { cli_name, owners } => {
                write!(f, "CLI name {cli_name} is claimed by {}", owners.join(" and "))
            }
            PlanError::MalformedScriptPath(p) => {
                write!(f, "custom script {p:?} does not follow the <tool>/<name> convention")
            }
            PlanError::InvalidLayoutRoot(r) => {
                write!(f, "layout root {r:?} must be an absolute path without whitespace")
            }
        }
    }
}

impl std::error::Error for PlanError {}

/// Where everything lives below the layout root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LayoutPaths {
    root: String,
}

impl LayoutPaths {
    pub fn new(root: &str) -> Result<Self, PlanError> {
        let trimmed = root.trim_end_matches('/');
        let ok = root.starts_with('/')
            && !trimmed.is_empty()
            && !root.contains(|c: char| c.is_whitespace() || c == '\'' || c == '"')
            && trimmed[1..].split('/').all(|s| !s.is_empty() && s != "." && s != "..");
        if !ok {
            return Err(PlanError::InvalidLayoutRoot(root.to_string()));
        }
        Ok(LayoutPaths { root: trimmed.to_string() })
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn env(&self, tool: &str) -> String {
        format!("{}/envs/{tool}", self.root)
    }

    pub fn project(&self, tool: &str) -> String {
        format!("{}/projects/{tool}", self.root)
    }

    pub fn staging(&self, tool: &str) -> String {
        format!("{}/src/{tool}", self.root)
    }

    pub fn patches(&self, tool: &str) -> String {
        format!("{}/patches/{tool}", self.root)
    }

    pub fn global_env(&self) -> String {
        format!("{}/global", self.root)
    }

    pub fn lockfile(&self) -> String {
        format!("{}/global/global_requirements.txt", self.root)
    }

    pub fn wrapper(&self, tool: &str, cli_name: &str) -> String {
        format!("{}/cli_scripts/{tool}/{cli_name}", self.root)
    }

    pub fn bin_dir(&self) -> String {
        format!("{}/bin", self.root)
    }

    pub fn bin(&self, cli_name: &str) -> String {
        format!("{}/bin/{cli_name}", self.root)
    }

    /// `path` relative to the root, if it lies strictly below it.
    pub fn relative<'a>(&self, path: &'a str) -> Option<&'a str> {
        path.strip_prefix(self.root.as_str())?
            .strip_prefix('/')
            .filter(|rest| !rest.is_empty())
    }
}

impl Default for LayoutPaths {
    fn default() -> Self {
        LayoutPaths { root: DEFAULT_LAYOUT_ROOT.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StepKind {
    CreateIsolatedEnv,
    CreateProjectDir,
    FetchIndex,
    FetchGit,
    ApplyPatches,
    InstallIsolated,
    InstallGlobal,
    InstallProject,
    InstallGlobalRequirements,
    WriteWrapper,
    CreateSymlink,
}

impl StepKind {
    pub const ALL: [StepKind; 11] = [
        StepKind::CreateIsolatedEnv,
        StepKind::CreateProjectDir,
        StepKind::FetchIndex,
        StepKind::FetchGit,
        StepKind::ApplyPatches,
        StepKind::InstallIsolated,
        StepKind::InstallGlobal,
        StepKind::InstallProject,
        StepKind::InstallGlobalRequirements,
        StepKind::WriteWrapper,
        StepKind::CreateSymlink,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::CreateIsolatedEnv => "CREATE_ISOLATED_ENV",
            StepKind::CreateProjectDir => "CREATE_PROJECT_DIR",
            StepKind::FetchIndex => "FETCH_INDEX",
            StepKind::FetchGit => "FETCH_GIT",
            StepKind::ApplyPatches => "APPLY_PATCHES",
            StepKind::InstallIsolated => "INSTALL_ISOLATED",
            StepKind::InstallGlobal => "INSTALL_GLOBAL",
            StepKind::InstallProject => "INSTALL_PROJECT",
            StepKind::InstallGlobalRequirements => "INSTALL_GLOBAL_REQUIREMENTS",
            StepKind::WriteWrapper => "WRITE_WRAPPER",
            StepKind::CreateSymlink => "CREATE_SYMLINK",
        }
    }

    pub fn parse(s: &str) -> Option<StepKind> {
        StepKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a wrapper script starts its tool.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Launcher {
    /// `exec` an absolute path inside an isolated environment.
    Exec { target: String },
    /// `cd` into a Node project and `exec` a project-relative entry.
    Project { dir: String, entry: String },
}

impl Launcher {
    /// Absolute path of the executable the wrapper ends up running.
    pub fn resolved_target(&self) -> String {
        match self {
            Launcher::Exec { target } => target.clone(),
            Launcher::Project { dir, entry } => format!("{dir}/{entry}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiffRef {
    pub name: String,
    /// Leading path components to strip, as for `patch -p`.
    pub strip: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Step {
    CreateIsolatedEnv { tool: String, env: String },
    CreateProjectDir { tool: String, project: String },
    FetchIndex { tool: String, ecosystem: Ecosystem, version: String, staging: String },
    FetchGit { tool: String, url: String, commit: String, staging: String },
    ApplyPatches {
        tool: String,
        staging: String,
        patches: String,
        overlays: usize,
        diffs: Vec<DiffRef>,
        digest: String,
    },
    InstallIsolated { tool: String, staging: String, env: String },
    InstallGlobal { tool: String, staging: String, env: String },
    InstallProject { tool: String, staging: String, project: String },
    InstallGlobalRequirements {
        env: String,
        lockfile: String,
        /// Tools installed into the shared environment, in manifest order.
        tools: Vec<String>,
        /// Curated requirements from the manifest, in canonical form.
        requirements: Vec<String>,
    },
    WriteWrapper { tool: String, cli_name: String, path: String, launcher: Launcher },
    CreateSymlink {
        tool: String,
        cli_name: String,
        link: String,
        target: String,
        /// Custom script to install at `target`, relative to the scripts root.
        script: Option<String>,
    },
}

impl Step {
    pub fn kind(&self) -> StepKind {
        match self {
            Step::CreateIsolatedEnv { .. } => StepKind::CreateIsolatedEnv,
            Step::CreateProjectDir { .. } => StepKind::CreateProjectDir,
            Step::FetchIndex { .. } => StepKind::FetchIndex,
            Step::FetchGit { .. } => StepKind::FetchGit,
            Step::ApplyPatches { .. } => StepKind::ApplyPatches,
            Step::InstallIsolated { .. } => StepKind::InstallIsolated,
            Step::InstallGlobal { .. } => StepKind::InstallGlobal,
            Step::InstallProject { .. } => StepKind::InstallProject,
            Step::InstallGlobalRequirements { .. } => StepKind::InstallGlobalRequirements,
            Step::WriteWrapper { .. } => StepKind::WriteWrapper,
            Step::CreateSymlink { .. } => StepKind::CreateSymlink,
        }
    }

    pub fn tool(&self) -> Option<&str> {
        match self {
            Step::CreateIsolatedEnv { tool, .. }
            | Step::CreateProjectDir { tool, .. }
            | Step::FetchIndex { tool, .. }
            | Step::FetchGit { tool, .. }
            | Step::ApplyPatches { tool, .. }
            | Step::InstallIsolated { tool, .. }
            | Step::InstallGlobal { tool, .. }
            | Step::InstallProject { tool, .. }
            | Step::WriteWrapper { tool, .. }
            | Step::CreateSymlink { tool, .. } => Some(tool),
            Step::InstallGlobalRequirements { .. } => None,
        }
    }

    /// Kind-specific parameters in serialization order, `tool` first.
    pub fn params(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if let Some(tool) = self.tool() {
            out.push(("tool", tool.to_string()));
        }
        match self {
            Step::CreateIsolatedEnv { env, .. } => out.push(("env", env.clone())),
            Step::CreateProjectDir { project, .. } => out.push(("project", project.clone())),
            Step::FetchIndex { ecosystem, version, staging, .. } => {
                out.push(("ecosystem", ecosystem.to_string()));
                out.push(("version", version.clone()));
                out.push(("staging", staging.clone()));
            }
            Step::FetchGit { url, commit, staging, .. } => {
                out.push(("url", url.clone()));
                out.push(("commit", commit.clone()));
                out.push(("staging", staging.clone()));
            }
            Step::ApplyPatches { staging, patches, overlays, diffs, digest, .. } => {
                out.push(("staging", staging.clone()));
                out.push(("patches", patches.clone()));
                out.push(("overlays", overlays.to_string()));
                if !diffs.is_empty() {
                    let list: Vec<String> = diffs.iter().map(|d| format!("{}:p{}", d.name, d.strip)).collect();
                    out.push(("diffs", list.join(",")));
                }
                out.push(("digest", digest.clone()));
            }
            Step::InstallIsolated { staging, env, .. } | Step::InstallGlobal { staging, env, .. } => {
                out.push(("staging", staging.clone()));
                out.push(("env", env.clone()));
            }
            Step::InstallProject { staging, project, .. } => {
                out.push(("staging", staging.clone()));
                out.push(("project", project.clone()));
            }
            Step::InstallGlobalRequirements { env, lockfile, tools, requirements } => {
                out.push(("env", env.clone()));
                out.push(("lockfile", lockfile.clone()));
                if !tools.is_empty() {
                    out.push(("tools", tools.join(",")));
                }
                if !requirements.is_empty() {
                    out.push(("requirements", requirements.join(";")));
                }
            }
            Step::WriteWrapper { cli_name, path, launcher, .. } => {
                out.push(("cli", cli_name.clone()));
                out.push(("path", path.clone()));
                match launcher {
                    Launcher::Exec { target } => out.push(("exec", target.clone())),
                    Launcher::Project { dir, entry } => {
                        out.push(("cwd", dir.clone()));
                        out.push(("exec", format!("./{entry}")));
                    }
                }
            }
            Step::CreateSymlink { cli_name, link, target, script, .. } => {
                out.push(("cli", cli_name.clone()));
                out.push(("link", link.clone()));
                out.push(("target", target.clone()));
                if let Some(script) = script {
                    out.push(("script", script.clone()));
                }
            }
        }
        out
    }

    /// `KIND key=value ...`
    pub fn describe(&self) -> String {
        let mut s = self.kind().to_string();
        for (k, v) in self.params() {
            s.push(' ');
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildPlan {
    pub steps: Vec<Step>,
    pub layout: LayoutPaths,
}

impl BuildPlan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn kinds(&self) -> Vec<StepKind> {
        self.steps.iter().map(Step::kind).collect()
    }

    pub fn count(&self, kind: StepKind) -> usize {
        self.steps.iter().filter(|s| s.kind() == kind).count()
    }

    /// Steps that belong to `tool`, in plan order.
    pub fn steps_for<'a>(&'a self, tool: &'a str) -> impl Iterator<Item = &'a Step> + 'a {
        self.steps.iter().filter(move |s| s.tool() == Some(tool))
    }

    /// Appends symlink steps for custom scripts (see [`plan_custom_scripts`]).
    pub fn with_custom_scripts(mut self, steps: Vec<Step>) -> Self {
        self.steps.extend(steps);
        self
    }

    /// One `<index>. <KIND> key=value ...` line per step.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, step) in self.steps.iter().enumerate() {
            out.push_str(&format!("{}. {}\n", i + 1, step.describe()));
        }
        out
    }
}

impl fmt::Display for BuildPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Builds the plan for `m`. `patches` maps tool names to their patch sets;
/// empty sets are treated as absent.
pub fn plan_build(
    m: &Manifest,
    patches: &BTreeMap<String, PatchSet>,
    layout: &LayoutPaths,
) -> Result<BuildPlan, PlanError> {
    let report = validate_manifest(m);
    if !report.is_empty() {
        return Err(PlanError::InvalidManifest(report));
    }
    if let Some(unknown) = patches.keys().find(|t| m.tool(t).is_none()) {
        return Err(PlanError::UnknownPatchTarget(unknown.clone()));
    }

    let mut steps = Vec::new();
    let mut global_tools = Vec::new();

    for tool in m.tools() {
        let name = tool.name.clone();
        let class = classify_tool(m, &name).expect("tool comes from the manifest");
        let staging = layout.staging(&name);

        match class {
            ToolClass::StaticIsolated => steps.push(Step::CreateIsolatedEnv { tool: name.clone(), env: layout.env(&name) }),
            ToolClass::StaticProject => {
                steps.push(Step::CreateProjectDir { tool: name.clone(), project: layout.project(&name) })
            }
            ToolClass::DynamicGlobal => global_tools.push(name.clone()),
        }

        steps.push(match tool.source {
            Source::Index => Step::FetchIndex {
                tool: name.clone(),
                ecosystem: tool.ecosystem,
                version: tool.version_pin.clone().expect("validated: index tools are pinned"),
                staging: staging.clone(),
            },
            Source::Git => {
                let pin = tool.git_pin().expect("validated: git tools have url and commit");
                Step::FetchGit { tool: name.clone(), url: pin.url, commit: pin.commit, staging: staging.clone() }
            }
        });

        if let Some(ps) = patches.get(&name).filter(|ps| !ps.is_empty()) {
            steps.push(Step::ApplyPatches {
                tool: name.clone(),
                staging: staging.clone(),
                patches: layout.patches(&name),
                overlays: ps.overlays.len(),
                diffs: ps
                    .diffs
                    .iter()
                    .map(|(n, p)| DiffRef { name: n.clone(), strip: p.strip_level() })
                    .collect(),
                digest: ps.digest(),
            });
        }

        steps.push(match class {
            ToolClass::StaticIsolated => Step::InstallIsolated { tool: name.clone(), staging, env: layout.env(&name) },
            ToolClass::DynamicGlobal => Step::InstallGlobal { tool: name.clone(), staging, env: layout.global_env() },
            ToolClass::StaticProject => Step::InstallProject { tool: name.clone(), staging, project: layout.project(&name) },
        });
    }

    steps.push(Step::InstallGlobalRequirements {
        env: layout.global_env(),
        lockfile: layout.lockfile(),
        tools: global_tools,
        requirements: m
            .global_requirements
            .iter()
            .map(|r| parse_requirement(r).expect("validated: requirements parse").to_string())
            .collect(),
    });

    for tool in m.tools() {
        let class = classify_tool(m, &tool.name).expect("tool comes from the manifest");
        if !class.is_static() {
            continue;
        }
        for ep in &tool.entrypoints {
            let launcher = match class {
                ToolClass::StaticProject => Launcher::Project { dir: layout.project(&tool.name), entry: ep.entry.clone() },
                _ => Launcher::Exec { target: format!("{}/{}", layout.env(&tool.name), ep.entry) },
            };
            let wrapper = layout.wrapper(&tool.name, &ep.cli_name);
            steps.push(Step::WriteWrapper {
                tool: tool.name.clone(),
                cli_name: ep.cli_name.clone(),
                path: wrapper.clone(),
                launcher,
            });
            steps.push(Step::CreateSymlink {
                tool: tool.name.clone(),
                cli_name: ep.cli_name.clone(),
                link: layout.bin(&ep.cli_name),
                target: wrapper,
                script: None,
            });
        }
    }

    Ok(BuildPlan { steps, layout: layout.clone() })
}

/// One symlink step per self-contained script at `<tool>/<name>` in
/// `scripts`, ordered by `(tool, name)`. Script names may not clash with each
/// other or with the CLI names of static manifest tools.
pub fn plan_custom_scripts(
    scripts: &FileTree,
    m: &Manifest,
    layout: &LayoutPaths,
) -> Result<Vec<Step>, PlanError> {
    let mut found: Vec<(String, String)> = Vec::new();
    for path in scripts.paths() {
        let parts: Vec<&str> = path.split('/').collect();
        match parts.as_slice() {
            [tool, name] if crate::manifest::is_identifier(tool) && crate::manifest::is_identifier(name) => {
                found.push((tool.to_string(), name.to_string()))
            }
            _ => return Err(PlanError::MalformedScriptPath(path.to_string())),
        }
    }
    found.sort();

    let mut owners: BTreeMap<String, String> = BTreeMap::new();
    for tool in m.tools() {
        if classify_tool(m, &tool.name).is_ok_and(ToolClass::is_static) {
            for ep in &tool.entrypoints {
                owners.insert(ep.cli_name.clone(), format!("tool {}", tool.name));
            }
        }
    }

    let mut steps = Vec::with_capacity(found.len());
    for (tool, name) in found {
        let me = format!("script {tool}/{name}");
        if let Some(owner) = owners.get(&name) {
            return Err(PlanError::CliNameCollision { cli_name: name, owners: vec![owner.clone(), me] });
        }
        owners.insert(name.clone(), me);
        steps.push(Step::CreateSymlink {
            link: layout.bin(&name),
            target: layout.wrapper(&tool, &name),
            script: Some(format!("{tool}/{name}")),
            tool,
            cli_name: name,
        });
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::parse_manifest;
    use crate::patchkit::parse_unified_diff;

    const COMMIT: &str = "89abcdef0123456789abcdef0123456789abcdef";

    fn patchset(tool: &str) -> PatchSet {
        PatchSet {
            tool: tool.into(),
            overlays: vec![],
            diffs: vec![("01.diff".into(), parse_unified_diff("--- a/f\n+++ b/f\n@@ -1 +1 @@\n-a\n+b\n").unwrap())],
        }
    }

    #[test]
    fn empty_manifest_plans_only_requirements() {
        let plan = plan_build(&Manifest::default(), &BTreeMap::new(), &LayoutPaths::default()).unwrap();
        assert_eq!(plan.kinds(), vec![StepKind::InstallGlobalRequirements]);
        assert_eq!(
            plan.render(),
            "1. INSTALL_GLOBAL_REQUIREMENTS env=/opt/iceforge/global lockfile=/opt/iceforge/global/global_requirements.txt\n"
        );
    }

    #[test]
    fn patch_set_adds_exactly_one_step() {
        let m = parse_manifest("python_tools = [\"garak==0.10.2\"]").unwrap();
        let layout = LayoutPaths::default();
        let without = plan_build(&m, &BTreeMap::new(), &layout).unwrap();
        let with = plan_build(&m, &BTreeMap::from([("garak".into(), patchset("garak"))]), &layout).unwrap();
        assert_eq!(with.len(), without.len() + 1);
        let extra: Vec<_> = with.steps.iter().filter(|s| !without.steps.contains(s)).collect();
        assert_eq!(extra.len(), 1);
        assert_eq!(extra[0].kind(), StepKind::ApplyPatches);

        let empty = plan_build(&m, &BTreeMap::from([("garak".into(), PatchSet::empty("garak"))]), &layout).unwrap();
        assert_eq!(empty, without);
    }

    #[test]
    fn rendering_of_every_step_kind() {
        let m = parse_manifest(&format!(
            "python_tools = [\"garak==0.10.2\", \"pyrit==0.9.0\", \"easyedit\"]\n\
             nodejs_tools = [\"promptfoo@0.107.0\"]\n\
             system_tools = [\"pyrit\"]\n\
             git_tools = [\"easyedit=https://github.com/zjunlp/EasyEdit#{COMMIT}\"]\n\
             global_requirements = [\"pyrit >= 0.9\"]\n"
        ))
        .unwrap();
        let patches = BTreeMap::from([("easyedit".to_string(), patchset("easyedit"))]);
        let plan = plan_build(&m, &patches, &LayoutPaths::new("/srv/ice/").unwrap()).unwrap();
        let digest = patchset("easyedit").digest();
        let expected = format!(
            "1. CREATE_ISOLATED_ENV tool=garak env=/srv/ice/envs/garak
2. FETCH_INDEX tool=garak ecosystem=py version=0.10.2 staging=/srv/ice/src/garak
3. INSTALL_ISOLATED tool=garak staging=/srv/ice/src/garak env=/srv/ice/envs/garak
4. FETCH_INDEX tool=pyrit ecosystem=py version=0.9.0 staging=/srv/ice/src/pyrit
5. INSTALL_GLOBAL tool=pyrit staging=/srv/ice/src/pyrit env=/srv/ice/global
6. CREATE_ISOLATED_ENV tool=easyedit env=/srv/ice/envs/easyedit
7. FETCH_GIT tool=easyedit url=https://github.com/zjunlp/EasyEdit commit={COMMIT} staging=/srv/ice/src/easyedit
8. APPLY_PATCHES tool=easyedit staging=/srv/ice/src/easyedit patches=/srv/ice/patches/easyedit overlays=0 diffs=01.diff:p1 digest={digest}
9. INSTALL_ISOLATED tool=easyedit staging=/srv/ice/src/easyedit env=/srv/ice/envs/easyedit
10. CREATE_PROJECT_DIR tool=promptfoo project=/srv/ice/projects/promptfoo
11. FETCH_INDEX tool=promptfoo ecosystem=js version=0.107.0 staging=/srv/ice/src/promptfoo
12. INSTALL_PROJECT tool=promptfoo staging=/srv/ice/src/promptfoo project=/srv/ice/projects/promptfoo
13. INSTALL_GLOBAL_REQUIREMENTS env=/srv/ice/global lockfile=/srv/ice/global/global_requirements.txt tools=pyrit requirements=pyrit>=0.9
14. WRITE_WRAPPER tool=garak cli=garak path=/srv/ice/cli_scripts/garak/garak exec=/srv/ice/envs/garak/bin/garak
15. CREATE_SYMLINK tool=garak cli=garak link=/srv/ice/bin/garak target=/srv/ice/cli_scripts/garak/garak
16. WRITE_WRAPPER tool=easyedit cli=easyedit path=/srv/ice/cli_scripts/easyedit/easyedit exec=/srv/ice/envs/easyedit/bin/easyedit
17. CREATE_SYMLINK tool=easyedit cli=easyedit link=/srv/ice/bin/easyedit target=/srv/ice/cli_scripts/easyedit/easyedit
18. WRITE_WRAPPER tool=promptfoo cli=promptfoo path=/srv/ice/cli_scripts/promptfoo/promptfoo cwd=/srv/ice/projects/promptfoo exec=./node_modules/.bin/promptfoo
19. CREATE_SYMLINK tool=promptfoo cli=promptfoo link=/srv/ice/bin/promptfoo target=/srv/ice/cli_scripts/promptfoo/promptfoo
"
        );
        assert_eq!(plan.render(), expected);
        for line in plan.render().lines() {
            let kind = line.split(' ').nth(1).unwrap();
            assert!(StepKind::parse(kind).is_some());
        }
    }

    #[test]
    fn invalid_inputs() {
        let mut m = parse_manifest("python_tools = [\"a==1\"]").unwrap();
        let layout = LayoutPaths::default();
        let err = plan_build(&m, &BTreeMap::from([("ghost".into(), patchset("ghost"))]), &layout).unwrap_err();
        assert_eq!(err, PlanError::UnknownPatchTarget("ghost".into()));
        m.python_tools[0].version_pin = None;
        assert!(matches!(plan_build(&m, &BTreeMap::new(), &layout), Err(PlanError::InvalidManifest(_))));
        for bad in ["relative", "/", "/a b", "/a/../b", ""] {
            assert!(LayoutPaths::new(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn custom_scripts() {
        let m = parse_manifest("python_tools = [\"garak==1\", \"pyrit==1\"]\nsystem_tools = [\"pyrit\"]").unwrap();
        let layout = LayoutPaths::default();
        assert!(plan_custom_scripts(&FileTree::new(), &m, &layout).unwrap().is_empty());

        let scripts: FileTree = [("biasforge/biasforge", "#!/bin/sh\n"), ("a-b/x", ""), ("a/y", ""), ("pyrit/pyrit", "")]
            .into_iter()
            .collect();
        let steps = plan_custom_scripts(&scripts, &m, &layout).unwrap();
        let names: Vec<_> = steps.iter().map(|s| s.params()[1].1.clone()).collect();
        assert_eq!(names, ["y", "x", "biasforge", "pyrit"], "ordered by (tool, name)");
        assert_eq!(
            steps[2].describe(),
            "CREATE_SYMLINK tool=biasforge cli=biasforge link=/opt/iceforge/bin/biasforge \
             target=/opt/iceforge/cli_scripts/biasforge/biasforge script=biasforge/biasforge"
        );

        let clash: FileTree = [("extra/garak", "")].into_iter().collect();
        assert!(matches!(
            plan_custom_scripts(&clash, &m, &layout),
            Err(PlanError::CliNameCollision { ref cli_name, .. }) if cli_name == "garak"
        ));
        let twice: FileTree = [("a/x", ""), ("b/x", "")].into_iter().collect();
        assert!(matches!(plan_custom_scripts(&twice, &m, &layout), Err(PlanError::CliNameCollision { .. })));
        let deep: FileTree = [("a/b/c", "")].into_iter().collect();
        assert!(matches!(plan_custom_scripts(&deep, &m, &layout), Err(PlanError::MalformedScriptPath(_))));
    }
}
