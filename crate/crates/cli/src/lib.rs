//! The `iceforge` command.
//!
//! Exit codes: 0 on success, 1 when the inputs are well formed but the
//! request fails (invalid manifest, conflicting requirements, failed build
//! step, layout violations), 2 for usage and I/O errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use iceforge_core::emitter::{emit_buildfile, emit_shell, DEFAULT_BASE_IMAGE};
use iceforge_core::executor::{
    execute, global_requirement_sets, verify_layout, GitStore, Layout, RegistryIndex, Sources,
};
use iceforge_core::manifest::{classify_tool, parse_unvalidated, validate_manifest, Manifest, ToolClass};
use iceforge_core::patchkit::{collect_all_patch_sets, PatchSet};
use iceforge_core::planner::{plan_build, plan_custom_scripts, BuildPlan, LayoutPaths, DEFAULT_LAYOUT_ROOT};
use iceforge_core::verspec::{merge_global_requirements, render_lockfile};
use iceforge_core::FileTree;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (manifest grammar 1)");

#[derive(Debug, Parser)]
#[command(name = "iceforge", version = VERSION, about = "Plan, emit and sandbox-build a bundle of red-teaming tools")]
struct Cli {
    /// Layout root inside the target image.
    #[arg(long, global = true, env = "ICEFORGE_ROOT", default_value = DEFAULT_LAYOUT_ROOT)]
    root: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Inputs {
    /// Tool manifest.
    manifest: PathBuf,
    /// Directory holding `<tool>/*.diff` and `<tool>/overlay/`.
    #[arg(long)]
    patches: Option<PathBuf>,
    /// Directory holding custom `<tool>/<name>` CLI scripts.
    #[arg(long)]
    scripts: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Buildfile,
    Shell,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a manifest.
    Validate { manifest: PathBuf },
    /// Print the build plan.
    Plan {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Write the plan as a container build file or shell script.
    Emit {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum)]
        format: Format,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_BASE_IMAGE)]
        base_image: String,
    },
    /// Execute the plan against an offline registry into a sandbox directory.
    Build {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        gitstore: PathBuf,
        /// Empty or missing directory that receives the layout.
        #[arg(long)]
        sandbox: PathBuf,
        /// Also write the sorted layout manifest (paths, digests, links, pins).
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Merge the shared environment's requirements and report conflicts.
    CheckConflicts {
        manifest: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        gitstore: Option<PathBuf>,
        /// Write the lockfile here when the merge succeeds.
        #[arg(long)]
        lock_out: Option<PathBuf>,
    },
}

/// A failed command: exit code and message.
struct Failure(u8, String);

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure(2, msg.to_string())
}

fn domain(msg: impl std::fmt::Display) -> Failure {
    Failure(1, msg.to_string())
}

type Outcome = Result<u8, Failure>;

/// Runs the CLI with explicit arguments and output streams, returning the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "iceforge: {msg}");
            code
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let layout = LayoutPaths::new(&cli.root).map_err(usage)?;
    match cli.command {
        Command::Validate { manifest } => cmd_validate(&manifest, out),
        Command::Plan { inputs } => {
            let plan = load_plan(&inputs, &layout)?.1;
            write(out, plan.render().as_bytes())?;
            Ok(0)
        }
        Command::Emit { inputs, format, out: path, base_image } => {
            let plan = load_plan(&inputs, &layout)?.1;
            let text = match format {
                Format::Buildfile => emit_buildfile(&plan, &base_image),
                Format::Shell => emit_shell(&plan),
            };
            match path {
                Some(p) => fs::write(&p, text).map_err(|e| usage(format!("{}: {e}", p.display())))?,
                None => write(out, text.as_bytes())?,
            }
            Ok(0)
        }
        Command::Build { inputs, registry, gitstore, sandbox, export } => {
            cmd_build(&inputs, &registry, &gitstore, &sandbox, export.as_deref(), &layout, out, err)
        }
        Command::CheckConflicts { manifest, registry, gitstore, lock_out } => {
            cmd_check_conflicts(&manifest, &registry, gitstore.as_deref(), lock_out.as_deref(), out)
        }
    }
}

fn write(out: &mut dyn Write, bytes: &[u8]) -> Result<(), Failure> {
    out.write_all(bytes).map_err(|e| usage(format!("stdout: {e}")))
}

/// Reads and parses a manifest. Syntax errors are usage errors; validation
/// problems are left to the caller.
fn read_manifest(path: &Path) -> Result<(Manifest, Vec<String>), Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let (m, mut problems) = parse_unvalidated(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    problems.extend(validate_manifest(&m).violations);
    let mut lines: Vec<String> = Vec::new();
    for p in problems {
        let line = p.to_string();
        if !lines.contains(&line) {
            lines.push(line);
        }
    }
    Ok((m, lines))
}

fn load_manifest(path: &Path) -> Result<Manifest, Failure> {
    let (m, problems) = read_manifest(path)?;
    if problems.is_empty() {
        Ok(m)
    } else {
        Err(domain(format!("{}: invalid manifest\n  {}", path.display(), problems.join("\n  "))))
    }
}

fn cmd_validate(path: &Path, out: &mut dyn Write) -> Outcome {
    let (m, problems) = read_manifest(path)?;
    if !problems.is_empty() {
        let text: String = problems.iter().map(|p| format!("{p}\n")).collect();
        write(out, text.as_bytes())?;
        return Ok(1);
    }
    let count = |c| m.tools().filter(|t| classify_tool(&m, &t.name).ok() == Some(c)).count();
    let line = format!(
        "ok: {} tools ({} isolated, {} global, {} project)\n",
        m.tools().count(),
        count(ToolClass::StaticIsolated),
        count(ToolClass::DynamicGlobal),
        count(ToolClass::StaticProject),
    );
    write(out, line.as_bytes())?;
    Ok(0)
}

struct Loaded {
    manifest: Manifest,
    patches: BTreeMap<String, PatchSet>,
    scripts: FileTree,
}

fn load_plan(inputs: &Inputs, layout: &LayoutPaths) -> Result<(Loaded, BuildPlan), Failure> {
    let manifest = load_manifest(&inputs.manifest)?;
    let patches = match &inputs.patches {
        Some(dir) => collect_all_patch_sets(dir).map_err(|e| usage(format!("patches: {e}")))?,
        None => BTreeMap::new(),
    };
    let scripts = match &inputs.scripts {
        Some(dir) => FileTree::from_dir(dir).map_err(|e| usage(format!("scripts: {e}")))?,
        None => FileTree::new(),
    };
    let custom = plan_custom_scripts(&scripts, &manifest, layout).map_err(domain)?;
    let plan = plan_build(&manifest, &patches, layout).map_err(domain)?.with_custom_scripts(custom);
    Ok((Loaded { manifest, patches, scripts }, plan))
}

#[allow(clippy::too_many_arguments)]
fn cmd_build(
    inputs: &Inputs,
    registry: &Path,
    gitstore: &Path,
    sandbox: &Path,
    export: Option<&Path>,
    layout: &LayoutPaths,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Outcome {
    let (loaded, plan) = load_plan(inputs, layout)?;
    let registry = RegistryIndex::load(registry).map_err(|e| usage(format!("registry: {e}")))?;
    let gitstore = GitStore::load(gitstore).map_err(|e| usage(format!("gitstore: {e}")))?;
    if sandbox.exists() {
        let mut entries = fs::read_dir(sandbox).map_err(|e| usage(format!("{}: {e}", sandbox.display())))?;
        if entries.next().is_some() {
            return Err(usage(format!("sandbox {} is not empty", sandbox.display())));
        }
    }

    let ex = execute(
        &plan,
        &Sources { registry: &registry, gitstore: &gitstore, patches: &loaded.patches, scripts: &loaded.scripts },
    );
    write(out, ex.log.render().as_bytes())?;
    materialize(&ex.layout, sandbox).map_err(|e| usage(format!("{}: {e}", sandbox.display())))?;
    if let Some(path) = export {
        fs::write(path, ex.layout.export()).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }

    let report = verify_layout(&ex.layout, &loaded.manifest);
    let mut text = String::new();
    for v in &report.violations {
        text.push_str(&format!("violation {v}\n"));
    }
    text.push_str(&format!("layout-digest {}\n", ex.layout.digest()));
    write(out, text.as_bytes())?;

    if let Some((index, e)) = &ex.failure {
        let _ = writeln!(err, "iceforge: step {index} failed: {e}");
        return Ok(1);
    }
    if !report.is_empty() {
        let _ = writeln!(err, "iceforge: layout has {} violation(s)", report.violations.len());
        return Ok(1);
    }
    Ok(0)
}

/// Writes the layout below `dir`: files (executable when they start with
/// `#!`) and relative `bin` symlinks.
fn materialize(l: &Layout, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    l.root.write_to(dir).map_err(std::io::Error::other)?;
    for (path, bytes) in l.root.iter() {
        if bytes.starts_with(b"#!") {
            set_executable(&dir.join(path))?;
        }
    }
    for (name, target) in &l.symlinks {
        let link_abs = l.paths.bin(name);
        let link_rel = l.paths.relative(&link_abs).expect("bin lives under the root");
        let target_rel = l.paths.relative(target).unwrap_or(target);
        let depth = link_rel.matches('/').count();
        let relative = format!("{}{target_rel}", "../".repeat(depth));
        let link = dir.join(link_rel);
        if let Some(parent) = link.parent() {
            fs::create_dir_all(parent)?;
        }
        make_link(&relative, &link)?;
    }
    Ok(())
}

#[cfg(unix)]
fn set_executable(path: &Path) -> std::io::Result<()> {
    use std::os::unix::fs::PermissionsExt;
    fs::set_permissions(path, fs::Permissions::from_mode(0o755))
}

#[cfg(not(unix))]
fn set_executable(_: &Path) -> std::io::Result<()> {
    Ok(())
}

#[cfg(unix)]
fn make_link(target: &str, link: &Path) -> std::io::Result<()> {
    std::os::unix::fs::symlink(target, link)
}

#[cfg(not(unix))]
fn make_link(target: &str, link: &Path) -> std::io::Result<()> {
    fs::write(link, target)
}

fn cmd_check_conflicts(
    manifest: &Path,
    registry: &Path,
    gitstore: Option<&Path>,
    lock_out: Option<&Path>,
    out: &mut dyn Write,
) -> Outcome {
    let m = load_manifest(manifest)?;
    let registry = RegistryIndex::load(registry).map_err(|e| usage(format!("registry: {e}")))?;
    let gitstore = match gitstore {
        Some(dir) => GitStore::load(dir).map_err(|e| usage(format!("gitstore: {e}")))?,
        None => GitStore::new(),
    };
    let sets = global_requirement_sets(&m, &registry, &gitstore).map_err(domain)?;
    let result = merge_global_requirements(&sets, &registry).map_err(domain)?;

    let mut text = String::new();
    if result.is_ok() {
        text.push_str("status OK\n");
        for (name, v) in &result.pins {
            text.push_str(&format!("pin {name}=={v}\n"));
        }
    } else {
        text.push_str("status CONFLICT\n");
        for c in &result.conflicts {
            text.push_str(&format!("conflict {c}\n"));
        }
    }
    write(out, text.as_bytes())?;
    if !result.is_ok() {
        return Ok(1);
    }
    if let Some(path) = lock_out {
        fs::write(path, render_lockfile(&result.pins)).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use iceforge_core::manifest::GRAMMAR_VERSION;

    #[test]
    fn version_names_grammar() {
        assert!(VERSION.ends_with(&format!("(manifest grammar {GRAMMAR_VERSION})")));
    }

    #[test]
    fn help_and_version_exit_zero() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["iceforge", "--version"], &mut out, &mut err), 0);
        assert!(String::from_utf8(out).unwrap().contains("manifest grammar"));
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["iceforge", "frobnicate"], &mut out, &mut err), 2);
        assert!(out.is_empty());
    }
}
