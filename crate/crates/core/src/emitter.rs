//! Rendering plans into artifacts.
//!
//! Both the container build file and the shell script are produced from the
//! same per-step command list, so they cannot drift apart. Each step becomes
//! one block introduced by a `# step N/T: KIND tool=<name>` marker.
//!
//! Paths that start with `patches/`, `cli_scripts/` or `global_requirements.txt`
//! are relative to the build context. The build file copies them in and the
//! shell script reads them from `$ICEFORGE_CONTEXT`, which defaults to the
//! current directory.

use std::fmt::Write as _;

use thiserror::Error;

use crate::manifest::{Entrypoint, Environment, ToolSpec};
use crate::planner::{BuildPlan, Launcher, LayoutPaths, Step};

pub const DEFAULT_BASE_IMAGE: &str = "iceforge/base:placeholder";

/// Lockfile name inside the build context.
pub const CONTEXT_LOCKFILE: &str = "global_requirements.txt";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("{tool} is a dynamic tool and gets no CLI wrapper")]
    NotStatic { tool: String },
}

/// The wrapper script for one entrypoint of a static tool.
pub fn render_wrapper(tool: &ToolSpec, ep: &Entrypoint, layout: &LayoutPaths) -> Result<String, EmitError> {
    let launcher = match tool.environment {
        Environment::Isolated => Launcher::Exec { target: format!("{}/{}", layout.env(&tool.name), ep.entry) },
        Environment::Project => Launcher::Project { dir: layout.project(&tool.name), entry: ep.entry.clone() },
        Environment::Global => return Err(EmitError::NotStatic { tool: tool.name.clone() }),
    };
    Ok(wrapper_text(&launcher))
}

/// Wrapper text for a launcher, as written by `WRITE_WRAPPER` steps.
pub fn wrapper_text(launcher: &Launcher) -> String {
    let [a, b] = wrapper_lines(launcher);
    format!("{a}\n{b}\n")
}

fn wrapper_lines(launcher: &Launcher) -> [String; 2] {
    let body = match launcher {
        Launcher::Exec { target } => format!("exec \"{target}\" \"$@\""),
        Launcher::Project { dir, entry } => format!("cd \"{dir}\" && exec \"./{entry}\" \"$@\""),
    };
    ["#!/bin/sh".to_string(), body]
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Cmd {
    /// Copy from the build context. `dir` copies directory contents.
    Copy { src: String, dest: String, dir: bool, mode: Option<&'static str> },
    /// Shell commands chained with `&&`.
    Run(Vec<String>),
}

/// Quotes `s` for POSIX sh if it holds anything beyond a conservative set.
fn sq(s: &str) -> String {
    let safe = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || "_./:=@%+,-".contains(c));
    if safe {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

fn commands(step: &Step) -> Vec<Cmd> {
    use crate::manifest::Ecosystem;

    match step {
        Step::CreateIsolatedEnv { env, .. } => vec![Cmd::Run(vec![format!("python3 -m venv {}", sq(env))])],
        Step::CreateProjectDir { project, .. } => vec![Cmd::Run(vec![
            format!("mkdir -p {}", sq(project)),
            format!("cd {}", sq(project)),
            "npm init -y --silent".into(),
        ])],
        Step::FetchIndex { tool, ecosystem, version, staging } => {
            let dl = sq(&format!("{staging}.dl"));
            let staging = sq(staging);
            let (fetch, archive) = match ecosystem {
                Ecosystem::Py => (
                    format!("python3 -m pip download --no-deps --no-binary=:all: --dest {dl} {}", sq(&format!("{tool}=={version}"))),
                    "*.tar.gz",
                ),
                Ecosystem::Js => (
                    format!("npm pack --silent --pack-destination {dl} {}", sq(&format!("{tool}@{version}"))),
                    "*.tgz",
                ),
            };
            vec![Cmd::Run(vec![
                format!("mkdir -p {dl} {staging}"),
                fetch,
                format!("tar -xzf {dl}/{archive} --strip-components=1 -C {staging}"),
                format!("rm -rf {dl}"),
            ])]
        }
        Step::FetchGit { url, commit, staging, .. } => vec![Cmd::Run(vec![
            format!("git clone --quiet {} {}", sq(url), sq(staging)),
            format!("git -C {} checkout --quiet --detach {commit}", sq(staging)),
        ])],
        Step::ApplyPatches { tool, staging, patches, overlays, diffs, .. } => {
            let mut run = Vec::new();
            if *overlays > 0 {
                run.push(format!("cp -a {}/overlay/. {}/", sq(patches), sq(staging)));
            }
            for d in diffs {
                run.push(format!(
                    "patch -d {} -p{} -F0 --batch -i {}",
                    sq(staging),
                    d.strip,
                    sq(&format!("{patches}/{}", d.name))
                ));
            }
            vec![
                Cmd::Copy { src: format!("patches/{tool}/"), dest: format!("{patches}/"), dir: true, mode: None },
                Cmd::Run(run),
            ]
        }
        Step::InstallIsolated { staging, env, .. } | Step::InstallGlobal { staging, env, .. } => {
            vec![Cmd::Run(vec![
                format!("{}/bin/python -m pip install --quiet {}", sq(env), sq(staging)),
                format!("rm -rf {}", sq(staging)),
            ])]
        }
        Step::InstallProject { staging, project, .. } => vec![Cmd::Run(vec![
            format!("npm install --silent --install-links --prefix {} {}", sq(project), sq(staging)),
            format!("rm -rf {}", sq(staging)),
        ])],
        Step::InstallGlobalRequirements { env, lockfile, requirements, .. } => {
            let mut install = format!("{}/bin/python -m pip install --quiet -r {}", sq(env), sq(lockfile));
            for r in requirements {
                install.push(' ');
                install.push_str(&sq(r));
            }
            vec![
                Cmd::Copy { src: CONTEXT_LOCKFILE.into(), dest: lockfile.clone(), dir: false, mode: None },
                Cmd::Run(vec![install]),
            ]
        }
        Step::WriteWrapper { path, launcher, .. } => {
            let dir = path.rsplit_once('/').map_or("/", |(d, _)| d);
            let [a, b] = wrapper_lines(launcher);
            vec![Cmd::Run(vec![
                format!("mkdir -p {}", sq(dir)),
                format!("printf '%s\\n' {} {} > {}", sq(&a), sq(&b), sq(path)),
                format!("chmod 0755 {}", sq(path)),
            ])]
        }
        Step::CreateSymlink { link, target, script, .. } => {
            let mut out = Vec::new();
            if let Some(rel) = script {
                out.push(Cmd::Copy {
                    src: format!("cli_scripts/{rel}"),
                    dest: target.clone(),
                    dir: false,
                    mode: Some("0755"),
                });
            }
            out.push(Cmd::Run(vec![format!("ln -s {} {}", sq(target), sq(link))]));
            out
        }
    }
}

fn marker(i: usize, total: usize, step: &Step) -> String {
    match step.tool() {
        Some(tool) => format!("# step {}/{total}: {} tool={tool}", i + 1, step.kind()),
        None => format!("# step {}/{total}: {}", i + 1, step.kind()),
    }
}

/// Container build file with a fixed header and one block per step.
pub fn emit_buildfile(p: &BuildPlan, base_image: &str) -> String {
    let root = p.layout.root();
    let mut out = String::new();
    out.push_str("# syntax=docker/dockerfile:1\n");
    out.push_str("# generated by iceforge; do not edit\n");
    let _ = writeln!(out, "FROM {base_image}");
    let _ = writeln!(out, "ENV ICEFORGE_ROOT={root}");
    let _ = writeln!(out, "ENV PATH={}:$PATH", p.layout.bin_dir());
    let _ = writeln!(out, "RUN mkdir -p {} && python3 -m venv {}", sq(&p.layout.bin_dir()), sq(&p.layout.global_env()));

    let total = p.steps.len();
    for (i, step) in p.steps.iter().enumerate() {
        out.push('\n');
        out.push_str(&marker(i, total, step));
        out.push('\n');
        for cmd in commands(step) {
            match cmd {
                Cmd::Copy { src, dest, mode, .. } => {
                    out.push_str("COPY ");
                    if let Some(m) = mode {
                        let _ = write!(out, "--chmod={m} ");
                    }
                    let _ = writeln!(out, "{src} {dest}");
                }
                Cmd::Run(lines) if lines.is_empty() => {}
                Cmd::Run(lines) => {
                    out.push_str("RUN ");
                    out.push_str(&lines.join(" \\\n    && "));
                    out.push('\n');
                }
            }
        }
    }
    out
}

/// Strict-mode bash script equivalent to [`emit_buildfile`]. Each step runs in
/// its own subshell so `cd` does not leak between steps.
pub fn emit_shell(p: &BuildPlan) -> String {
    let mut out = String::new();
    out.push_str("#!/usr/bin/env bash\n");
    out.push_str("# generated by iceforge; do not edit\n");
    out.push_str("set -euo pipefail\n");
    let _ = writeln!(out, "export ICEFORGE_ROOT={}", sq(p.layout.root()));
    out.push_str("ICEFORGE_CONTEXT=\"${ICEFORGE_CONTEXT:-$PWD}\"\n");
    let _ = writeln!(out, "mkdir -p {}", sq(&p.layout.bin_dir()));
    let global = sq(&p.layout.global_env());
    let _ = writeln!(out, "[ -x {global}/bin/python ] || python3 -m venv {global}");

    let total = p.steps.len();
    for (i, step) in p.steps.iter().enumerate() {
        out.push('\n');
        out.push_str(&marker(i, total, step));
        out.push_str("\n(\n");
        for cmd in commands(step) {
            match cmd {
                Cmd::Copy { src, dest, dir: true, .. } => {
                    let _ = writeln!(out, "  mkdir -p {}", sq(&dest));
                    let _ = writeln!(out, "  cp -a \"$ICEFORGE_CONTEXT/{src}.\" {}", sq(&dest));
                }
                Cmd::Copy { src, dest, dir: false, mode } => {
                    let _ = writeln!(out, "  install -D -m {} \"$ICEFORGE_CONTEXT/{src}\" {}", mode.unwrap_or("0644"), sq(&dest));
                }
                Cmd::Run(lines) => {
                    for l in lines {
                        let _ = writeln!(out, "  {l}");
                    }
                }
            }
        }
        out.push_str(")\n");
    }
    out
}
