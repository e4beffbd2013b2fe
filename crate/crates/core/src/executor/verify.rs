use std::collections::BTreeSet;
use std::fmt;

use super::Layout;
use crate::manifest::{classify_tool, Manifest, ToolClass};
use crate::verspec::{check_pins, parse_lockfile, Unsatisfied};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayoutViolation {
    MissingTool { tool: String },
    MissingSymlink { cli_name: String, wrapper: String },
    DuplicateSymlink { cli_name: String, others: Vec<String> },
    DanglingSymlink { cli_name: String, target: String },
    MalformedWrapper { wrapper: String },
    MissingExecTarget { wrapper: String, target: String },
    UnexpectedSymlink { cli_name: String, tool: String },
    UnsatisfiedPin(Unsatisfied),
    LockfileMismatch { detail: String },
}

impl fmt::Display for LayoutViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutViolation::MissingTool { tool } => write!(f, "MissingTool: {tool} is not installed"),
            LayoutViolation::MissingSymlink { cli_name, wrapper } => {
                write!(f, "MissingSymlink: bin/{cli_name} does not point to {wrapper}")
            }
            LayoutViolation::DuplicateSymlink { cli_name, others } => {
                write!(f, "DuplicateSymlink: wrapper for {cli_name} is also linked as {}", others.join(", "))
            }
            LayoutViolation::DanglingSymlink { cli_name, target } => {
                write!(f, "DanglingSymlink: bin/{cli_name} -> {target} does not exist")
            }
            LayoutViolation::MalformedWrapper { wrapper } => write!(f, "MalformedWrapper: {wrapper}"),
            LayoutViolation::MissingExecTarget { wrapper, target } => {
                write!(f, "MissingExecTarget: {wrapper} runs {target}, which does not exist")
            }
            LayoutViolation::UnexpectedSymlink { cli_name, tool } => {
                write!(f, "UnexpectedSymlink: bin/{cli_name} exposes dynamic tool {tool}")
            }
            LayoutViolation::UnsatisfiedPin(u) => write!(f, "UnsatisfiedPin: {u}"),
            LayoutViolation::LockfileMismatch { detail } => write!(f, "LockfileMismatch: {detail}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerificationReport {
    pub violations: Vec<LayoutViolation>,
}

impl VerificationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The absolute path a generated wrapper ends up executing.
fn exec_target(text: &str) -> Option<String> {
    let body = text.strip_prefix("#!/bin/sh\n")?.strip_suffix('\n')?;
    if let Some(rest) = body.strip_prefix("exec \"") {
        let (target, tail) = rest.split_once('"')?;
        return (tail == " \"$@\"").then(|| target.to_string());
    }
    let rest = body.strip_prefix("cd \"")?;
    let (dir, rest) = rest.split_once('"')?;
    let entry = rest.strip_prefix(" && exec \"./")?.strip_suffix("\" \"$@\"")?;
    Some(format!("{dir}/{entry}"))
}

/// Read-only checks of a finished layout against its manifest.
pub fn verify_layout(l: &Layout, m: &Manifest) -> VerificationReport {
    let mut violations = Vec::new();
    let exists = |abs: &str| l.paths.relative(abs).is_some_and(|rel| l.root.contains(rel));

    for tool in m.tools() {
        if !l.installed.contains_key(&tool.name) {
            violations.push(LayoutViolation::MissingTool { tool: tool.name.clone() });
        }
    }

    // Dynamic tools must not be reachable from bin.
    let mut unexpected = BTreeSet::new();
    for tool in m.tools() {
        if classify_tool(m, &tool.name) != Ok(ToolClass::DynamicGlobal) {
            continue;
        }
        let mut names: BTreeSet<&str> = tool.entrypoints.iter().map(|e| e.cli_name.as_str()).collect();
        names.insert(&tool.name);
        let wrapper_dir = format!("{}/cli_scripts/{}/", l.paths.root(), tool.name);
        for (cli, target) in &l.symlinks {
            if names.contains(cli.as_str()) || target.starts_with(&wrapper_dir) {
                unexpected.insert(cli.clone());
                violations.push(LayoutViolation::UnexpectedSymlink { cli_name: cli.clone(), tool: tool.name.clone() });
            }
        }
    }

    for (cli, target) in &l.symlinks {
        if !unexpected.contains(cli) && !exists(target) {
            violations.push(LayoutViolation::DanglingSymlink { cli_name: cli.clone(), target: target.clone() });
        }
    }

    for tool in m.tools() {
        if !classify_tool(m, &tool.name).is_ok_and(ToolClass::is_static) {
            continue;
        }
        for ep in &tool.entrypoints {
            let wrapper = l.paths.wrapper(&tool.name, &ep.cli_name);
            if l.symlinks.get(&ep.cli_name) != Some(&wrapper) {
                violations.push(LayoutViolation::MissingSymlink { cli_name: ep.cli_name.clone(), wrapper: wrapper.clone() });
            }
            let others: Vec<String> = l
                .symlinks
                .iter()
                .filter(|(cli, t)| **t == wrapper && **cli != ep.cli_name)
                .map(|(cli, _)| cli.clone())
                .collect();
            if !others.is_empty() {
                violations.push(LayoutViolation::DuplicateSymlink { cli_name: ep.cli_name.clone(), others });
            }
            let Some(text) = l.paths.relative(&wrapper).and_then(|rel| l.root.get(rel)) else {
                continue;
            };
            match exec_target(&String::from_utf8_lossy(text)) {
                Some(target) if exists(&target) => {}
                Some(target) => violations.push(LayoutViolation::MissingExecTarget { wrapper, target }),
                None => violations.push(LayoutViolation::MalformedWrapper { wrapper }),
            }
        }
    }

    violations.extend(check_pins(&l.global_env_packages, &l.contributions).into_iter().map(LayoutViolation::UnsatisfiedPin));

    let lock_rel = l.paths.relative(&l.paths.lockfile()).expect("lockfile lives under the root").to_string();
    match l.root.get(&lock_rel) {
        Some(bytes) => match parse_lockfile(&String::from_utf8_lossy(bytes)) {
            Ok(pins) if pins == l.global_env_packages => {}
            Ok(_) => violations.push(LayoutViolation::LockfileMismatch {
                detail: "lockfile pins differ from the global environment".into(),
            }),
            Err(e) => violations.push(LayoutViolation::LockfileMismatch { detail: e.to_string() }),
        },
        None if !l.global_env_packages.is_empty() => violations.push(LayoutViolation::LockfileMismatch {
            detail: format!("{} is missing", l.paths.lockfile()),
        }),
        None => {}
    }

    VerificationReport { violations }
}
