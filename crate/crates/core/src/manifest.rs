//! Tool manifests.
//!
//! A manifest mirrors the configuration lists at the top of a container build
//! file: `python_tools`, `nodejs_tools`, the `system_tools` and `git_tools`
//! override sets, and the curated `global_requirements`. It is TOML in which
//! every value is an array of strings:
//!
//! ```text
//! python_tools = ["garak==0.10.2", "pyrit==0.9.0", "easyedit"]
//! nodejs_tools = ["promptfoo@0.107.0"]
//! system_tools = ["pyrit"]
//! git_tools = ["easyedit=https://github.com/zjunlp/EasyEdit#<40 hex>"]
//! global_requirements = ["pyrit>=0.9"]
//!
//! [tool.easyedit]
//! entrypoints = ["easyedit:bin/python"]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::verspec::{parse_requirement, parse_version};

/// Version of the manifest grammar accepted by [`parse_manifest`].
pub const GRAMMAR_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ecosystem {
    Py,
    Js,
}

impl Ecosystem {
    pub fn as_str(self) -> &'static str {
        match self {
            Ecosystem::Py => "py",
            Ecosystem::Js => "js",
        }
    }
}

impl fmt::Display for Ecosystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Index,
    Git,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Environment {
    Isolated,
    Global,
    Project,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Entrypoint {
    pub cli_name: String,
    /// Executable path relative to the tool's environment or project directory.
    pub entry: String,
}

impl Entrypoint {
    pub fn new(cli_name: impl Into<String>, entry: impl Into<String>) -> Self {
        Entrypoint {
            cli_name: cli_name.into(),
            entry: entry.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GitPin {
    pub url: String,
    pub commit: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolSpec {
    pub name: String,
    pub ecosystem: Ecosystem,
    pub source: Source,
    pub version_pin: Option<String>,
    pub git_url: Option<String>,
    pub git_commit: Option<String>,
    pub environment: Environment,
    pub entrypoints: Vec<Entrypoint>,
}

impl ToolSpec {
    /// A tool fetched from its package index, with default entrypoints.
    pub fn index(name: &str, ecosystem: Ecosystem, version: &str) -> Self {
        ToolSpec {
            name: name.to_string(),
            ecosystem,
            source: Source::Index,
            version_pin: Some(version.to_string()),
            git_url: None,
            git_commit: None,
            environment: match ecosystem {
                Ecosystem::Py => Environment::Isolated,
                Ecosystem::Js => Environment::Project,
            },
            entrypoints: default_entrypoints(name, ecosystem),
        }
    }

    pub fn git_pin(&self) -> Option<GitPin> {
        Some(GitPin {
            url: self.git_url.clone()?,
            commit: self.git_commit.clone()?,
        })
    }
}

/// `bin/<name>` for Python tools, `node_modules/.bin/<name>` for Node tools.
pub fn default_entrypoints(name: &str, ecosystem: Ecosystem) -> Vec<Entrypoint> {
    let entry = match ecosystem {
        Ecosystem::Py => format!("bin/{name}"),
        Ecosystem::Js => format!("node_modules/.bin/{name}"),
    };
    vec![Entrypoint::new(name, entry)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ToolClass {
    StaticIsolated,
    DynamicGlobal,
    StaticProject,
}

impl ToolClass {
    pub fn is_static(self) -> bool {
        !matches!(self, ToolClass::DynamicGlobal)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub python_tools: Vec<ToolSpec>,
    pub nodejs_tools: Vec<ToolSpec>,
    pub system_tools: BTreeSet<String>,
    pub git_tools: BTreeMap<String, GitPin>,
    pub global_requirements: Vec<String>,
}

impl Manifest {
    /// Python tools followed by Node tools, in declaration order.
    pub fn tools(&self) -> impl Iterator<Item = &ToolSpec> {
        self.python_tools.iter().chain(&self.nodejs_tools)
    }

    pub fn tool(&self, name: &str) -> Option<&ToolSpec> {
        self.tools().find(|t| t.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.python_tools.is_empty()
            && self.nodejs_tools.is_empty()
            && self.system_tools.is_empty()
            && self.git_tools.is_empty()
            && self.global_requirements.is_empty()
    }

    /// Class of a tool by name; see [`classify_tool`].
    pub fn class_of(&self, name: &str) -> Result<ToolClass, ManifestError> {
        classify_tool(self, name)
    }
}

pub fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-' || b == b'_')
}

pub fn is_commit_hash(s: &str) -> bool {
    s.len() == 40 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OverrideList {
    System,
    Git,
    ToolTable,
}

impl fmt::Display for OverrideList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverrideList::System => "system_tools",
            OverrideList::Git => "git_tools",
            OverrideList::ToolTable => "[tool.*] table",
        })
    }
}

/// A reason a manifest cannot be built. Violations are reported as data by
/// [`validate_manifest`]; [`parse_manifest`] turns the first one into an error.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Error)]
pub enum Violation {
    #[error("invalid tool name {name:?} (expected [a-z0-9_-]+)")]
    InvalidName { name: String },
    #[error("tool {name} is declared more than once")]
    DuplicateTool { name: String },
    #[error("{list} names {name}, which is not in python_tools")]
    DanglingOverride { list: OverrideList, name: String },
    #[error("{list} names {name}, which is a Node tool; overrides apply to Python tools only")]
    NodeToolOverride { list: OverrideList, name: String },
    #[error("tool {name} has environment/source fields that disagree with the override lists")]
    OverrideMismatch { name: String },
    #[error("tool {name} is fetched from an index but has no version pin")]
    MissingPin { name: String },
    #[error("tool {name} has unparseable version pin {pin:?}")]
    MalformedPin { name: String, pin: String },
    #[error("tool {name} is fetched from git but has no repository URL")]
    MissingGitUrl { name: String },
    #[error("tool {name} has malformed commit {commit:?} (expected 40 lowercase hex characters)")]
    MalformedCommit { name: String, commit: String },
    #[error("tool {name} uses an environment its ecosystem does not support")]
    EnvironmentMismatch { name: String },
    #[error("tool {tool} has invalid CLI name {cli_name:?}")]
    InvalidCliName { tool: String, cli_name: String },
    #[error("tool {tool} has invalid entry path {entry:?}")]
    InvalidEntryPath { tool: String, entry: String },
    #[error("tool {tool} declares CLI name {cli_name} twice")]
    DuplicateEntrypoint { tool: String, cli_name: String },
    #[error("CLI name {cli_name} is exposed by several tools: {}", tools.join(", "))]
    CliNameCollision { cli_name: String, tools: Vec<String> },
    #[error("global requirement {requirement:?} is malformed: {reason}")]
    MalformedRequirement { requirement: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Invalid(#[from] Violation),
    #[error("unknown tool {0}")]
    UnknownTool(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Parses and validates a manifest.
///
/// CLI-name collisions are left to [`validate_manifest`]; every other
/// violation makes parsing fail.
pub fn parse_manifest(text: &str) -> Result<Manifest, ManifestError> {
    let (manifest, diagnostics) = parse_unvalidated(text)?;
    let report = validate_manifest(&manifest);
    if let Some(v) = diagnostics
        .into_iter()
        .chain(report.violations)
        .find(|v| !matches!(v, Violation::CliNameCollision { .. }))
    {
        return Err(v.into());
    }
    Ok(manifest)
}

/// Parses a manifest without validating it. Problems that the [`Manifest`]
/// value cannot represent (such as a `[tool.x]` table for an undeclared tool)
/// are returned alongside.
pub fn parse_unvalidated(text: &str) -> Result<(Manifest, Vec<Violation>), SyntaxError> {
    let doc = syntax::parse(text)?;
    build(doc)
}

fn build(doc: syntax::Document) -> Result<(Manifest, Vec<Violation>), SyntaxError> {
    let mut lists: BTreeMap<&str, Vec<syntax::Str>> = BTreeMap::new();
    for (key, values) in doc.top {
        const KEYS: [&str; 5] = [
            "python_tools",
            "nodejs_tools",
            "system_tools",
            "git_tools",
            "global_requirements",
        ];
        let Some(known) = KEYS.iter().find(|k| **k == key.value) else {
            return Err(key.error(format!("unknown key {:?}", key.value)));
        };
        lists.insert(known, values);
    }
    let mut take = |k: &str| lists.remove(k).unwrap_or_default();

    let mut python_tools = Vec::new();
    for s in take("python_tools") {
        let (name, pin) = match s.value.split_once("==") {
            Some((n, v)) => {
                if v.is_empty() {
                    return Err(s.error("empty version after `==`".into()));
                }
                (n, Some(v.to_string()))
            }
            None => (s.value.as_str(), None),
        };
        let mut tool = ToolSpec::index(name, Ecosystem::Py, "");
        tool.version_pin = pin;
        python_tools.push(tool);
    }

    let mut nodejs_tools = Vec::new();
    for s in take("nodejs_tools") {
        let (name, pin) = match s.value.split_once('@') {
            Some((n, v)) => {
                if v.is_empty() {
                    return Err(s.error("empty version after `@`".into()));
                }
                (n, Some(v.to_string()))
            }
            None => (s.value.as_str(), None),
        };
        let mut tool = ToolSpec::index(name, Ecosystem::Js, "");
        tool.version_pin = pin;
        nodejs_tools.push(tool);
    }

    let mut system_tools = BTreeSet::new();
    for s in take("system_tools") {
        if !system_tools.insert(s.value.clone()) {
            return Err(s.error(format!("{} listed twice in system_tools", s.value)));
        }
    }

    let mut git_tools = BTreeMap::new();
    for s in take("git_tools") {
        let (name, rest) = s
            .value
            .split_once('=')
            .ok_or_else(|| s.error("expected `name=url#commit`".into()))?;
        let (url, commit) = rest
            .rsplit_once('#')
            .ok_or_else(|| s.error("expected `name=url#commit`".into()))?;
        if url.is_empty() || url.contains(char::is_whitespace) {
            return Err(s.error("git URL must be non-empty and contain no whitespace".into()));
        }
        let pin = GitPin {
            url: url.to_string(),
            commit: commit.to_string(),
        };
        if git_tools.insert(name.to_string(), pin).is_some() {
            return Err(s.error(format!("{name} listed twice in git_tools")));
        }
    }

    let global_requirements = take("global_requirements")
        .into_iter()
        .map(|s| s.value)
        .collect();

    for tool in &mut python_tools {
        if let Some(pin) = git_tools.get(&tool.name) {
            tool.source = Source::Git;
            tool.git_url = Some(pin.url.clone());
            tool.git_commit = Some(pin.commit.clone());
        }
        if system_tools.contains(&tool.name) {
            tool.environment = Environment::Global;
        }
    }

    let mut diagnostics = Vec::new();
    for table in doc.tables {
        let Some(name) = table.header.value.strip_prefix("tool.") else {
            return Err(table.header.error(format!("unknown table [{}]", table.header.value)));
        };
        let mut entrypoints = None;
        for (key, values) in table.entries {
            if key.value != "entrypoints" {
                return Err(key.error(format!("unknown key {:?} in [tool.{name}]", key.value)));
            }
            let mut eps = Vec::new();
            for s in values {
                let (cli, entry) = s
                    .value
                    .split_once(':')
                    .ok_or_else(|| s.error("expected `cli_name:relative/path`".into()))?;
                eps.push(Entrypoint::new(cli, entry));
            }
            entrypoints = Some(eps);
        }
        let targets: Vec<&mut ToolSpec> = python_tools
            .iter_mut()
            .chain(nodejs_tools.iter_mut())
            .filter(|t| t.name == name)
            .collect();
        if targets.is_empty() {
            diagnostics.push(Violation::DanglingOverride {
                list: OverrideList::ToolTable,
                name: name.to_string(),
            });
        }
        if let Some(eps) = entrypoints {
            for t in targets {
                t.entrypoints = eps.clone();
            }
        }
    }

    Ok((
        Manifest {
            python_tools,
            nodejs_tools,
            system_tools,
            git_tools,
            global_requirements,
        },
        diagnostics,
    ))
}

/// Reports every invariant violation in `m`, plus CLI-name collisions across
/// static tools.
pub fn validate_manifest(m: &Manifest) -> ValidationReport {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    for tool in m.tools() {
        if !is_identifier(&tool.name) {
            out.push(Violation::InvalidName { name: tool.name.clone() });
        }
        if !seen.insert(tool.name.as_str()) {
            out.push(Violation::DuplicateTool { name: tool.name.clone() });
        }
    }

    let py: BTreeSet<&str> = m.python_tools.iter().map(|t| t.name.as_str()).collect();
    let js: BTreeSet<&str> = m.nodejs_tools.iter().map(|t| t.name.as_str()).collect();
    let overrides = m
        .system_tools
        .iter()
        .map(|n| (OverrideList::System, n))
        .chain(m.git_tools.keys().map(|n| (OverrideList::Git, n)));
    for (list, name) in overrides {
        if js.contains(name.as_str()) {
            out.push(Violation::NodeToolOverride { list, name: name.clone() });
        } else if !py.contains(name.as_str()) {
            out.push(Violation::DanglingOverride { list, name: name.clone() });
        }
    }

    for tool in m.tools() {
        check_tool(m, tool, &mut out);
    }

    // Only static tools get bin links, so only their names can collide.
    let mut owners: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for tool in m.tools() {
        if !tool_class(m, tool).is_static() {
            continue;
        }
        let names: BTreeSet<&str> = tool.entrypoints.iter().map(|e| e.cli_name.as_str()).collect();
        for cli in names {
            owners.entry(cli).or_default().push(tool.name.clone());
        }
    }
    for (cli, tools) in owners {
        if tools.len() > 1 {
            out.push(Violation::CliNameCollision { cli_name: cli.to_string(), tools });
        }
    }

    for req in &m.global_requirements {
        if let Err(e) = parse_requirement(req) {
            out.push(Violation::MalformedRequirement {
                requirement: req.clone(),
                reason: e.to_string(),
            });
        }
    }

    ValidationReport { violations: out }
}

fn check_tool(m: &Manifest, tool: &ToolSpec, out: &mut Vec<Violation>) {
    let name = || tool.name.clone();

    let env_ok = match tool.ecosystem {
        Ecosystem::Js => tool.environment == Environment::Project,
        Ecosystem::Py => matches!(tool.environment, Environment::Isolated | Environment::Global),
    };
    if !env_ok {
        out.push(Violation::EnvironmentMismatch { name: name() });
    }
    if tool.ecosystem == Ecosystem::Py {
        let global = tool.environment == Environment::Global;
        let git = tool.source == Source::Git;
        let pin_matches = m
            .git_tools
            .get(&tool.name)
            .is_some_and(|p| Some(&p.url) == tool.git_url.as_ref() && Some(&p.commit) == tool.git_commit.as_ref());
        if global != m.system_tools.contains(&tool.name)
            || git != m.git_tools.contains_key(&tool.name)
            || (git && !pin_matches)
        {
            out.push(Violation::OverrideMismatch { name: name() });
        }
    } else if tool.source == Source::Git {
        out.push(Violation::OverrideMismatch { name: name() });
    }

    match tool.source {
        Source::Index => match &tool.version_pin {
            None => out.push(Violation::MissingPin { name: name() }),
            Some(pin) if parse_version(pin).is_err() => out.push(Violation::MalformedPin {
                name: name(),
                pin: pin.clone(),
            }),
            Some(_) => {}
        },
        Source::Git => {
            if tool.git_url.as_deref().is_none_or(str::is_empty) {
                out.push(Violation::MissingGitUrl { name: name() });
            }
            let commit = tool.git_commit.clone().unwrap_or_default();
            if !is_commit_hash(&commit) {
                out.push(Violation::MalformedCommit { name: name(), commit });
            }
            if let Some(pin) = &tool.version_pin {
                if parse_version(pin).is_err() {
                    out.push(Violation::MalformedPin { name: name(), pin: pin.clone() });
                }
            }
        }
    }

    let mut clis = BTreeSet::new();
    for ep in &tool.entrypoints {
        if !is_identifier(&ep.cli_name) {
            out.push(Violation::InvalidCliName { tool: name(), cli_name: ep.cli_name.clone() });
        }
        if !crate::tree::is_normalized_path(&ep.entry) {
            out.push(Violation::InvalidEntryPath { tool: name(), entry: ep.entry.clone() });
        }
        if !clis.insert(ep.cli_name.as_str()) {
            out.push(Violation::DuplicateEntrypoint { tool: name(), cli_name: ep.cli_name.clone() });
        }
    }
}

fn tool_class(m: &Manifest, tool: &ToolSpec) -> ToolClass {
    if m.system_tools.contains(&tool.name) {
        ToolClass::DynamicGlobal
    } else if tool.ecosystem == Ecosystem::Js {
        ToolClass::StaticProject
    } else {
        ToolClass::StaticIsolated
    }
}

/// Static tools run from their own environment or project through a CLI;
/// dynamic tools (those in `system_tools`) live in the shared environment.
pub fn classify_tool(m: &Manifest, name: &str) -> Result<ToolClass, ManifestError> {
    let tool = m
        .tool(name)
        .ok_or_else(|| ManifestError::UnknownTool(name.to_string()))?;
    Ok(tool_class(m, tool))
}

/// Renders `m` in canonical form; [`parse_manifest`] of the result yields `m`.
pub fn render_manifest(m: &Manifest) -> String {
    fn list(out: &mut String, key: &str, items: impl IntoIterator<Item = String>) {
        let items: Vec<String> = items.into_iter().map(|s| quote(&s)).collect();
        out.push_str(&format!("{key} = [{}]\n", items.join(", ")));
    }

    let mut out = String::new();
    list(
        &mut out,
        "python_tools",
        m.python_tools.iter().map(|t| match &t.version_pin {
            Some(v) => format!("{}=={v}", t.name),
            None => t.name.clone(),
        }),
    );
    list(
        &mut out,
        "nodejs_tools",
        m.nodejs_tools.iter().map(|t| match &t.version_pin {
            Some(v) => format!("{}@{v}", t.name),
            None => t.name.clone(),
        }),
    );
    list(&mut out, "system_tools", m.system_tools.iter().cloned());
    list(
        &mut out,
        "git_tools",
        m.git_tools.iter().map(|(n, p)| format!("{n}={}#{}", p.url, p.commit)),
    );
    list(&mut out, "global_requirements", m.global_requirements.iter().cloned());

    for tool in m.tools() {
        if tool.entrypoints != default_entrypoints(&tool.name, tool.ecosystem) {
            out.push_str(&format!("\n[tool.{}]\n", tool.name));
            list(
                &mut out,
                "entrypoints",
                tool.entrypoints.iter().map(|e| format!("{}:{}", e.cli_name, e.entry)),
            );
        }
    }
    out
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

mod syntax {
    //! Maps a spanned TOML document onto the manifest shape: top-level arrays
    //! of strings plus `[tool.<name>]` tables holding the same.

    use std::ops::Range;

    use toml::de::{DeTable, DeValue};
    use toml::Spanned;

    use super::SyntaxError;

    #[derive(Debug)]
    pub struct Str {
        pub value: String,
        pub line: usize,
        pub column: usize,
    }

    impl Str {
        pub fn error(&self, message: String) -> SyntaxError {
            SyntaxError { line: self.line, column: self.column, message }
        }
    }

    pub struct Table {
        pub header: Str,
        pub entries: Vec<(Str, Vec<Str>)>,
    }

    pub struct Document {
        pub top: Vec<(Str, Vec<Str>)>,
        pub tables: Vec<Table>,
    }

    /// 1-based line and column (in characters) of a byte offset.
    fn position(text: &str, offset: usize) -> (usize, usize) {
        let before = &text[..offset.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        (line, before[line_start..].chars().count() + 1)
    }

    fn at(text: &str, span: Range<usize>, value: String) -> Str {
        let (line, column) = position(text, span.start);
        Str { value, line, column }
    }

    fn key(text: &str, k: &Spanned<std::borrow::Cow<'_, str>>) -> Str {
        at(text, k.span(), k.get_ref().to_string())
    }

    fn strings(text: &str, k: &Str, v: &Spanned<DeValue<'_>>) -> Result<Vec<Str>, SyntaxError> {
        let DeValue::Array(items) = v.get_ref() else {
            let (line, column) = position(text, v.span().start);
            return Err(SyntaxError { line, column, message: format!("{} must be an array of strings", k.value) });
        };
        items
            .iter()
            .map(|item| {
                let s = at(text, item.span(), String::new());
                match item.get_ref() {
                    DeValue::String(value) if value.chars().any(|c| c.is_control() && c != '\t') => {
                        Err(s.error("control character in string".into()))
                    }
                    DeValue::String(value) => Ok(Str { value: value.to_string(), ..s }),
                    _ => Err(s.error(format!("{} must be an array of strings", k.value))),
                }
            })
            .collect()
    }

    fn entries(text: &str, table: &DeTable<'_>) -> Result<Vec<(Str, Vec<Str>)>, SyntaxError> {
        let mut out = Vec::new();
        for (k, v) in table {
            let k = key(text, k);
            let values = strings(text, &k, v)?;
            out.push((k, values));
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Document, SyntaxError> {
        let root = DeTable::parse(text).map_err(|e| {
            let (line, column) = position(text, e.span().map_or(0, |s| s.start));
            SyntaxError { line, column, message: e.message().trim_end().to_string() }
        })?;
        let mut doc = Document { top: Vec::new(), tables: Vec::new() };
        for (k, v) in root.get_ref() {
            let name = key(text, k);
            let DeValue::Table(group) = v.get_ref() else {
                let values = strings(text, &name, v)?;
                doc.top.push((name, values));
                continue;
            };
            if name.value != "tool" {
                return Err(name.error(format!("unknown table [{}]", name.value)));
            }
            for (tk, tv) in group {
                let mut header = key(text, tk);
                header.value = format!("tool.{}", header.value);
                let DeValue::Table(body) = tv.get_ref() else {
                    return Err(header.error(format!("{} must be a table", header.value)));
                };
                doc.tables.push(Table { entries: entries(text, body)?, header });
            }
        }
        doc.tables.sort_by_key(|t| (t.header.line, t.header.column));
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COMMIT: &str = "0123456789abcdef0123456789abcdef01234567";

    #[test]
    fn single_index_tool() {
        let m = parse_manifest("python_tools = [\"garak==0.10.2\"]\n").unwrap();
        assert_eq!(m.python_tools, vec![ToolSpec::index("garak", Ecosystem::Py, "0.10.2")]);
        let t = &m.python_tools[0];
        assert_eq!(t.source, Source::Index);
        assert_eq!(t.environment, Environment::Isolated);
        assert_eq!(t.entrypoints, vec![Entrypoint::new("garak", "bin/garak")]);
    }

    #[test]
    fn empty_file_is_empty_manifest() {
        assert!(parse_manifest("").unwrap().is_empty());
        assert!(parse_manifest("# nothing here\n\n").unwrap().is_empty());
    }

    #[test]
    fn dangling_system_override() {
        let err = parse_manifest("system_tools = [\"ghost\"]").unwrap_err();
        assert_eq!(
            err,
            ManifestError::Invalid(Violation::DanglingOverride {
                list: OverrideList::System,
                name: "ghost".into()
            })
        );
    }

    #[test]
    fn overrides_resolve_into_tool_specs() {
        let text = format!(
            "python_tools = [\"pyrit==0.9.0\", \"easyedit\"]\n\
             nodejs_tools = [\"promptfoo@0.107.0\"]\n\
             system_tools = [\"pyrit\"]\n\
             git_tools = [\"easyedit=https://github.com/zjunlp/EasyEdit#{COMMIT}\"]\n"
        );
        let m = parse_manifest(&text).unwrap();
        let pyrit = m.tool("pyrit").unwrap();
        assert_eq!(pyrit.environment, Environment::Global);
        let easyedit = m.tool("easyedit").unwrap();
        assert_eq!(easyedit.source, Source::Git);
        assert_eq!(easyedit.git_commit.as_deref(), Some(COMMIT));
        assert_eq!(easyedit.version_pin, None);
        assert_eq!(classify_tool(&m, "pyrit").unwrap(), ToolClass::DynamicGlobal);
        assert_eq!(classify_tool(&m, "promptfoo").unwrap(), ToolClass::StaticProject);
        assert_eq!(classify_tool(&m, "easyedit").unwrap(), ToolClass::StaticIsolated);
        assert_eq!(classify_tool(&m, "nope"), Err(ManifestError::UnknownTool("nope".into())));
    }

    #[test]
    fn missing_pin_and_bad_commit() {
        assert_eq!(
            parse_manifest("python_tools = [\"garak\"]").unwrap_err(),
            ManifestError::Invalid(Violation::MissingPin { name: "garak".into() })
        );
        assert_eq!(
            parse_manifest("nodejs_tools = [\"promptfoo\"]").unwrap_err(),
            ManifestError::Invalid(Violation::MissingPin { name: "promptfoo".into() })
        );
        let short = &COMMIT[..39];
        let err = parse_manifest(&format!("python_tools = [\"x\"]\ngit_tools = [\"x=https://h/x#{short}\"]")).unwrap_err();
        assert!(matches!(err, ManifestError::Invalid(Violation::MalformedCommit { .. })));
    }

    #[test]
    fn duplicate_tool() {
        let err = parse_manifest("python_tools = [\"a==1\"]\nnodejs_tools = [\"a@1\"]").unwrap_err();
        assert_eq!(err, ManifestError::Invalid(Violation::DuplicateTool { name: "a".into() }));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let cases = [
            ("python_tools = [\"a==1\"", 1, 23),
            ("python_tools = [a]", 1, 17),
            ("\n\nfoo = []", 3, 1),
            ("python_tools = []\npython_tools = []", 2, 1),
            ("python_tools = [\"a==1\"] x", 1, 25),
            ("python_tools = [\"a\\n\"]", 1, 17),
            ("[tool.a]\nentrypoints = [\"nocolon\"]", 2, 16),
            ("[other]", 1, 2),
            ("git_tools = [\"x=url\"]", 1, 14),
            ("python_tools = [\"a==\"]", 1, 17),
        ];
        for (text, line, column) in cases {
            match parse_manifest(text) {
                Err(ManifestError::Syntax(e)) => {
                    assert_eq!((e.line, e.column), (line, column), "{text:?}: {e}");
                }
                other => panic!("{text:?}: expected syntax error, got {other:?}"),
            }
        }
    }

    #[test]
    fn multiline_arrays_comments_and_trailing_commas() {
        let text = "# tools\npython_tools = [\n  \"a==1\", # first\n  \"b==2\",\n]\r\n";
        let m = parse_manifest(text).unwrap();
        assert_eq!(m.python_tools.iter().map(|t| t.name.as_str()).collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn tool_tables_set_entrypoints() {
        let m = parse_manifest(
            "python_tools = [\"art==1.19.1\"]\n\n[tool.art]\nentrypoints = [\"art:bin/python\", \"art-scan:bin/scan\"]\n",
        )
        .unwrap();
        assert_eq!(
            m.python_tools[0].entrypoints,
            vec![Entrypoint::new("art", "bin/python"), Entrypoint::new("art-scan", "bin/scan")]
        );
        let err = parse_manifest("[tool.ghost]\nentrypoints = []").unwrap_err();
        assert!(matches!(err, ManifestError::Invalid(Violation::DanglingOverride { list: OverrideList::ToolTable, .. })));
    }

    #[test]
    fn validate_reports_cli_collisions_and_commits() {
        let mut m = parse_manifest("python_tools = [\"garak==1\", \"other==1\"]\n[tool.other]\nentrypoints = [\"garak:bin/g\"]").unwrap();
        let report = validate_manifest(&m);
        assert_eq!(
            report.violations,
            vec![Violation::CliNameCollision {
                cli_name: "garak".into(),
                tools: vec!["garak".into(), "other".into()]
            }]
        );

        m.system_tools.insert("other".into());
        m.python_tools[1].environment = Environment::Global;
        assert!(validate_manifest(&m).is_empty(), "global tools do not get bin links");

        let mut g = Manifest::default();
        let mut tool = ToolSpec::index("x", Ecosystem::Py, "1");
        tool.source = Source::Git;
        tool.version_pin = None;
        tool.git_url = Some("https://h/x".into());
        tool.git_commit = Some("a".repeat(39));
        g.git_tools.insert("x".into(), tool.git_pin().unwrap());
        g.python_tools.push(tool);
        assert_eq!(
            validate_manifest(&g).violations,
            vec![Violation::MalformedCommit { name: "x".into(), commit: "a".repeat(39) }]
        );
    }

    #[test]
    fn render_round_trip_keeps_escapes_and_tables() {
        let text = format!(
            "python_tools = [\"b==2\", \"a\"]\nnodejs_tools = [\"n@1.0\"]\nsystem_tools = [\"b\"]\n\
             git_tools = [\"a=https://h/a#{COMMIT}\"]\nglobal_requirements = [\"b>=1\"]\n\n[tool.n]\nentrypoints = []\n"
        );
        let m = parse_manifest(&text).unwrap();
        assert_eq!(render_manifest(&m), text);
        assert_eq!(parse_manifest(&render_manifest(&m)).unwrap(), m);
        assert_eq!(quote("a\"b\\c"), "\"a\\\"b\\\\c\"");
    }
}
