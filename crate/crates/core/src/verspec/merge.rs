use std::collections::BTreeMap;
use std::fmt;

use super::requirement::{normalize_name, Requirement, Specifier};
use super::version::{parse_version, Version};
use super::{LockfileError, MergeError};

/// Source of the versions a package index can offer.
pub trait AvailableVersions {
    /// All known versions of `package` (normalized name), or `None` if the
    /// package is unknown.
    fn available_versions(&self, package: &str) -> Option<Vec<Version>>;
}

impl AvailableVersions for BTreeMap<String, Vec<Version>> {
    fn available_versions(&self, package: &str) -> Option<Vec<Version>> {
        self.get(package).cloned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeStatus {
    Ok,
    Conflict,
}

/// The specifiers one tool places on one package.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contribution {
    pub tool: String,
    pub specifiers: Vec<Specifier>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub package: String,
    pub contributors: Vec<Contribution>,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.package)?;
        for (i, c) in self.contributors.iter().enumerate() {
            let specs: Vec<String> = c.specifiers.iter().map(ToString::to_string).collect();
            let specs = if specs.is_empty() { "*".to_string() } else { specs.join(",") };
            let sep = if i == 0 { " " } else { "; " };
            write!(f, "{sep}{} requires {specs}", c.tool)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeResult {
    pub status: MergeStatus,
    /// Selected versions; empty unless `status` is `Ok`.
    pub pins: BTreeMap<String, Version>,
    /// Every package with no satisfying version; empty unless `status` is `Conflict`.
    pub conflicts: Vec<Conflict>,
}

impl MergeResult {
    pub fn is_ok(&self) -> bool {
        self.status == MergeStatus::Ok
    }
}

/// Groups the requirements of every tool by package, keeping tool order.
fn contributions(
    req_sets: &BTreeMap<String, Vec<Requirement>>,
) -> BTreeMap<String, Vec<Contribution>> {
    let mut by_package: BTreeMap<String, Vec<Contribution>> = BTreeMap::new();
    for (tool, reqs) in req_sets {
        for req in reqs {
            let entry = by_package.entry(normalize_name(&req.name)).or_default();
            match entry.last_mut() {
                Some(last) if &last.tool == tool => {
                    last.specifiers.extend(req.specifiers.iter().cloned())
                }
                _ => entry.push(Contribution {
                    tool: tool.clone(),
                    specifiers: req.specifiers.clone(),
                }),
            }
        }
    }
    by_package
}

/// Pins every referenced package to the highest available version allowed by
/// all contributing tools, or reports every package where no version fits.
pub fn merge_global_requirements(
    req_sets: &BTreeMap<String, Vec<Requirement>>,
    index: &impl AvailableVersions,
) -> Result<MergeResult, MergeError> {
    let mut pins = BTreeMap::new();
    let mut conflicts = Vec::new();

    for (package, contributors) in contributions(req_sets) {
        let available = index
            .available_versions(&package)
            .ok_or_else(|| MergeError::UnknownPackage {
                package: package.clone(),
                tools: contributors.iter().map(|c| c.tool.clone()).collect(),
            })?;
        let best = available
            .into_iter()
            .filter(|v| {
                contributors
                    .iter()
                    .all(|c| c.specifiers.iter().all(|s| s.contains(v)))
            })
            .max();
        match best {
            Some(v) => {
                pins.insert(package, v);
            }
            None => conflicts.push(Conflict {
                package,
                contributors,
            }),
        }
    }

    if conflicts.is_empty() {
        Ok(MergeResult {
            status: MergeStatus::Ok,
            pins,
            conflicts,
        })
    } else {
        Ok(MergeResult {
            status: MergeStatus::Conflict,
            pins: BTreeMap::new(),
            conflicts,
        })
    }
}

/// A requirement that a set of pins fails to meet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unsatisfied {
    pub tool: String,
    pub requirement: Requirement,
    pub pinned: Option<Version>,
}

impl fmt::Display for Unsatisfied {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.pinned {
            Some(v) => write!(f, "{} requires {} but {}=={} is pinned", self.tool, self.requirement, self.requirement.name, v),
            None => write!(f, "{} requires {} but it is not pinned", self.tool, self.requirement),
        }
    }
}

/// Checks a (possibly hand-curated) set of pins against requirement sets.
pub fn check_pins(
    pins: &BTreeMap<String, Version>,
    req_sets: &BTreeMap<String, Vec<Requirement>>,
) -> Vec<Unsatisfied> {
    let mut out = Vec::new();
    for (tool, reqs) in req_sets {
        for req in reqs {
            let pinned = pins.get(&normalize_name(&req.name));
            if !pinned.is_some_and(|v| req.is_satisfied_by(v)) {
                out.push(Unsatisfied {
                    tool: tool.clone(),
                    requirement: req.clone(),
                    pinned: pinned.cloned(),
                });
            }
        }
    }
    out
}

/// One `name==version` per line, sorted by name, with a trailing newline.
pub fn render_lockfile(pins: &BTreeMap<String, Version>) -> String {
    let mut out = String::new();
    for (name, version) in pins {
        out.push_str(name);
        out.push_str("==");
        out.push_str(&version.to_string());
        out.push('\n');
    }
    out
}

/// Parses a lockfile. Blank lines and `#` comments are ignored.
pub fn parse_lockfile(text: &str) -> Result<BTreeMap<String, Version>, LockfileError> {
    let mut pins = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| LockfileError { line: i + 1, reason };
        let (name, version) = line
            .split_once("==")
            .ok_or_else(|| err(format!("expected name==version, found {line:?}")))?;
        let version = parse_version(version.trim()).map_err(|e| err(e.to_string()))?;
        let name = normalize_name(name.trim());
        if pins.insert(name.clone(), version).is_some() {
            return Err(err(format!("{name} pinned twice")));
        }
    }
    Ok(pins)
}
