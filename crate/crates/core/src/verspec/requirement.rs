use std::fmt;
use std::str::FromStr;

use super::version::{compare_versions, parse_version, Version};
use super::RequirementError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operator {
    Eq,
    Ne,
    Ge,
    Le,
    Gt,
    Lt,
    Compatible,
}

impl Operator {
    pub fn as_str(self) -> &'static str {
        match self {
            Operator::Eq => "==",
            Operator::Ne => "!=",
            Operator::Ge => ">=",
            Operator::Le => "<=",
            Operator::Gt => ">",
            Operator::Lt => "<",
            Operator::Compatible => "~=",
        }
    }

    // Two-character operators first so `>=` is not read as `>`.
    const ALL: [Operator; 7] = [
        Operator::Compatible,
        Operator::Eq,
        Operator::Ne,
        Operator::Ge,
        Operator::Le,
        Operator::Gt,
        Operator::Lt,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Specifier {
    pub op: Operator,
    pub version: Version,
}

impl Specifier {
    pub fn new(op: Operator, version: Version) -> Self {
        Specifier { op, version }
    }

    pub fn contains(&self, v: &Version) -> bool {
        let ord = compare_versions(v, &self.version);
        match self.op {
            Operator::Eq => ord.is_eq(),
            Operator::Ne => ord.is_ne(),
            Operator::Ge => ord.is_ge(),
            Operator::Le => ord.is_le(),
            Operator::Gt => ord.is_gt(),
            Operator::Lt => ord.is_lt(),
            Operator::Compatible => {
                // `~=X.Y.Z` is `>=X.Y.Z` plus a prefix match on `X.Y`.
                let prefix = self.version.release().len() - 1;
                ord.is_ge() && (0..prefix).all(|i| v.segment(i) == self.version.segment(i))
            }
        }
    }
}

impl fmt::Display for Specifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.op.as_str(), self.version)
    }
}

/// A package name plus a conjunction of version specifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Requirement {
    pub name: String,
    pub specifiers: Vec<Specifier>,
}

/// Lowercases and maps `_` to `-`, so `Foo_Bar` and `foo-bar` name the same
/// package.
pub fn normalize_name(name: &str) -> String {
    name.to_ascii_lowercase().replace('_', "-")
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')
}

pub fn parse_requirement(text: &str) -> Result<Requirement, RequirementError> {
    let malformed = |reason: &str| RequirementError::Malformed {
        input: text.to_string(),
        reason: reason.to_string(),
    };
    let text_trimmed = text.trim();
    let name_len = text_trimmed
        .find(|c: char| !is_name_char(c))
        .unwrap_or(text_trimmed.len());
    let name = &text_trimmed[..name_len];
    if !name.starts_with(|c: char| c.is_ascii_alphanumeric()) {
        return Err(malformed("requirement must start with a package name"));
    }
    let rest = text_trimmed[name_len..].trim_start();

    let mut specifiers = Vec::new();
    if !rest.is_empty() {
        for part in rest.split(',') {
            specifiers.push(parse_specifier(part.trim()).map_err(|e| match e {
                SpecError::Malformed(reason) => malformed(&reason),
                SpecError::Version(v) => RequirementError::Version(v),
            })?);
        }
    }
    Ok(Requirement {
        name: normalize_name(name),
        specifiers,
    })
}

enum SpecError {
    Malformed(String),
    Version(super::VersionError),
}

fn parse_specifier(part: &str) -> Result<Specifier, SpecError> {
    if part.is_empty() {
        return Err(SpecError::Malformed("empty specifier".into()));
    }
    let op = Operator::ALL
        .into_iter()
        .find(|op| part.starts_with(op.as_str()))
        .ok_or_else(|| SpecError::Malformed(format!("unknown operator in {part:?}")))?;
    let version_text = part[op.as_str().len()..].trim();
    if version_text.starts_with(['=', '<', '>', '!', '~']) {
        return Err(SpecError::Malformed(format!("unknown operator in {part:?}")));
    }
    let version = parse_version(version_text).map_err(SpecError::Version)?;
    if op == Operator::Compatible && version.release().len() < 2 {
        return Err(SpecError::Malformed(
            "~= needs at least two release segments".into(),
        ));
    }
    Ok(Specifier { op, version })
}

pub fn satisfies(v: &Version, r: &Requirement) -> bool {
    r.specifiers.iter().all(|s| s.contains(v))
}

impl Requirement {
    pub fn any(name: &str) -> Self {
        Requirement {
            name: normalize_name(name),
            specifiers: Vec::new(),
        }
    }

    pub fn is_satisfied_by(&self, v: &Version) -> bool {
        satisfies(v, self)
    }
}

impl FromStr for Requirement {
    type Err = RequirementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_requirement(s)
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for (i, spec) in self.specifiers.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{spec}")?;
        }
        Ok(())
    }
}
