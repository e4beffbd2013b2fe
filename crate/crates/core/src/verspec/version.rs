use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use super::VersionError;

/// Pre-release phase. Declaration order is the sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrePhase {
    Alpha,
    Beta,
    Rc,
}

impl PrePhase {
    pub fn as_str(self) -> &'static str {
        match self {
            PrePhase::Alpha => "a",
            PrePhase::Beta => "b",
            PrePhase::Rc => "rc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PreRelease {
    pub phase: PrePhase,
    pub number: u64,
}

/// A release version: `N(.N)*`, an optional `aN`/`bN`/`rcN` pre-release and an
/// optional `.postN` suffix.
///
/// Equality and ordering ignore trailing zero release segments (`1.0 == 1.0.0`),
/// but [`Display`](fmt::Display) reproduces the segments as written.
#[derive(Debug, Clone)]
pub struct Version {
    release: Vec<u64>,
    pre: Option<PreRelease>,
    post: Option<u64>,
}

impl Version {
    /// Builds a version from parts. Panics on an empty release.
    pub fn new(release: Vec<u64>, pre: Option<PreRelease>, post: Option<u64>) -> Self {
        assert!(!release.is_empty(), "release must have at least one segment");
        Version { release, pre, post }
    }

    pub fn from_release(release: &[u64]) -> Self {
        Version::new(release.to_vec(), None, None)
    }

    pub fn release(&self) -> &[u64] {
        &self.release
    }

    pub fn pre(&self) -> Option<PreRelease> {
        self.pre
    }

    pub fn post(&self) -> Option<u64> {
        self.post
    }

    /// Release segments with trailing zeros removed (at least one segment kept).
    fn significant_release(&self) -> &[u64] {
        let mut end = self.release.len();
        while end > 1 && self.release[end - 1] == 0 {
            end -= 1;
        }
        &self.release[..end]
    }

    /// Segment `i` of the release, zero past the end.
    pub fn segment(&self, i: usize) -> u64 {
        self.release.get(i).copied().unwrap_or(0)
    }
}

pub fn parse_version(text: &str) -> Result<Version, VersionError> {
    let malformed = |reason: &str| VersionError::Malformed {
        input: text.to_string(),
        reason: reason.to_string(),
    };
    let bytes = text.as_bytes();
    let mut pos = 0;

    let number = |pos: &mut usize| -> Option<u64> {
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if start == *pos {
            return None;
        }
        text[start..*pos].parse().ok()
    };

    let mut release = Vec::new();
    loop {
        let n = number(&mut pos).ok_or_else(|| malformed("expected a release number"))?;
        release.push(n);
        // A dot followed by a digit continues the release; `.post` ends it.
        if pos + 1 < bytes.len() && bytes[pos] == b'.' && bytes[pos + 1].is_ascii_digit() {
            pos += 1;
        } else {
            break;
        }
    }

    let rest = &text[pos..];
    let mut pre = None;
    for (tag, phase) in [("rc", PrePhase::Rc), ("a", PrePhase::Alpha), ("b", PrePhase::Beta)] {
        if rest.starts_with(tag) {
            pos += tag.len();
            let n = number(&mut pos).ok_or_else(|| malformed("pre-release tag needs a number"))?;
            pre = Some(PreRelease { phase, number: n });
            break;
        }
    }

    let mut post = None;
    if text[pos..].starts_with(".post") {
        pos += ".post".len();
        post = Some(number(&mut pos).ok_or_else(|| malformed("post-release tag needs a number"))?);
    }

    if pos != text.len() {
        return Err(malformed("unexpected trailing characters"));
    }
    Ok(Version { release, pre, post })
}

pub fn compare_versions(a: &Version, b: &Version) -> Ordering {
    let width = a.release.len().max(b.release.len());
    for i in 0..width {
        match a.segment(i).cmp(&b.segment(i)) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    // A final release sorts after any of its pre-releases.
    let pre = match (a.pre, b.pre) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
        (Some(x), Some(y)) => x.cmp(&y),
    };
    pre.then_with(|| a.post.cmp(&b.post))
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_versions(self, other)
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Version {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Version {}

impl Hash for Version {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.significant_release().hash(state);
        self.pre.hash(state);
        self.post.hash(state);
    }
}

impl FromStr for Version {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_version(s)
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.release.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{n}")?;
        }
        if let Some(pre) = self.pre {
            write!(f, "{}{}", pre.phase.as_str(), pre.number)?;
        }
        if let Some(post) = self.post {
            write!(f, ".post{post}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Version {
        s.parse().unwrap()
    }

    #[test]
    fn parses_release_pre_and_post() {
        assert_eq!(v("0.10.2").release(), &[0, 10, 2]);
        let rc = v("1.0rc1");
        assert_eq!(rc.release(), &[1, 0]);
        assert_eq!(rc.pre(), Some(PreRelease { phase: PrePhase::Rc, number: 1 }));
        let both = v("2.1b3.post4");
        assert_eq!(both.pre().unwrap().phase, PrePhase::Beta);
        assert_eq!(both.post(), Some(4));
        assert_eq!(v("3.post0").post(), Some(0));
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "", "1.", ".1", "1..2", "v1.0", "1.0-rc1", "1.0rc", "1.0.post", "1.0 ", "1.0c1",
            "1.0.dev1", "1!2.0", "1.0+local", "99999999999999999999999",
        ] {
            assert!(parse_version(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn trailing_zeros_are_kept_for_display_only() {
        assert_eq!(v("1.0.0.0"), v("1.0"));
        assert_eq!(v("1.0.0.0").to_string(), "1.0.0.0");
        assert_eq!(compare_versions(&v("1.0.0.0"), &v("1")), Ordering::Equal);
    }

    #[test]
    fn ordering_examples() {
        assert_eq!(compare_versions(&v("1.2"), &v("1.10")), Ordering::Less);
        assert_eq!(compare_versions(&v("1.0"), &v("1.0")), Ordering::Equal);
        assert_eq!(compare_versions(&v("1.0rc1"), &v("1.0")), Ordering::Less);
        let chain = ["1.0a1", "1.0a2", "1.0b1", "1.0rc1", "1.0rc1.post1", "1.0", "1.0.post1", "1.0.1"];
        for pair in chain.windows(2) {
            assert!(v(pair[0]) < v(pair[1]), "{} < {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["0.10.2", "1.0rc1", "2.1b3.post4", "7", "1.0.0.0a0"] {
            assert_eq!(v(s).to_string(), s);
        }
    }
}
