use super::{FilePatch, Hunk, HunkLine, LineTag, Patch, PatchError};
use crate::tree::is_normalized_path;

const NO_NEWLINE: &str = "\\ No newline at end of file";

/// Parses a unified diff. Text before each `---`/`+++` header pair (such as
/// `diff --git` or `index` lines) is ignored.
pub fn parse_unified_diff(text: &str) -> Result<Patch, PatchError> {
    let lines: Vec<&str> = text
        .split_inclusive('\n')
        .map(|l| l.strip_suffix('\n').unwrap_or(l))
        .collect();
    let header = |i: usize, prefix: &str| {
        lines
            .get(i)
            .is_some_and(|l| l.starts_with(prefix))
    };

    let mut patch = Patch::default();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if header(i, "--- ") && header(i + 1, "+++ ") {
            let old_path = header_path(lines[i], i + 1)?;
            let new_path = header_path(lines[i + 1], i + 2)?;
            let header_line = i + 1;
            i += 2;
            let mut hunks = Vec::new();
            while header(i, "@@") {
                let (hunk, next) = parse_hunk(&lines, i)?;
                hunks.push(hunk);
                i = next;
            }
            if hunks.is_empty() {
                return Err(malformed(header_line, "file header without hunks"));
            }
            let fp = FilePatch { old_path, new_path, hunks };
            check_file_patch(&fp, header_line)?;
            patch.file_patches.push(fp);
        } else if line.starts_with("--- ") {
            return Err(malformed(i + 1, "`---` header not followed by `+++`"));
        } else if line.starts_with("+++ ") {
            return Err(malformed(i + 1, "`+++` header without preceding `---`"));
        } else if line.starts_with("@@") {
            return Err(malformed(i + 1, "hunk outside of a file patch"));
        } else {
            i += 1;
        }
    }

    if patch.is_empty() && !text.trim().is_empty() {
        return Err(malformed(1, "no file patches found"));
    }
    Ok(patch)
}

fn malformed(line: usize, message: impl Into<String>) -> PatchError {
    PatchError::MalformedDiff { line, message: message.into() }
}

fn header_path(line: &str, lineno: usize) -> Result<String, PatchError> {
    let rest = line[4..].trim_end_matches('\r');
    // Anything after a tab is a timestamp.
    let path = rest.split('\t').next().unwrap_or("").trim_end();
    if path.is_empty() {
        return Err(malformed(lineno, "empty path in file header"));
    }
    Ok(path.to_string())
}

fn check_file_patch(fp: &FilePatch, line: usize) -> Result<(), PatchError> {
    if fp.is_creation() && fp.is_deletion() {
        return Err(malformed(line, "both paths are /dev/null"));
    }
    for path in [fp.source(), fp.target()].into_iter().flatten() {
        if !is_normalized_path(&path) {
            return Err(malformed(line, format!("unsafe path {path:?}")));
        }
    }
    if fp.is_creation() && fp.hunks.iter().any(|h| h.old_len != 0) {
        return Err(malformed(line, "creation patch removes lines"));
    }
    if fp.is_deletion() && fp.hunks.iter().any(|h| h.new_len != 0) {
        return Err(malformed(line, "deletion patch adds lines"));
    }
    let mut end = 0;
    for h in &fp.hunks {
        if h.old_offset() < end {
            return Err(malformed(line, "hunks overlap or are out of order"));
        }
        end = h.old_offset() + h.old_len;
    }
    Ok(())
}

/// Parses `-a[,b]` or `+c[,d]`.
fn range(token: &str, sign: char) -> Option<(usize, usize)> {
    let body = token.strip_prefix(sign)?;
    match body.split_once(',') {
        Some((start, len)) => Some((start.parse().ok()?, len.parse().ok()?)),
        None => Some((body.parse().ok()?, 1)),
    }
}

fn parse_hunk(lines: &[&str], at: usize) -> Result<(Hunk, usize), PatchError> {
    let lineno = at + 1;
    let head = lines[at].trim_end_matches('\r');
    let bad_header = || malformed(lineno, format!("bad hunk header {head:?}"));
    let inner = head
        .strip_prefix("@@ ")
        .and_then(|r| r.split_once(" @@"))
        .map(|(ranges, _section)| ranges)
        .ok_or_else(bad_header)?;
    let mut parts = inner.split(' ');
    let (old_start, old_len) = parts.next().and_then(|t| range(t, '-')).ok_or_else(bad_header)?;
    let (new_start, new_len) = parts.next().and_then(|t| range(t, '+')).ok_or_else(bad_header)?;
    if parts.next().is_some() || (old_len > 0 && old_start == 0) || (new_len > 0 && new_start == 0) {
        return Err(bad_header());
    }

    let mut hunk = Hunk { old_start, old_len, new_start, new_len, lines: Vec::new() };
    let (mut old_seen, mut new_seen) = (0, 0);
    let mut i = at + 1;
    let mismatch = |message: String| PatchError::HunkCountMismatch { line: lineno, message };

    while old_seen < old_len || new_seen < new_len {
        let Some(line) = lines.get(i) else {
            return Err(mismatch(format!(
                "diff ended after {old_seen}/{old_len} old and {new_seen}/{new_len} new lines"
            )));
        };
        let (tag, text) = match line.chars().next() {
            Some(' ') => (LineTag::Context, &line[1..]),
            Some('-') => (LineTag::Delete, &line[1..]),
            Some('+') => (LineTag::Add, &line[1..]),
            // Some tools strip the single space of an empty context line.
            None => (LineTag::Context, ""),
            Some('\\') => {
                mark_no_newline(&mut hunk, i)?;
                i += 1;
                continue;
            }
            Some(_) => {
                return Err(mismatch(format!(
                    "hunk body ended at line {} after {old_seen}/{old_len} old and {new_seen}/{new_len} new lines",
                    i + 1
                )))
            }
        };
        if tag != LineTag::Add {
            old_seen += 1;
        }
        if tag != LineTag::Delete {
            new_seen += 1;
        }
        if old_seen > old_len || new_seen > new_len {
            return Err(mismatch(format!("line {} exceeds the header counts", i + 1)));
        }
        hunk.lines.push(HunkLine { tag, text: text.to_string(), newline: true });
        i += 1;
    }

    if lines.get(i).is_some_and(|l| l.starts_with('\\')) {
        mark_no_newline(&mut hunk, i)?;
        i += 1;
    }

    if let Some(next) = lines.get(i) {
        let is_header = next.starts_with("--- ") && lines.get(i + 1).is_some_and(|l| l.starts_with("+++ "));
        if !is_header && next.starts_with([' ', '-', '+']) {
            return Err(mismatch(format!("line {} exceeds the header counts", i + 1)));
        }
    }
    Ok((hunk, i))
}

fn mark_no_newline(hunk: &mut Hunk, i: usize) -> Result<(), PatchError> {
    match hunk.lines.last_mut() {
        Some(last) if last.newline => {
            last.newline = false;
            Ok(())
        }
        _ => Err(malformed(i + 1, format!("misplaced {NO_NEWLINE:?} marker"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_hunk_one_line_change() {
        let p = parse_unified_diff("--- a/f.txt\n+++ b/f.txt\n@@ -1,3 +1,3 @@\n one\n-two\n+TWO\n three\n").unwrap();
        assert_eq!(p.file_patches.len(), 1);
        let fp = &p.file_patches[0];
        assert_eq!(fp.source().as_deref(), Some("f.txt"));
        assert_eq!(fp.strip_level(), 1);
        let h = &fp.hunks[0];
        assert_eq!((h.old_start, h.old_len, h.new_start, h.new_len), (1, 3, 1, 3));
        assert_eq!(h.lines[1], HunkLine::new(LineTag::Delete, "two"));
        assert_eq!(h.lines[2], HunkLine::new(LineTag::Add, "TWO"));
    }

    #[test]
    fn count_mismatches() {
        let too_few = "--- f\n+++ f\n@@ -1,3 +1,3 @@\n one\n-two\n+TWO\n";
        assert!(matches!(parse_unified_diff(too_few), Err(PatchError::HunkCountMismatch { line: 3, .. })));
        let too_many = "--- f\n+++ f\n@@ -1,2 +1,2 @@\n one\n-two\n+TWO\n three\n";
        assert!(matches!(parse_unified_diff(too_many), Err(PatchError::HunkCountMismatch { line: 3, .. })));
        let cut = "--- f\n+++ f\n@@ -1,2 +1,2 @@\n one\ngarbage\n";
        assert!(matches!(parse_unified_diff(cut), Err(PatchError::HunkCountMismatch { .. })));
    }

    #[test]
    fn multi_file_keeps_textual_order_and_skips_preamble() {
        let text = "diff --git a/z b/z\nindex 1..2 100644\n--- a/z\n+++ b/z\n@@ -1 +1 @@\n-x\n+y\n\
                    diff --git a/a b/a\n--- a/a\n+++ b/a\n@@ -2,0 +3,1 @@\n+new\n";
        let p = parse_unified_diff(text).unwrap();
        let targets: Vec<_> = p.file_patches.iter().map(|f| f.target().unwrap()).collect();
        assert_eq!(targets, ["z", "a"]);
        assert_eq!(p.file_patches[1].hunks[0].old_offset(), 2);
    }

    #[test]
    fn no_newline_markers_and_crlf() {
        let text = "--- f\t2024-01-01 00:00:00\n+++ f\n@@ -1 +1 @@\n-old\r\n\\ No newline at end of file\n+new\n";
        let p = parse_unified_diff(text).unwrap();
        let h = &p.file_patches[0].hunks[0];
        assert_eq!(h.lines[0].text, "old\r");
        assert!(!h.lines[0].newline);
        assert!(h.lines[1].newline);
        assert_eq!(p.file_patches[0].strip_level(), 0);
    }

    #[test]
    fn creation_and_deletion() {
        let p = parse_unified_diff("--- /dev/null\n+++ b/new.py\n@@ -0,0 +1,2 @@\n+a\n+b\n").unwrap();
        let fp = &p.file_patches[0];
        assert!(fp.is_creation());
        assert_eq!(fp.target().as_deref(), Some("new.py"));
        let p = parse_unified_diff("--- a/old.py\n+++ /dev/null\n@@ -1 +0,0 @@\n-a\n").unwrap();
        assert!(p.file_patches[0].is_deletion());
        assert_eq!(p.file_patches[0].source().as_deref(), Some("old.py"));
    }

    #[test]
    fn malformed_inputs() {
        for (text, line) in [
            ("--- a\n@@ -1 +1 @@\n", 1),
            ("@@ -1 +1 @@\n-a\n+b\n", 1),
            ("--- a\n+++ b\n", 1),
            ("--- a\n+++ b\n@@ -1 +1\n-a\n+b\n", 3),
            ("--- a/../x\n+++ b/../x\n@@ -1 +1 @@\n-a\n+b\n", 1),
            ("--- a\n+++ a\n@@ -3 +3 @@\n-a\n+b\n@@ -1 +1 @@\n-a\n+b\n", 1),
            ("just some words\n", 1),
            ("--- a\n+++ a\n@@ -1,2 +1,2 @@\n\\ No newline at end of file\n a\n a\n", 4),
        ] {
            match parse_unified_diff(text) {
                Err(PatchError::MalformedDiff { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(parse_unified_diff("").unwrap().is_empty());
    }

    #[test]
    fn display_round_trips() {
        let text = "--- a/f\n+++ b/f\n@@ -1,2 +1,2 @@\n keep\n-old\n\\ No newline at end of file\n+new\n\\ No newline at end of file\n";
        let p = parse_unified_diff(text).unwrap();
        assert_eq!(p.to_string(), text);
        assert_eq!(parse_unified_diff(&p.reverse().to_string()).unwrap(), p.reverse());
    }
}
