use super::{FilePatch, Hunk, LineTag, Patch, PatchError, PatchSet};
use crate::tree::FileTree;

struct Line<'a> {
    text: &'a [u8],
    newline: bool,
}

fn split_lines(bytes: &[u8]) -> Vec<Line<'_>> {
    bytes
        .split_inclusive(|&b| b == b'\n')
        .map(|chunk| match chunk.strip_suffix(b"\n") {
            Some(text) => Line { text, newline: true },
            None => Line { text: chunk, newline: false },
        })
        .collect()
}

fn push_line(out: &mut Vec<u8>, text: &[u8], newline: bool) {
    out.extend_from_slice(text);
    if newline {
        out.push(b'\n');
    }
}

/// Applies `p` to a copy of `tree`. Context and deleted lines must match the
/// file exactly at the stated positions. Files the patch does not touch are
/// left byte-identical.
pub fn apply_patch(tree: &FileTree, p: &Patch) -> Result<FileTree, PatchError> {
    let mut out = tree.clone();
    for fp in &p.file_patches {
        apply_file(&mut out, fp)?;
    }
    Ok(out)
}

fn apply_file(tree: &mut FileTree, fp: &FilePatch) -> Result<(), PatchError> {
    let original: Vec<u8> = match fp.source() {
        Some(src) => tree
            .get(&src)
            .ok_or(PatchError::TargetMissing { path: src.clone() })?
            .to_vec(),
        None => Vec::new(),
    };
    let label = fp.source().or_else(|| fp.target()).unwrap_or_default();
    if let Some(target) = fp.target() {
        let renamed = fp.source().as_deref() != Some(target.as_str());
        if renamed && tree.contains(&target) {
            return Err(PatchError::TargetExists { path: target });
        }
    }

    let patched = patch_bytes(&original, &fp.hunks, &label)?;

    if let Some(src) = fp.source() {
        tree.remove(&src);
    }
    match fp.target() {
        Some(target) => {
            tree.insert(target, patched);
        }
        None if !patched.is_empty() => {
            // A deletion must remove every line of the file.
            let lines = split_lines(&original).len();
            return Err(PatchError::ContextMismatch {
                file: label,
                hunk: fp.hunks.len(),
                line: lines,
                expected: "end of file".into(),
                found: Some(String::from_utf8_lossy(&patched).into_owned()),
            });
        }
        None => {}
    }
    Ok(())
}

fn patch_bytes(original: &[u8], hunks: &[Hunk], label: &str) -> Result<Vec<u8>, PatchError> {
    let lines = split_lines(original);
    let mut out = Vec::with_capacity(original.len());
    let mut cursor = 0;

    for (k, hunk) in hunks.iter().enumerate() {
        let start = hunk.old_offset();
        for line in &lines[cursor..start.min(lines.len())] {
            push_line(&mut out, line.text, line.newline);
        }
        let mut pos = start;
        for hl in hunk.lines.iter().filter(|l| l.tag != LineTag::Add) {
            let found = lines.get(pos);
            let matches = found.is_some_and(|l| l.text == hl.text.as_bytes() && l.newline == hl.newline);
            if !matches {
                return Err(PatchError::ContextMismatch {
                    file: label.to_string(),
                    hunk: k + 1,
                    line: pos + 1,
                    expected: display_line(hl.text.as_bytes(), hl.newline),
                    found: found.map(|l| display_line(l.text, l.newline)),
                });
            }
            pos += 1;
        }
        if start > lines.len() {
            return Err(PatchError::ContextMismatch {
                file: label.to_string(),
                hunk: k + 1,
                line: start,
                expected: "a line".into(),
                found: None,
            });
        }
        for hl in hunk.lines.iter().filter(|l| l.tag != LineTag::Delete) {
            push_line(&mut out, hl.text.as_bytes(), hl.newline);
        }
        cursor = pos;
    }
    for line in &lines[cursor.min(lines.len())..] {
        push_line(&mut out, line.text, line.newline);
    }
    Ok(out)
}

fn display_line(text: &[u8], newline: bool) -> String {
    let mut s = String::from_utf8_lossy(text).into_owned();
    if !newline {
        s.push_str(" (no newline)");
    }
    s
}

/// Copies the overlays into `tree`, then applies each diff in order.
pub fn apply_patchset(tree: &FileTree, ps: &PatchSet) -> Result<FileTree, PatchError> {
    let mut out = tree.clone();
    for (path, bytes) in &ps.overlays {
        out.insert(path.clone(), bytes.clone());
    }
    for (name, patch) in &ps.diffs {
        out = apply_patch(&out, patch).map_err(|e| PatchError::InDiff {
            diff: name.clone(),
            source: Box::new(e),
        })?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patchkit::parse_unified_diff;

    fn tree(files: &[(&str, &str)]) -> FileTree {
        files.iter().map(|(p, c)| (*p, *c)).collect()
    }

    fn diff(text: &str) -> Patch {
        parse_unified_diff(text).unwrap()
    }

    #[test]
    fn empty_patch_is_identity() {
        let t = tree(&[("a", "x\n")]);
        assert_eq!(apply_patch(&t, &Patch::default()).unwrap(), t);
    }

    #[test]
    fn replaces_one_line_and_leaves_others_alone() {
        let t = tree(&[("f.txt", "one\ntwo\nthree\n"), ("g.txt", "untouched\r\n")]);
        let p = diff("--- a/f.txt\n+++ b/f.txt\n@@ -1,3 +1,3 @@\n one\n-two\n+TWO\n three\n");
        let out = apply_patch(&t, &p).unwrap();
        assert_eq!(out.get("f.txt").unwrap(), b"one\nTWO\nthree\n");
        assert_eq!(out.get("g.txt").unwrap(), b"untouched\r\n");
    }

    #[test]
    fn preserves_crlf_and_missing_final_newline() {
        let t = tree(&[("w.bat", "a\r\nb\r\nc")]);
        let p = diff("--- w.bat\n+++ w.bat\n@@ -2,2 +2,2 @@\n b\r\n-c\n\\ No newline at end of file\n+C\n\\ No newline at end of file\n");
        assert_eq!(apply_patch(&t, &p).unwrap().get("w.bat").unwrap(), b"a\r\nb\r\nC");
    }

    #[test]
    fn newline_state_is_part_of_the_context() {
        let t = tree(&[("f", "a\nb")]);
        let p = diff("--- f\n+++ f\n@@ -2 +2 @@\n-b\n+c\n");
        assert!(matches!(apply_patch(&t, &p), Err(PatchError::ContextMismatch { line: 2, .. })));
    }

    #[test]
    fn missing_target_and_context_mismatch() {
        let p = diff("--- a/f\n+++ b/f\n@@ -1,2 +1,2 @@\n one\n-two\n+2\n");
        assert!(matches!(apply_patch(&FileTree::new(), &p), Err(PatchError::TargetMissing { .. })));
        let t = tree(&[("f", "one\ntwO\n")]);
        match apply_patch(&t, &p) {
            Err(PatchError::ContextMismatch { file, hunk, line, expected, found }) => {
                assert_eq!((file.as_str(), hunk, line), ("f", 1, 2));
                assert_eq!(expected, "two");
                assert_eq!(found.as_deref(), Some("twO"));
            }
            other => panic!("{other:?}"),
        }
        let short = tree(&[("f", "one\n")]);
        assert!(matches!(apply_patch(&short, &p), Err(PatchError::ContextMismatch { line: 2, found: None, .. })));
    }

    #[test]
    fn insertion_after_last_line_and_at_start() {
        let t = tree(&[("f", "a\nb\n")]);
        let end = diff("--- f\n+++ f\n@@ -2,0 +3,1 @@\n+c\n");
        assert_eq!(apply_patch(&t, &end).unwrap().get("f").unwrap(), b"a\nb\nc\n");
        let start = diff("--- f\n+++ f\n@@ -0,0 +1,1 @@\n+z\n");
        assert_eq!(apply_patch(&t, &start).unwrap().get("f").unwrap(), b"z\na\nb\n");
        let beyond = diff("--- f\n+++ f\n@@ -5,0 +6,1 @@\n+c\n");
        assert!(matches!(apply_patch(&t, &beyond), Err(PatchError::ContextMismatch { .. })));
    }

    #[test]
    fn create_and_delete_files() {
        let t = tree(&[("old.py", "x\n")]);
        let p = diff("--- /dev/null\n+++ b/new.py\n@@ -0,0 +1 @@\n+y\n--- a/old.py\n+++ /dev/null\n@@ -1 +0,0 @@\n-x\n");
        let out = apply_patch(&t, &p).unwrap();
        assert_eq!(out, tree(&[("new.py", "y\n")]));
        assert!(matches!(apply_patch(&out, &p), Err(PatchError::TargetExists { .. })));
        assert_eq!(apply_patch(&out, &p.reverse()).unwrap(), t);

        let partial = diff("--- a/f\n+++ /dev/null\n@@ -1 +0,0 @@\n-x\n");
        assert!(matches!(
            apply_patch(&tree(&[("f", "x\ny\n")]), &partial),
            Err(PatchError::ContextMismatch { .. })
        ));
    }

    #[test]
    fn patchset_applies_overlays_first() {
        let ps = PatchSet {
            tool: "t".into(),
            overlays: vec![("pkg/client.py".into(), b"def query():\n    pass\n".to_vec())],
            diffs: vec![(
                "01-client.diff".into(),
                diff("--- a/pkg/client.py\n+++ b/pkg/client.py\n@@ -1,2 +1,2 @@\n def query():\n-    pass\n+    return 42\n"),
            )],
        };
        let out = apply_patchset(&tree(&[("pkg/__init__.py", "")]), &ps).unwrap();
        assert_eq!(out.get("pkg/client.py").unwrap(), b"def query():\n    return 42\n");
        assert!(out.contains("pkg/__init__.py"));
    }

    #[test]
    fn dependent_diffs_only_apply_in_order() {
        let first = diff("--- a/f\n+++ b/f\n@@ -1 +1 @@\n-v1\n+v2\n");
        let second = diff("--- a/f\n+++ b/f\n@@ -1 +1 @@\n-v2\n+v3\n");
        let t = tree(&[("f", "v1\n")]);
        let ordered = PatchSet {
            tool: "t".into(),
            overlays: vec![],
            diffs: vec![("01.diff".into(), first.clone()), ("02.diff".into(), second.clone())],
        };
        assert_eq!(apply_patchset(&t, &ordered).unwrap().get("f").unwrap(), b"v3\n");
        let swapped = PatchSet { diffs: vec![("01.diff".into(), second), ("02.diff".into(), first)], ..ordered };
        let err = apply_patchset(&t, &swapped).unwrap_err();
        assert!(matches!(&err, PatchError::InDiff { diff, .. } if diff == "01.diff"));
        assert!(matches!(err.root(), PatchError::ContextMismatch { .. }));
    }
}
