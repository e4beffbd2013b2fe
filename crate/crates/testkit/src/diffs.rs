//! Random file trees, edits, and reference unified diffs.
//!
//! Diffs come from the `similar` crate, so round-trip tests exercise the
//! parser on output it did not produce itself.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use similar::{ChangeTag, TextDiff};

pub type Files = BTreeMap<String, String>;

const WORDS: [&str; 8] = ["alpha", "beta", "gamma", "", "  indent", "x = 1", "fn main() {}", "}"];

fn random_line<R: Rng>(rng: &mut R, crlf: bool) -> String {
    let mut l = WORDS.choose(rng).unwrap().to_string();
    if rng.gen_bool(0.3) {
        l.push_str(&rng.gen_range(0..100).to_string());
    }
    if crlf {
        l.push('\r');
    }
    l
}

fn random_text<R: Rng>(rng: &mut R) -> String {
    let crlf = rng.gen_bool(0.1);
    let n = rng.gen_range(1..=12);
    let lines: Vec<String> = (0..n).map(|_| random_line(rng, crlf)).collect();
    let mut text = lines.join("\n");
    // An empty file has no unified-diff representation.
    if text.is_empty() || rng.gen_bool(0.8) {
        text.push('\n');
    }
    text
}

/// One to four non-empty files.
pub fn random_tree<R: Rng>(rng: &mut R) -> Files {
    let mut files = Files::new();
    for i in 0..rng.gen_range(1..=4) {
        let dir = ["src", "lib", "docs/guide"].choose(rng).unwrap();
        files.insert(format!("{dir}/f{i}.txt"), random_text(rng));
    }
    files
}

fn edit_text<R: Rng>(rng: &mut R, text: &str) -> String {
    let mut lines: Vec<String> = text.split('\n').map(str::to_string).collect();
    let trailing = text.ends_with('\n');
    if trailing {
        lines.pop();
    }
    for _ in 0..rng.gen_range(1..=4) {
        match rng.gen_range(0..4) {
            0 => {
                let at = rng.gen_range(0..=lines.len());
                lines.insert(at, random_line(rng, false));
            }
            1 if lines.len() > 1 => {
                let at = rng.gen_range(0..lines.len());
                lines.remove(at);
            }
            2 if !lines.is_empty() => {
                let at = rng.gen_range(0..lines.len());
                lines[at] = random_line(rng, false);
            }
            _ => {}
        }
    }
    let mut out = lines.join("\n");
    let keep_trailing = if rng.gen_bool(0.1) { !trailing } else { trailing };
    if keep_trailing || out.is_empty() {
        out.push('\n');
    }
    out
}

/// Modifies at least one file; may also add or delete whole files.
pub fn random_edit<R: Rng>(rng: &mut R, files: &Files) -> Files {
    let mut out = files.clone();
    let paths: Vec<String> = files.keys().cloned().collect();
    loop {
        for p in &paths {
            if rng.gen_bool(0.6) {
                out.insert(p.clone(), edit_text(rng, &files[p]));
            }
        }
        if rng.gen_bool(0.2) {
            out.insert(format!("new/n{}.txt", rng.gen_range(0..10)), random_text(rng));
        }
        if out.len() > 1 && rng.gen_bool(0.15) {
            out.remove(paths.choose(rng).unwrap());
        }
        if &out != files {
            return out;
        }
    }
}

/// Git-style unified diff (`a/` and `b/` prefixes, 3 lines of context).
pub fn unified_diff(before: &Files, after: &Files) -> String {
    let mut out = String::new();
    let mut paths: Vec<&String> = before.keys().chain(after.keys()).collect();
    paths.sort();
    paths.dedup();
    for path in paths {
        let (old, new) = (before.get(path), after.get(path));
        if old == new {
            continue;
        }
        let old_label = if old.is_some() { format!("a/{path}") } else { "/dev/null".into() };
        let new_label = if new.is_some() { format!("b/{path}") } else { "/dev/null".into() };
        let old = old.map_or("", String::as_str);
        let new = new.map_or("", String::as_str);
        out.push_str(&format!("--- {old_label}\n+++ {new_label}\n"));
        render_hunks(&mut out, old, new);
    }
    out
}

fn range(start: usize, len: usize) -> String {
    match len {
        0 => format!("{start},0"),
        1 => format!("{}", start + 1),
        _ => format!("{},{len}", start + 1),
    }
}

// Hunks come from similar's grouping; the text is rendered here because
// similar does not flag a deleted last line that lacks its newline.
fn render_hunks(out: &mut String, old: &str, new: &str) {
    let diff = TextDiff::from_lines(old, new);
    for group in diff.grouped_ops(3) {
        let o0 = group.iter().map(|op| op.old_range().start).min().unwrap_or(0);
        let o1 = group.iter().map(|op| op.old_range().end).max().unwrap_or(0);
        let n0 = group.iter().map(|op| op.new_range().start).min().unwrap_or(0);
        let n1 = group.iter().map(|op| op.new_range().end).max().unwrap_or(0);
        out.push_str(&format!("@@ -{} +{} @@\n", range(o0, o1 - o0), range(n0, n1 - n0)));
        for op in &group {
            for change in diff.iter_changes(op) {
                out.push(match change.tag() {
                    ChangeTag::Equal => ' ',
                    ChangeTag::Delete => '-',
                    ChangeTag::Insert => '+',
                });
                out.push_str(change.value());
                if !change.value().ends_with('\n') {
                    out.push_str("\n\\ No newline at end of file\n");
                }
            }
        }
    }
}

/// Changes one character of one context or deleted line in `diff`, or
/// returns `None` if the diff has no such line.
pub fn perturb<R: Rng>(rng: &mut R, diff: &str) -> Option<String> {
    let mut lines: Vec<String> = diff.split_inclusive('\n').map(str::to_string).collect();
    let mut candidates = Vec::new();
    let mut remaining = (0usize, 0usize);
    for (i, l) in lines.iter().enumerate() {
        if remaining != (0, 0) {
            match l.as_bytes().first() {
                Some(b' ') => {
                    candidates.push(i);
                    remaining = (remaining.0 - 1, remaining.1 - 1);
                }
                Some(b'-') => {
                    candidates.push(i);
                    remaining.0 -= 1;
                }
                Some(b'+') => remaining.1 -= 1,
                _ => {}
            }
        } else if let Some(rest) = l.strip_prefix("@@ -") {
            let (old, rest) = rest.split_once(" +").expect("hunk header");
            let new = rest.split_once(" @@").expect("hunk header").0;
            let count = |r: &str| r.split_once(',').map_or(1, |(_, n)| n.parse().expect("count"));
            remaining = (count(old), count(new));
        }
    }
    let &i = candidates.choose(rng)?;
    let line = &lines[i];
    let (tag, body) = line.split_at(1);
    let (text, ending) = match body.strip_suffix('\n') {
        Some(t) => (t, "\n"),
        None => (body, ""),
    };
    let chars: Vec<char> = text.chars().collect();
    let new_text: String = if chars.is_empty() || chars == ['\r'] {
        format!("#{text}")
    } else {
        let at = rng.gen_range(0..chars.len());
        let replacement = if chars[at] == '#' { '%' } else { '#' };
        chars.iter().enumerate().map(|(j, &c)| if j == at { replacement } else { c }).collect()
    };
    lines[i] = format!("{tag}{new_text}{ending}");
    Some(lines.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn diff_headers() {
        let before = Files::from([("a.txt".to_string(), "1\n2\n".to_string())]);
        let after = Files::from([("a.txt".to_string(), "1\n3\n".to_string()), ("b.txt".to_string(), "new\n".to_string())]);
        let d = unified_diff(&before, &after);
        assert!(d.starts_with("--- a/a.txt\n+++ b/a.txt\n@@ -1,2 +1,2 @@\n 1\n-2\n+3\n"), "{d}");
        assert!(d.contains("--- /dev/null\n+++ b/b.txt\n@@ -0,0 +1 @@\n+new\n"), "{d}");
    }

    #[test]
    fn perturbation_changes_exactly_one_line() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let t = random_tree(&mut rng);
            let e = random_edit(&mut rng, &t);
            let d = unified_diff(&t, &e);
            if let Some(p) = perturb(&mut rng, &d) {
                let changed = d.lines().zip(p.lines()).filter(|(a, b)| a != b).count();
                assert_eq!(changed, 1);
                assert_eq!(d.lines().count(), p.lines().count());
            }
        }
    }
}
