use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{parse_unified_diff, PatchError, PatchSet};
use crate::tree::{FileTree, TreeError};

fn unreadable(path: &Path, source: std::io::Error) -> PatchError {
    PatchError::UnreadableTree { path: path.display().to_string(), source }
}

/// Collects `patch_root/<tool>/*.diff` (by filename) and
/// `patch_root/<tool>/overlay/**` (by relative path). A missing tool
/// directory yields an empty set; a missing `patch_root` is an error.
pub fn collect_patches(patch_root: &Path, tool: &str) -> Result<PatchSet, PatchError> {
    let root_meta = fs::metadata(patch_root).map_err(|e| unreadable(patch_root, e))?;
    if !root_meta.is_dir() {
        return Err(unreadable(
            patch_root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        ));
    }
    let dir = patch_root.join(tool);
    if !dir.is_dir() {
        return Ok(PatchSet::empty(tool));
    }

    let mut diff_files = Vec::new();
    for entry in fs::read_dir(&dir).map_err(|e| unreadable(&dir, e))? {
        let entry = entry.map_err(|e| unreadable(&dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let is_file = entry.file_type().map_err(|e| unreadable(&entry.path(), e))?.is_file()
            || entry.path().is_file();
        if is_file && name.ends_with(".diff") {
            diff_files.push(name);
        }
    }
    diff_files.sort();

    let mut diffs = Vec::with_capacity(diff_files.len());
    for name in diff_files {
        let path = dir.join(&name);
        let text = fs::read_to_string(&path).map_err(|e| unreadable(&path, e))?;
        let patch = parse_unified_diff(&text).map_err(|e| PatchError::InDiff {
            diff: format!("{tool}/{name}"),
            source: Box::new(e),
        })?;
        diffs.push((name, patch));
    }

    let overlay_dir = dir.join("overlay");
    let overlays = if overlay_dir.is_dir() {
        FileTree::from_dir(&overlay_dir)
            .map_err(|e| match e {
                TreeError::Read { path, source } | TreeError::Write { path, source } => {
                    PatchError::UnreadableTree { path, source }
                }
                TreeError::InvalidPath(p) => unreadable(
                    &overlay_dir,
                    std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad path {p}")),
                ),
            })?
            .iter()
            .map(|(p, b)| (p.to_string(), b.to_vec()))
            .collect()
    } else {
        Vec::new()
    };

    Ok(PatchSet { tool: tool.to_string(), overlays, diffs })
}

/// Non-empty patch sets for each of `tools`.
pub fn collect_patch_sets<'a>(
    patch_root: &Path,
    tools: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeMap<String, PatchSet>, PatchError> {
    let mut out = BTreeMap::new();
    for tool in tools {
        let ps = collect_patches(patch_root, tool)?;
        if !ps.is_empty() {
            out.insert(tool.to_string(), ps);
        }
    }
    Ok(out)
}

/// Non-empty patch sets for every directory under `patch_root`, whether or
/// not a tool of that name exists. Planning rejects the unknown ones.
pub fn collect_all_patch_sets(patch_root: &Path) -> Result<BTreeMap<String, PatchSet>, PatchError> {
    let mut names = Vec::new();
    for entry in fs::read_dir(patch_root).map_err(|e| unreadable(patch_root, e))? {
        let path = entry.map_err(|e| unreadable(patch_root, e))?.path();
        if path.is_dir() {
            names.push(path.file_name().unwrap_or_default().to_string_lossy().into_owned());
        }
    }
    names.sort();
    collect_patch_sets(patch_root, names.iter().map(String::as_str))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIFF: &str = "--- a/f\n+++ b/f\n@@ -1 +1 @@\n-a\n+b\n";

    #[test]
    fn absent_tool_directory_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let ps = collect_patches(dir.path(), "garak").unwrap();
        assert!(ps.is_empty());
        assert_eq!(ps.tool, "garak");
    }

    #[test]
    fn missing_root_is_unreadable() {
        let dir = tempfile::tempdir().unwrap();
        let err = collect_patches(&dir.path().join("nope"), "garak").unwrap_err();
        assert!(matches!(err, PatchError::UnreadableTree { .. }));
    }

    #[test]
    fn diffs_sorted_and_overlays_stripped() {
        let dir = tempfile::tempdir().unwrap();
        let tool = dir.path().join("cybersec");
        fs::create_dir_all(tool.join("overlay/garak")).unwrap();
        fs::write(tool.join("02-client.diff"), DIFF).unwrap();
        fs::write(tool.join("01-sysprompt.diff"), DIFF).unwrap();
        fs::write(tool.join("README"), "ignored").unwrap();
        fs::write(tool.join("overlay/garak/custom_client.mod"), "x").unwrap();
        let ps = collect_patches(dir.path(), "cybersec").unwrap();
        let names: Vec<_> = ps.diffs.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["01-sysprompt.diff", "02-client.diff"]);
        assert_eq!(ps.overlays, vec![("garak/custom_client.mod".to_string(), b"x".to_vec())]);

        let all = collect_patch_sets(dir.path(), ["cybersec", "garak"]).unwrap();
        assert_eq!(all.keys().collect::<Vec<_>>(), ["cybersec"]);
    }

    #[test]
    fn malformed_diff_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("t")).unwrap();
        fs::write(dir.path().join("t/bad.diff"), "--- a\n").unwrap();
        let err = collect_patches(dir.path(), "t").unwrap_err();
        assert!(err.to_string().starts_with("t/bad.diff: malformed diff at line 1"), "{err}");
    }
}
