//! Inputs shared by the benchmarks.

use std::collections::BTreeMap;
use std::fs;

use iceforge_core::executor::{GitStore, RegistryIndex};
use iceforge_core::manifest::{parse_manifest, Manifest};
use iceforge_core::patchkit::{collect_all_patch_sets, PatchSet};
use iceforge_core::FileTree;
use iceforge_testkit::{diffs, fixture_dir};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub manifest: Manifest,
    pub patches: BTreeMap<String, PatchSet>,
    pub scripts: FileTree,
    pub registry: RegistryIndex,
    pub gitstore: GitStore,
}

pub fn fixture() -> Fixture {
    let dir = fixture_dir();
    Fixture {
        manifest: parse_manifest(&fs::read_to_string(dir.join("tools.toml")).unwrap()).unwrap(),
        patches: collect_all_patch_sets(&dir.join("patches")).unwrap(),
        scripts: FileTree::from_dir(&dir.join("cli_scripts")).unwrap(),
        registry: RegistryIndex::load(&dir.join("registry")).unwrap(),
        gitstore: GitStore::load(&dir.join("gitstore")).unwrap(),
    }
}

/// `n` seeded (tree, unified diff) pairs.
pub fn diff_cases(n: u64) -> Vec<(FileTree, String)> {
    (0..n)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let before = diffs::random_tree(&mut rng);
            let after = diffs::random_edit(&mut rng, &before);
            let text = diffs::unified_diff(&before, &after);
            (before.into_iter().collect(), text)
        })
        .collect()
}
