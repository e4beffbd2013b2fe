use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use iceforge_core::executor::{execute, verify_layout, Execution, GitStore, LayoutViolation, RegistryIndex, Sources};
use iceforge_core::manifest::{classify_tool, parse_manifest, Manifest, ToolClass};
use iceforge_core::patchkit::{collect_all_patch_sets, PatchSet};
use iceforge_core::planner::{plan_build, plan_custom_scripts, BuildPlan, LayoutPaths, StepKind};
use iceforge_core::{emit_buildfile, emit_shell, FileTree};
use iceforge_testkit::{expected_plan_counts, fixture_dir, Kind, TOOL_TABLE};

struct Fixture {
    manifest: Manifest,
    patches: BTreeMap<String, PatchSet>,
    scripts: FileTree,
    registry: RegistryIndex,
    gitstore: GitStore,
}

fn load() -> Fixture {
    let dir = fixture_dir();
    Fixture {
        manifest: parse_manifest(&fs::read_to_string(dir.join("tools.toml")).unwrap()).unwrap(),
        patches: collect_all_patch_sets(&dir.join("patches")).unwrap(),
        scripts: FileTree::from_dir(&dir.join("cli_scripts")).unwrap(),
        registry: RegistryIndex::load(&dir.join("registry")).unwrap(),
        gitstore: GitStore::load(&dir.join("gitstore")).unwrap(),
    }
}

fn plan(f: &Fixture) -> BuildPlan {
    let layout = LayoutPaths::default();
    let scripts = plan_custom_scripts(&f.scripts, &f.manifest, &layout).unwrap();
    plan_build(&f.manifest, &f.patches, &layout).unwrap().with_custom_scripts(scripts)
}

fn run(f: &Fixture, plan: &BuildPlan) -> Execution {
    execute(
        plan,
        &Sources { registry: &f.registry, gitstore: &f.gitstore, patches: &f.patches, scripts: &f.scripts },
    )
}

#[test]
fn classification_matches_tool_table() {
    let f = load();
    let names: Vec<&str> = f.manifest.tools().map(|t| t.name.as_str()).collect();
    let table: BTreeSet<&str> = TOOL_TABLE.iter().map(|r| r.name).collect();
    assert_eq!(names.iter().copied().collect::<BTreeSet<_>>(), table);
    for row in &TOOL_TABLE {
        let class = classify_tool(&f.manifest, row.name).unwrap();
        let want_static = row.kind != Kind::Dynamic || row.forced_isolated;
        assert_eq!(class.is_static(), want_static, "{}", row.name);
    }
    let count = |c| names.iter().filter(|n| classify_tool(&f.manifest, n).unwrap() == c).count();
    assert_eq!(count(ToolClass::StaticIsolated), 11);
    assert_eq!(count(ToolClass::StaticProject), 1);
    assert_eq!(count(ToolClass::DynamicGlobal), 2);
}

#[test]
fn plan_counts_follow_the_table() {
    let f = load();
    let p = plan(&f);
    let (isolated, projects, globals, git, index) = expected_plan_counts();
    assert_eq!(p.count(StepKind::CreateIsolatedEnv), isolated);
    assert_eq!(p.count(StepKind::CreateProjectDir), projects);
    assert_eq!(p.count(StepKind::InstallGlobal), globals);
    assert_eq!(p.count(StepKind::FetchGit), git);
    assert_eq!(p.count(StepKind::FetchIndex), index);
    assert_eq!(p.count(StepKind::InstallGlobalRequirements), 1);
    assert_eq!(p.count(StepKind::ApplyPatches), 2);
    assert_eq!(p.count(StepKind::WriteWrapper), 12);
    assert_eq!(p.count(StepKind::CreateSymlink), 13);
}

#[test]
fn emitted_block_counts() {
    let f = load();
    let p = plan(&f);
    let bf = emit_buildfile(&p, "base");
    let sh = emit_shell(&p);
    let blocks = |t: &str| t.lines().filter(|l| l.starts_with("# step ")).count();
    assert_eq!(blocks(&bf), p.len());
    assert_eq!(blocks(&sh), p.len());
    for tool in f.manifest.tools() {
        assert!(bf.contains(&tool.name));
        if let Some(commit) = &tool.git_commit {
            assert_eq!(bf.matches(commit.as_str()).count(), 1, "{}", tool.name);
            assert_eq!(sh.matches(commit.as_str()).count(), 1, "{}", tool.name);
        }
        if let Some(pin) = &tool.version_pin {
            let sep = if tool.name == "promptfoo" { "@" } else { "==" };
            let coord = format!("{}{sep}{pin}", tool.name);
            assert_eq!(bf.matches(&coord).count(), 1, "{coord}");
        }
    }
    for line in bf.lines().filter(|l| !l.starts_with('#')) {
        for word in line.split([' ', '"', '\'']) {
            if word.starts_with('/') {
                assert!(word.starts_with("/opt/iceforge/"), "{word} in {line}");
            }
        }
    }
}

#[test]
fn end_to_end_build() {
    let f = load();
    let p = plan(&f);
    let ex = run(&f, &p);
    assert!(ex.succeeded(), "{}", ex.log.render());
    assert_eq!(ex.log.kinds(), p.kinds());
    let l = &ex.layout;
    assert_eq!(l.installed.len(), 14);
    assert_eq!(l.global_env_packages.keys().collect::<Vec<_>>(), ["pyrit", "rigging"]);
    assert_eq!(l.global_env_packages["rigging"].to_string(), "2.3.0");

    let mut expected: BTreeSet<String> = f
        .manifest
        .tools()
        .filter(|t| classify_tool(&f.manifest, &t.name).unwrap().is_static())
        .flat_map(|t| t.entrypoints.iter().map(|e| e.cli_name.clone()))
        .collect();
    expected.insert("biasforge".into());
    assert_eq!(l.symlinks.keys().cloned().collect::<BTreeSet<_>>(), expected);
    assert!(!l.symlinks.contains_key("pyrit") && !l.symlinks.contains_key("rigging"));

    let report = verify_layout(l, &f.manifest);
    assert!(report.is_empty(), "{:?}", report.violations);

    let llm = l.root.get("envs/cyberseceval/CybersecurityBenchmarks/benchmark/llm.py").unwrap();
    let llm = String::from_utf8_lossy(llm);
    assert!(llm.contains("system=self.system_prompt"), "both diffs applied in order");
    assert!(l.root.contains("envs/giskard/bin/giskard"), "overlay applied to an index download");

    assert_eq!(run(&f, &p).layout.digest(), l.digest());
}

#[test]
fn verification_catches_injected_faults() {
    let f = load();
    let ex = run(&f, &plan(&f));
    let mut dangling = ex.layout.clone();
    dangling.symlinks.insert("ghost".into(), "/opt/iceforge/cli_scripts/ghost/ghost".into());
    let v = verify_layout(&dangling, &f.manifest).violations;
    assert_eq!(v.len(), 1, "{v:?}");
    assert!(matches!(&v[0], LayoutViolation::DanglingSymlink { cli_name, .. } if cli_name == "ghost"));

    let mut exposed = ex.layout.clone();
    exposed.symlinks.insert("pyrit".into(), "/opt/iceforge/global/bin/python".into());
    let v = verify_layout(&exposed, &f.manifest).violations;
    assert_eq!(v.len(), 1, "{v:?}");
    assert!(matches!(&v[0], LayoutViolation::UnexpectedSymlink { tool, .. } if tool == "pyrit"));

    let before = ex.layout.digest();
    let _ = verify_layout(&ex.layout, &f.manifest);
    assert_eq!(ex.layout.digest(), before);

    let mut broken = ex.layout.clone();
    broken.root.remove("envs/garak/bin/garak");
    let v = verify_layout(&broken, &f.manifest).violations;
    assert!(matches!(&v[..], [LayoutViolation::MissingExecTarget { .. }]), "{v:?}");
}

#[test]
fn missing_commit_stops_the_build() {
    let mut f = load();
    let fuzzy = f.manifest.tool("fuzzyai").unwrap().git_pin().unwrap();
    f.gitstore.remove(&fuzzy.url, &fuzzy.commit);
    let p = plan(&f);
    let ex = run(&f, &p);
    let last = ex.log.last().unwrap();
    assert_eq!(last.kind, StepKind::FetchGit);
    assert_eq!(last.tool.as_deref(), Some("fuzzyai"));
    assert_eq!(ex.log.entries().iter().filter(|e| e.outcome == iceforge_core::executor::Outcome::Failed).count(), 1);
    let later: Vec<&str> = ["fickling", "rigging", "judges", "promptfoo"].into();
    for t in later {
        assert!(!ex.layout.installed.contains_key(t), "{t}");
    }
    assert!(ex.layout.symlinks.is_empty());
}

#[test]
fn conflicting_curated_requirement() {
    let mut f = load();
    f.manifest.global_requirements.push("rigging>=3".into());
    let ex = run(&f, &plan(&f));
    let last = ex.log.last().unwrap();
    assert_eq!(last.kind, StepKind::InstallGlobalRequirements);
    assert!(last.detail.contains("merge conflict"), "{}", last.detail);
    assert!(last.detail.contains("rigging"), "{}", last.detail);
}

#[test]
fn precomputed_merge_inputs_match_the_build() {
    let f = load();
    let ex = run(&f, &plan(&f));
    let sets = iceforge_core::executor::global_requirement_sets(&f.manifest, &f.registry, &f.gitstore).unwrap();
    assert_eq!(sets, ex.layout.contributions);
    assert_eq!(sets.len(), 3);
}
