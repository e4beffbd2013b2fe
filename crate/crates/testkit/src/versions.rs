//! Reference version ordering.
//!
//! Versions are mapped to a plain key tuple and compared lexicographically:
//! release numbers zero-padded to a common length, then a pre-release rank
//! (`a` < `b` < `rc` < final), then a post-release rank (none < `post0` <
//! `post1` ...).

use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Key {
    pub release: Vec<u64>,
    pub pre: (u8, u64),
    pub post: u64,
}

pub fn key(s: &str) -> Key {
    let (main, post) = match s.split_once(".post") {
        Some((m, n)) => (m, n.parse::<u64>().expect("post number") + 1),
        None => (s, 0),
    };
    let cut = main.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(main.len());
    let (release, pre) = main.split_at(cut);
    let pre = if pre.is_empty() {
        (3, 0)
    } else {
        let digits = pre.find(|c: char| c.is_ascii_digit()).expect("pre number");
        let rank = match &pre[..digits] {
            "a" => 0,
            "b" => 1,
            "rc" => 2,
            other => panic!("unknown pre-release tag {other}"),
        };
        (rank, pre[digits..].parse().expect("pre number"))
    };
    Key { release: release.split('.').map(|n| n.parse().expect("release number")).collect(), pre, post }
}

pub fn cmp(a: &str, b: &str) -> Ordering {
    cmp_keys(&key(a), &key(b))
}

pub fn cmp_keys(a: &Key, b: &Key) -> Ordering {
    let n = a.release.len().max(b.release.len());
    let pad = |r: &[u64]| (0..n).map(|i| r.get(i).copied().unwrap_or(0)).collect::<Vec<_>>();
    (pad(&a.release), a.pre, a.post).cmp(&(pad(&b.release), b.pre, b.post))
}

/// Every version with 1 to 3 release segments valued 0 to 5, each with no
/// pre-release or `a1`/`b1`/`rc1`, and no post-release or `.post0`/`.post1`.
pub fn corpus() -> Vec<String> {
    let mut releases: Vec<String> = Vec::new();
    for len in 1..=3u32 {
        for n in 0..6usize.pow(len) {
            let segs: Vec<String> = (0..len).rev().map(|i| ((n / 6usize.pow(i)) % 6).to_string()).collect();
            releases.push(segs.join("."));
        }
    }
    let mut out = Vec::new();
    for r in &releases {
        for pre in ["", "a1", "b1", "rc1"] {
            for post in ["", ".post0", ".post1"] {
                out.push(format!("{r}{pre}{post}"));
            }
        }
    }
    out
}
