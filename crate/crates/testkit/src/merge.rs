//! Brute-force reference for the global requirements merge.
//!
//! Every assignment of one available version per referenced package is
//! enumerated. The merge succeeds iff some assignment meets every
//! requirement, and its pins are then the assignment that is highest in
//! every package at once.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::versions;

pub const OPERATORS: [&str; 7] = ["==", "!=", ">=", "<=", ">", "<", "~="];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spec {
    pub op: &'static str,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Req {
    pub package: String,
    pub specs: Vec<Spec>,
}

impl Req {
    /// Requirement text, e.g. `pkg>=1.0,<2`.
    pub fn render(&self) -> String {
        let specs: Vec<String> = self.specs.iter().map(|s| format!("{}{}", s.op, s.version)).collect();
        format!("{}{}", self.package, specs.join(","))
    }
}

pub fn allows(spec: &Spec, candidate: &str) -> bool {
    let ord = versions::cmp(candidate, &spec.version);
    match spec.op {
        "==" => ord == Ordering::Equal,
        "!=" => ord != Ordering::Equal,
        ">=" => ord != Ordering::Less,
        "<=" => ord != Ordering::Greater,
        ">" => ord == Ordering::Greater,
        "<" => ord == Ordering::Less,
        "~=" => {
            let want = versions::key(&spec.version).release;
            let have = versions::key(candidate).release;
            let prefix_ok = (0..want.len() - 1).all(|i| have.get(i).copied().unwrap_or(0) == want[i]);
            ord != Ordering::Less && prefix_ok
        }
        other => panic!("unknown operator {other}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expected {
    /// Some referenced package is missing from the registry.
    Unknown,
    Pinned(BTreeMap<String, String>),
    /// Packages with no admissible version.
    Conflict(BTreeSet<String>),
}

pub fn brute_force(registry: &BTreeMap<String, Vec<String>>, reqs: &BTreeMap<String, Vec<Req>>) -> Expected {
    let all: Vec<&Req> = reqs.values().flatten().collect();
    let packages: BTreeSet<&str> = all.iter().map(|r| r.package.as_str()).collect();
    let mut domains: Vec<(&str, &[String])> = Vec::new();
    for p in &packages {
        match registry.get(*p) {
            Some(vs) => domains.push((p, vs)),
            None => return Expected::Unknown,
        }
    }

    let ok = |pkg: &str, v: &str| all.iter().filter(|r| r.package == pkg).all(|r| r.specs.iter().all(|s| allows(s, v)));

    let mut satisfying: Vec<Vec<&str>> = Vec::new();
    let mut idx = vec![0usize; domains.len()];
    let total: usize = domains.iter().map(|(_, vs)| vs.len()).product();
    for _ in 0..total {
        let assignment: Vec<&str> = domains.iter().zip(&idx).map(|((_, vs), &i)| vs[i].as_str()).collect();
        if domains.iter().zip(&assignment).all(|((p, _), v)| ok(p, v)) {
            satisfying.push(assignment);
        }
        for (d, i) in idx.iter_mut().enumerate() {
            *i += 1;
            if *i < domains[d].1.len() {
                break;
            }
            *i = 0;
        }
    }

    if satisfying.is_empty() {
        let bad = domains
            .iter()
            .filter(|(p, vs)| !vs.iter().any(|v| ok(p, v)))
            .map(|(p, _)| p.to_string())
            .collect();
        return Expected::Conflict(bad);
    }

    let best = satisfying
        .iter()
        .find(|a| {
            satisfying
                .iter()
                .all(|b| a.iter().zip(b.iter()).all(|(x, y)| versions::cmp(x, y) != Ordering::Less))
        })
        .expect("constraints are per package, so a dominating assignment exists");
    Expected::Pinned(domains.iter().zip(best).map(|((p, _), v)| (p.to_string(), v.to_string())).collect())
}

fn random_version<R: Rng>(rng: &mut R, min_segments: usize) -> String {
    let len = rng.gen_range(min_segments..=3);
    let segs: Vec<String> = (0..len).map(|_| rng.gen_range(0..4).to_string()).collect();
    let mut v = segs.join(".");
    if rng.gen_bool(0.15) {
        v.push_str(["a1", "b2", "rc1"].choose(rng).unwrap());
    }
    if rng.gen_bool(0.1) {
        v.push_str(".post1");
    }
    v
}

/// A registry of up to 4 packages with up to 5 distinct versions each, and
/// 1 to 3 tools placing random requirements on them. About one case in
/// twenty references a package the registry lacks.
pub fn random_case<R: Rng>(rng: &mut R) -> (BTreeMap<String, Vec<String>>, BTreeMap<String, Vec<Req>>) {
    let names = ["alpha", "beta", "gamma", "delta"];
    let n_packages = rng.gen_range(1..=4);
    let mut registry = BTreeMap::new();
    for name in &names[..n_packages] {
        let mut vs: Vec<String> = Vec::new();
        for _ in 0..rng.gen_range(1..=5) {
            let v = random_version(rng, 1);
            if !vs.iter().any(|w| versions::cmp(w, &v) == Ordering::Equal) {
                vs.push(v);
            }
        }
        registry.insert(name.to_string(), vs);
    }

    let mut reqs = BTreeMap::new();
    for t in 0..rng.gen_range(1..=3) {
        let mut list = Vec::new();
        for _ in 0..rng.gen_range(0..=3) {
            let package = if rng.gen_bool(0.05) {
                "missing".to_string()
            } else {
                names[rng.gen_range(0..n_packages)].to_string()
            };
            let specs = (0..rng.gen_range(0..=2))
                .map(|_| {
                    let op = *OPERATORS.choose(rng).unwrap();
                    let version = if op != "~=" && rng.gen_bool(0.5) {
                        registry.get(&package).and_then(|vs: &Vec<String>| vs.choose(rng).cloned()).unwrap_or_else(|| random_version(rng, 1))
                    } else {
                        random_version(rng, if op == "~=" { 2 } else { 1 })
                    };
                    Spec { op, version }
                })
                .collect();
            list.push(Req { package, specs });
        }
        reqs.insert(format!("tool{t}"), list);
    }
    (registry, reqs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg(pairs: &[(&str, &[&str])]) -> BTreeMap<String, Vec<String>> {
        pairs.iter().map(|(p, vs)| (p.to_string(), vs.iter().map(|v| v.to_string()).collect())).collect()
    }

    fn req(package: &str, specs: &[(&'static str, &str)]) -> Req {
        Req { package: package.into(), specs: specs.iter().map(|(op, v)| Spec { op, version: v.to_string() }).collect() }
    }

    #[test]
    fn picks_highest_admissible() {
        let r = reg(&[("x", &["1.0", "1.5", "2.0"]), ("y", &["0.1"])]);
        let reqs = BTreeMap::from([
            ("a".to_string(), vec![req("x", &[(">=", "1.0")])]),
            ("b".to_string(), vec![req("x", &[("<", "2.0")]), req("y", &[])]),
        ]);
        let want = BTreeMap::from([("x".to_string(), "1.5".to_string()), ("y".to_string(), "0.1".to_string())]);
        assert_eq!(brute_force(&r, &reqs), Expected::Pinned(want));
    }

    #[test]
    fn conflict_and_unknown() {
        let r = reg(&[("x", &["1.0", "2.0"])]);
        let reqs = BTreeMap::from([
            ("a".to_string(), vec![req("x", &[(">=", "2.0")])]),
            ("b".to_string(), vec![req("x", &[("<", "2.0")])]),
        ]);
        assert_eq!(brute_force(&r, &reqs), Expected::Conflict(BTreeSet::from(["x".to_string()])));
        let reqs = BTreeMap::from([("a".to_string(), vec![req("nope", &[])])]);
        assert_eq!(brute_force(&r, &reqs), Expected::Unknown);
    }

    #[test]
    fn compatible_release() {
        let s = Spec { op: "~=", version: "1.4.2".into() };
        assert!(allows(&s, "1.4.5"));
        assert!(!allows(&s, "1.5.0"));
        assert!(!allows(&s, "1.4.1"));
        let s = Spec { op: "~=", version: "2.1".into() };
        assert!(allows(&s, "2.9"));
        assert!(!allows(&s, "3.0"));
    }
}
