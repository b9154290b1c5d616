//! Checks shared by the acceptance runner and the regular test files. Each
//! returns a one-line summary on success and a description of the first
//! mismatch on failure.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use qlint::analyses::{RuleId, Warning};
use qlint::cli::{self, analyze_files, Config, Profile};
use qlint::pipeline::analyze;
use qlint::qir::GateTable;
use qlint::report::{self, Style};

use super::{random_program, reference_relations, GenOptions, LineMap, Relations};

pub type Outcome = Result<String, String>;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn rules(profile: Profile) -> BTreeSet<RuleId> {
    Config::new(profile, &[], &[]).unwrap().effective_rules()
}

pub fn warnings_of(path: &Path, profile: Profile) -> Vec<Warning> {
    let src = std::fs::read_to_string(path).unwrap();
    let name = path.to_string_lossy();
    let a = analyze(&src, &name, 10, GateTable::bundled_ref()).unwrap();
    cli::suppress(a.warnings(&rules(profile)), &src)
}

fn pairs(ws: &[Warning]) -> BTreeSet<(String, u32)> {
    ws.iter().map(|w| (w.rule.to_string(), w.span.line)).collect()
}

fn set(items: &[(&str, u32)]) -> BTreeSet<(String, u32)> {
    items.iter().map(|(r, l)| (r.to_string(), *l)).collect()
}

/// Reference programs with the exact warnings expected under `--profile all`, and
/// the rule their fixed twin must not trigger.
pub const FIGURES: &[(&str, &[(&str, u32)], &str)] = &[
    ("fig1", &[("oversized-circuit", 7), ("op-after-meas", 12)], "op-after-meas"),
    ("fig5", &[("double-meas", 8)], "double-meas"),
    ("fig6", &[("op-after-meas", 8)], "op-after-meas"),
    ("fig7", &[("meas-all-abuse", 7)], "meas-all-abuse"),
    ("fig9a", &[("double-meas", 15)], "double-meas"),
    ("fig9b", &[("ghost-compose", 14), ("insuff-clas-reg", 7)], "ghost-compose"),
];

pub fn figure_suite() -> Outcome {
    let start = Instant::now();
    let dir = fixtures().join("figures");
    for (name, expected, rule) in FIGURES {
        let got = pairs(&warnings_of(&dir.join(format!("{name}.py")), Profile::All));
        if got != set(expected) {
            return Err(format!("{name}: expected {expected:?}, got {got:?}"));
        }
        let fixed = warnings_of(&dir.join(format!("{name}_fixed.py")), Profile::All);
        if fixed.iter().any(|w| w.rule.as_str() == *rule) {
            return Err(format!("{name}_fixed still triggers {rule}"));
        }
    }
    // the one rule named for fig9b is also the only default-profile warning
    let b = pairs(&warnings_of(&dir.join("fig9b.py"), Profile::Default));
    if b != set(&[("ghost-compose", 14)]) {
        return Err(format!("fig9b default profile: {b:?}"));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(1) {
        return Err(format!("reference suite took {elapsed:?}"));
    }
    Ok(format!("{} reference programs and fixed twins exact in {elapsed:.2?}", FIGURES.len()))
}

pub fn default_profile() -> Outcome {
    let named: BTreeSet<RuleId> = [
        "double-meas",
        "op-after-meas",
        "meas-all-abuse",
        "cond-wo-meas",
        "ghost-compose",
        "op-after-transp",
    ]
    .iter()
    .map(|s| s.parse().unwrap())
    .collect();
    if rules(Profile::Default) != named {
        return Err(format!("effective default set {:?}", rules(Profile::Default)));
    }
    let mut out = Vec::new();
    let mut err = Vec::new();
    cli::run_with(["qlint", "rules"], &mut out, &mut err);
    let listed: BTreeSet<RuleId> = String::from_utf8(out)
        .unwrap()
        .lines()
        .filter(|l| l.split_whitespace().nth(1) == Some("default"))
        .map(|l| l.split_whitespace().next().unwrap().parse().unwrap())
        .collect();
    if listed != named {
        return Err(format!("`qlint rules` marks {listed:?} as default"));
    }
    let fig1 = fixtures().join("figures/fig1.py");
    let mut out = Vec::new();
    let code = cli::run_with(["qlint".into(), "check".into(), fig1.into_os_string()], &mut out, &mut err);
    let text = String::from_utf8(out).unwrap();
    let rules_seen: Vec<&str> = text.lines().filter_map(|l| l.split(' ').nth(1)).collect();
    if code != 1 || rules_seen != ["op-after-meas"] {
        return Err(format!("fig1 without flags: exit {code}, output {text:?}"));
    }
    Ok("default profile is the six precise rules; fig1 gives only op-after-meas".into())
}

fn op_of(map: &LineMap, line: u32) -> Option<usize> {
    map.get(line as usize - 1).copied().flatten()
}

/// Relations computed by the analyzer, translated to program op indices.
pub fn analyzed_relations(src: &str, map: &LineMap) -> Relations {
    let a = analyze(src, "gen.py", 10, GateTable::bundled_ref()).unwrap();
    let key = |k: qlint::qflow::QubitKey| (a.ir.register(k.register).name.clone(), k.index as usize);
    let op = |e| op_of(map, a.ir.event(e).span.line).expect("event on an op line");
    Relations {
        may_follow: a
            .flow
            .may_follow
            .iter()
            .map(|&(x, y, k)| {
                let (r, i) = key(k);
                (op(x), op(y), r, i)
            })
            .collect(),
        directly: a
            .flow
            .may_follow_directly
            .iter()
            .map(|&(x, y, k)| {
                let (r, i) = key(k);
                (op(x), op(y), r, i)
            })
            .collect(),
    }
}

pub fn flow_oracle(count: usize) -> Outcome {
    let start = Instant::now();
    let opts = GenOptions {
        max_ops: 10,
        with_loop: false,
        with_measure_all: true,
        with_unresolved: false,
    };
    let mut pairs_checked = 0;
    for seed in 0..count as u64 {
        let p = random_program(seed, GateTable::bundled_ref(), &opts);
        let (src, map) = p.render();
        let expected = reference_relations(&p);
        let got = analyzed_relations(&src, &map);
        if got != expected {
            return Err(format!(
                "seed {seed}: relations differ\n{src}\nexpected {expected:?}\ngot {got:?}"
            ));
        }
        pairs_checked += expected.may_follow.len();
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        return Err(format!("oracle comparison took {elapsed:?}"));
    }
    Ok(format!("{count} programs, {pairs_checked} may-follow facts, 0 mismatches in {elapsed:.2?}"))
}

fn warnings_by_op(src: &str, map: &LineMap) -> BTreeSet<(RuleId, Option<usize>)> {
    let a = analyze(src, "gen.py", 10, GateTable::bundled_ref()).unwrap();
    a.warnings(&RuleId::ALL.into_iter().collect())
        .iter()
        .map(|w| (w.rule, op_of(map, w.span.line)))
        .collect()
}

pub fn unroll_equivalence(count: usize) -> Outcome {
    let opts = GenOptions {
        max_ops: 10,
        with_loop: true,
        with_measure_all: true,
        with_unresolved: false,
    };
    let mut with_warnings = 0;
    for seed in 0..count as u64 {
        let p = random_program(10_000 + seed, GateTable::bundled_ref(), &opts);
        let (looped, lmap) = p.render();
        let (flat, fmap) = p.render_expanded();
        let a = warnings_by_op(&looped, &lmap);
        let b = warnings_by_op(&flat, &fmap);
        if a != b {
            return Err(format!("seed {seed}:\n{looped}\n{a:?}\nexpanded:\n{flat}\n{b:?}"));
        }
        with_warnings += usize::from(!a.is_empty());
    }
    Ok(format!("{count} looped programs match their expansion ({with_warnings} with warnings)"))
}

fn json_for(files: &[PathBuf], jobs: Option<usize>) -> String {
    let mut c = Config::new(Profile::All, &[], &[]).unwrap();
    c.jobs = jobs;
    let (r, _) = analyze_files(files, &c, GateTable::bundled_ref()).unwrap();
    report::format(&r, Style::Json)
}

pub fn determinism(dir: &Path) -> Outcome {
    let mut files = super::write_corpus(dir, 200, GateTable::bundled_ref());
    let first = json_for(&files, Some(1));
    let second = json_for(&files, Some(1));
    let parallel = json_for(&files, Some(4));
    files.reverse();
    let reversed = json_for(&files, None);
    if first != second {
        return Err("two sequential runs differ".into());
    }
    if first != parallel {
        return Err("parallel run differs from sequential".into());
    }
    if first != reversed {
        return Err("reversed input order changes the report".into());
    }
    Ok(format!("200 files: sequential x2, parallel and reversed reports identical ({} bytes)", first.len()))
}

pub fn throughput(dir: &Path) -> Outcome {
    let files = super::write_corpus(dir, 200, GateTable::bundled_ref());
    let start = Instant::now();
    let mut c = Config::new(Profile::All, &[], &[]).unwrap();
    c.jobs = Some(1);
    let (r, _) = analyze_files(&files, &c, GateTable::bundled_ref()).unwrap();
    let elapsed = start.elapsed();
    if r.files_analyzed != 200 {
        return Err(format!("only {} files analyzed", r.files_analyzed));
    }
    if elapsed > Duration::from_secs(10) {
        return Err(format!("200 files took {elapsed:?}"));
    }
    Ok(format!("200 files analyzed sequentially in {elapsed:.2?}"))
}

/// `(file, expected (rule, line) set)` for every labeled corpus file.
pub fn labeled_files() -> Vec<(PathBuf, BTreeSet<(String, u32)>)> {
    let mut out = Vec::new();
    let root = fixtures().join("labeled");
    for entry in walkdir::WalkDir::new(&root).sort_by_file_name() {
        let entry = entry.unwrap();
        if entry.path().extension().is_some_and(|e| e == "py") {
            let src = std::fs::read_to_string(entry.path()).unwrap();
            let expected = src
                .lines()
                .enumerate()
                .filter_map(|(i, l)| {
                    l.split("# expect: ").nth(1).map(|r| (r.trim().to_string(), i as u32 + 1))
                })
                .collect();
            out.push((entry.into_path(), expected));
        }
    }
    out
}

pub fn labeled_corpus() -> Outcome {
    let files = labeled_files();
    let mut per_rule: std::collections::BTreeMap<String, (usize, usize)> = Default::default();
    for (path, expected) in &files {
        let rule = path.parent().unwrap().file_name().unwrap().to_string_lossy().to_string();
        let got = pairs(&warnings_of(path, Profile::All));
        let is_bug = path.to_string_lossy().ends_with("_bug.py");
        if is_bug {
            if expected.is_empty() || expected.iter().any(|(r, _)| *r != rule) {
                return Err(format!("{}: malformed expectation markers", path.display()));
            }
            let missed: Vec<_> = expected.difference(&got).collect();
            if !missed.is_empty() {
                return Err(format!("{}: missed {missed:?}", path.display()));
            }
        } else if got.iter().any(|(r, _)| *r == rule) {
            return Err(format!("{}: clean twin triggers {rule}", path.display()));
        }
        let e = per_rule.entry(rule).or_default();
        if is_bug {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    if per_rule.len() != 10 || per_rule.values().any(|&(b, c)| b < 6 || c < 6) {
        return Err(format!("corpus too small: {per_rule:?}"));
    }
    Ok(format!("{} files, 10 rules: 100% seeded bugs found, 0 warnings on clean twins", files.len()))
}

/// No const-clas-bit or oversized-circuit warning on a circuit whose IR has
/// an unknown operator.
pub fn exclusion_sound(src: &str) -> Result<(), String> {
    let a = analyze(src, "gen.py", 10, GateTable::bundled_ref()).map_err(|e| e.to_string())?;
    for w in a.warnings(&RuleId::ALL.into_iter().collect()) {
        if !matches!(w.rule, RuleId::ConstClasBit | RuleId::OversizedCircuit) {
            continue;
        }
        let name = w.circuit.as_deref().unwrap_or_default();
        for c in a.ir.circuits.iter().filter(|c| c.name == name) {
            if a.ir.has_unknown_operator(c.id) {
                return Err(format!("{} on circuit {name} with an unknown operator", w.rule));
            }
        }
    }
    Ok(())
}

pub fn monotone(src: &str, small: &BTreeSet<RuleId>, large: &BTreeSet<RuleId>) -> Result<(), String> {
    let a = analyze(src, "gen.py", 10, GateTable::bundled_ref()).map_err(|e| e.to_string())?;
    let lo = a.warnings(small);
    let hi = a.warnings(large);
    match lo.iter().find(|w| !hi.contains(w)) {
        Some(w) => Err(format!("{w:?} disappears when enabling more rules")),
        None => Ok(()),
    }
}

pub fn invariants() -> Outcome {
    let opts = GenOptions {
        max_ops: 10,
        with_loop: true,
        with_measure_all: true,
        with_unresolved: true,
    };
    let all: BTreeSet<RuleId> = RuleId::ALL.into_iter().collect();
    let mut sources: Vec<String> = (0..200u64)
        .map(|s| random_program(50_000 + s, GateTable::bundled_ref(), &opts).render().0)
        .collect();
    sources.extend(labeled_files().iter().map(|(p, _)| std::fs::read_to_string(p).unwrap()));
    for src in &sources {
        exclusion_sound(src)?;
        for r in RuleId::ALL {
            let small: BTreeSet<RuleId> = [r].into_iter().collect();
            monotone(src, &small, &all)?;
        }
        monotone(src, &RuleId::DEFAULT.into_iter().collect(), &all)?;
    }
    // fix-closure: each clean twin is its bug file with the documented fix
    for (path, _) in labeled_files() {
        let s = path.to_string_lossy();
        if let Some(stem) = s.strip_suffix("_bug.py") {
            let rule = path.parent().unwrap().file_name().unwrap().to_string_lossy().to_string();
            let fixed = PathBuf::from(format!("{stem}_clean.py"));
            if warnings_of(&fixed, Profile::All).iter().any(|w| w.rule.as_str() == rule) {
                return Err(format!("fix of {} still triggers {rule}", path.display()));
            }
        }
    }
    Ok(format!(
        "exclusion soundness and monotone configuration on {} programs; fix-closure on 60 pairs",
        sources.len()
    ))
}
