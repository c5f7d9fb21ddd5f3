//! Deterministic fixture repositories for tests, demos and the determinism
//! check.
//!
//! Histories are synthesized from a seed and committed with fixed author and
//! committer dates, so two builds produce identical commit ids. The
//! organization fixture covers author aliases, bot accounts, a merge commit,
//! a non-Java commit and an outlier commit that touches many files.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::pipeline::Caps;
use crate::seed::rng_for;

pub const CONFIG_FILE: &str = "config.json";
pub const ORGANIZATION_REPOS: [&str; 3] = ["core", "web", "tools"];
pub const GENERIC_REPOS: [&str; 3] = ["gen-alpha", "gen-beta", "gen-gamma"];

/// First organization commit time, UTC seconds.
const ORG_START: i64 = 1_600_000_000;
/// Generic history runs before the organization's.
const GENERIC_START: i64 = 1_500_000_000;

/// Small caps so a fixture of a few hundred instances yields eligible developers.
pub fn fixture_caps() -> Caps {
    Caps {
        top_contributors: 1000,
        top_developers: 100,
        methods_per_repo: 150,
        test_size: 20,
        min_train: 40,
        train_percent: 90,
        generic_pretrain_percent: 40,
    }
}

#[derive(Debug, Clone)]
struct Person {
    name: &'static str,
    email: &'static str,
}

const fn person(name: &'static str, email: &'static str) -> Person {
    Person { name, email }
}

struct Developer {
    aliases: Vec<Person>,
    home_repo: usize,
    commits: usize,
    vocab: &'static [&'static str],
}

const ALICE_VOCAB: &[&str] = &["ledger", "invoice", "account", "balance", "payment", "currency", "settlement", "posting"];
const BOB_VOCAB: &[&str] = &["request", "session", "cookie", "header", "route", "handler", "response", "token"];
const CAROL_VOCAB: &[&str] = &["parser", "lexeme", "grammar", "symbol", "scanner", "cursor", "buffer", "offset"];
const DAVE_VOCAB: &[&str] = &["widget", "panel", "layout", "border"];
const ERIN_VOCAB: &[&str] = &["metric", "gauge", "counter", "sample"];
const GENERIC_VOCAB: &[&str] = &["item", "value", "node", "entry", "list", "index", "count", "name", "data", "result", "element", "key"];
const VERBS: &[&str] = &["compute", "update", "resolve", "build", "merge", "apply", "collect", "render", "check", "load"];

fn developers() -> Vec<Developer> {
    vec![
        Developer {
            aliases: vec![
                person("Alice Liddell", "alice@acme.example"),
                person("alice liddell", "ALICE@acme.example"),
                person("A. Liddell", "alice@users.noreply.example"),
            ],
            home_repo: 0,
            commits: 36,
            vocab: ALICE_VOCAB,
        },
        Developer {
            aliases: vec![person("Bob Stone", "bob.stone@acme.example"), person("Robert Stone", "bob.stone@home.example")],
            home_repo: 1,
            commits: 30,
            vocab: BOB_VOCAB,
        },
        Developer { aliases: vec![person("Carol Díaz", "carol@acme.example")], home_repo: 2, commits: 26, vocab: CAROL_VOCAB },
        Developer { aliases: vec![person("Dave Moss", "dave@acme.example")], home_repo: 0, commits: 2, vocab: DAVE_VOCAB },
        Developer { aliases: vec![person("Erin Vale", "erin@acme.example")], home_repo: 1, commits: 6, vocab: ERIN_VOCAB },
    ]
}

const BOTS: [Person; 2] = [person("dependabot[bot]", "bot@deps.example"), person("GitHub Actions", "actions@ci.example")];

fn git(dir: &Path, args: &[&str], who: &Person, ts: i64) -> io::Result<()> {
    let date = format!("@{ts} +0000");
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(["-c", "commit.gpgsign=false", "-c", "core.autocrlf=false", "-c", "init.defaultBranch=main"])
        .args(args)
        .env("GIT_CONFIG_GLOBAL", "/dev/null")
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .env("GIT_AUTHOR_NAME", who.name)
        .env("GIT_AUTHOR_EMAIL", who.email)
        .env("GIT_AUTHOR_DATE", &date)
        .env("GIT_COMMITTER_NAME", who.name)
        .env("GIT_COMMITTER_EMAIL", who.email)
        .env("GIT_COMMITTER_DATE", &date)
        .output()?;
    if out.status.success() {
        Ok(())
    } else {
        Err(io::Error::other(format!("git {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))))
    }
}

/// One Java class kept in memory as a list of method texts.
#[derive(Debug, Clone)]
struct JavaFile {
    package: String,
    class: String,
    methods: Vec<String>,
}

impl JavaFile {
    fn render(&self) -> String {
        let mut s = format!("package {};\n\nimport java.util.List;\n\npublic class {} {{\n", self.package, self.class);
        for (i, m) in self.methods.iter().enumerate() {
            if i > 0 {
                s.push('\n');
            }
            s.push_str(m);
            s.push('\n');
        }
        s.push_str("}\n");
        s
    }
}

fn word(rng: &mut ChaCha8Rng, vocab: &[&str]) -> String {
    vocab.choose(rng).expect("non-empty vocabulary").to_string()
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

/// A single-line statement at the given indentation.
fn statement(rng: &mut ChaCha8Rng, vocab: &[&str], indent: &str) -> String {
    let (a, b) = (word(rng, vocab), word(rng, vocab));
    let num = rng.random_range(1..100);
    match rng.random_range(0..7) {
        0 => format!("{indent}int {a}Total = {b}Count + {num};"),
        1 => format!("{indent}String {a}Label = {b}Name.trim();"),
        2 => format!("{indent}{a}List.add({b}Value);"),
        3 => format!("{indent}log.info(\"{a} {b}\" + {num});"),
        4 => format!("{indent}{a}Sum += {b}Size * {num};"),
        5 => format!("{indent}{a}Map.put(\"{b}\", {num});"),
        _ => format!("{indent}long {a}Id = {b}Source.next({num});"),
    }
}

fn method(rng: &mut ChaCha8Rng, vocab: &[&str], name: &str) -> String {
    let ret = *["int", "String", "boolean", "void", "long"].choose(rng).expect("types");
    let params: Vec<String> = (0..rng.random_range(0..3)).map(|i| format!("int {}{i}", word(rng, vocab))).collect();
    let mut lines = vec![format!("    public {ret} {name}({}) {{", params.join(", "))];
    for _ in 0..rng.random_range(3..7) {
        match rng.random_range(0..6) {
            0 => {
                let (a, n) = (word(rng, vocab), rng.random_range(1..50));
                lines.push(format!("        if ({a}Count > {n}) {{"));
                lines.push(statement(rng, vocab, "            "));
                lines.push("        }".to_string());
            }
            1 => {
                let n = rng.random_range(2..20);
                lines.push(format!("        for (int i = 0; i < {n}; i++) {{"));
                lines.push(statement(rng, vocab, "            "));
                lines.push(statement(rng, vocab, "            "));
                lines.push("        }".to_string());
            }
            _ => lines.push(statement(rng, vocab, "        ")),
        }
    }
    let a = word(rng, vocab);
    match ret {
        "int" => lines.push(format!("        return {a}Count + 1;")),
        "String" => lines.push(format!("        return {a}Name.toString();")),
        "boolean" => lines.push(format!("        return {a}Count > 0;")),
        "long" => lines.push(format!("        return {a}Id * 2L;")),
        _ => {}
    }
    lines.push("    }".to_string());
    lines.join("\n")
}

/// Replaces one plain statement line of a method with a fresh statement.
fn modify(rng: &mut ChaCha8Rng, vocab: &[&str], text: &str) -> String {
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let candidates: Vec<usize> = (1..lines.len() - 1).filter(|&i| lines[i].ends_with(';') && !lines[i].trim_start().starts_with("return")).collect();
    if let Some(&i) = candidates.choose(rng) {
        let indent: String = lines[i].chars().take_while(|c| *c == ' ').collect();
        lines[i] = statement(rng, vocab, &indent);
    }
    lines.join("\n")
}

struct FixtureRepo {
    dir: PathBuf,
    package: String,
    files: BTreeMap<String, JavaFile>,
    next_class: usize,
    next_method: usize,
}

impl FixtureRepo {
    fn init(dir: PathBuf, id: &str) -> io::Result<FixtureRepo> {
        fs::create_dir_all(&dir)?;
        git(&dir, &["init", "-q", "-b", "main"], &BOTS[0], GENERIC_START)?;
        Ok(FixtureRepo { dir, package: format!("org.example.{}", id.replace('-', "")), files: BTreeMap::new(), next_class: 0, next_method: 0 })
    }

    fn write(&self, path: &str) -> io::Result<()> {
        let full = self.dir.join(path);
        fs::create_dir_all(full.parent().expect("file has a parent"))?;
        fs::write(full, self.files[path].render())
    }

    fn new_file(&mut self, rng: &mut ChaCha8Rng, vocab: &[&str], prefix: &str) -> String {
        let class = format!("{}{}{}", prefix, capitalize(&word(rng, vocab)), self.next_class);
        self.next_class += 1;
        let path = format!("src/main/java/{}/{class}.java", self.package.replace('.', "/"));
        self.files.insert(path.clone(), JavaFile { package: self.package.clone(), class, methods: Vec::new() });
        path
    }

    fn add_methods(&mut self, rng: &mut ChaCha8Rng, vocab: &[&str], path: &str, count: usize) {
        for _ in 0..count {
            let name = format!("{}{}{}", word(rng, VERBS), capitalize(&word(rng, vocab)), self.next_method);
            self.next_method += 1;
            let m = method(rng, vocab, &name);
            self.files.get_mut(path).expect("known file").methods.push(m);
        }
    }

    /// Adds methods to a new or existing file and sometimes edits an older
    /// method, then commits.
    fn work(&mut self, rng: &mut ChaCha8Rng, vocab: &[&str], who: &Person, ts: i64, new_methods: usize) -> io::Result<()> {
        let existing: Vec<String> = self.files.keys().filter(|p| !p.contains("/Feature")).cloned().collect();
        let path = if existing.is_empty() || rng.random_bool(0.35) {
            self.new_file(rng, vocab, "")
        } else {
            existing.choose(rng).expect("non-empty").clone()
        };
        self.add_methods(rng, vocab, &path, new_methods);
        self.write(&path)?;
        if !existing.is_empty() && rng.random_bool(0.6) {
            let other = existing.choose(rng).expect("non-empty").clone();
            let file = self.files.get_mut(&other).expect("known file");
            if !file.methods.is_empty() {
                let k = rng.random_range(0..file.methods.len());
                file.methods[k] = modify(rng, vocab, &file.methods[k]);
                self.write(&other)?;
            }
        }
        self.commit(who, ts, "work")
    }

    fn commit(&self, who: &Person, ts: i64, message: &str) -> io::Result<()> {
        git(&self.dir, &["add", "-A"], who, ts)?;
        git(&self.dir, &["commit", "-q", "--allow-empty", "-m", message], who, ts)
    }
}

fn write_config(root: &Path, seed: u64, repos: &[&str], generic: &[&str], caps: Caps) -> io::Result<PathBuf> {
    let spec = |id: &&str| json!({"id": id, "path": format!("repos/{id}"), "branch": "main"});
    let config = json!({
        "organization": "acme",
        "repos": repos.iter().map(spec).collect::<Vec<_>>(),
        "generic_repos": generic.iter().map(spec).collect::<Vec<_>>(),
        "seed": seed,
        "caps": caps,
        "output_dir": "out",
    });
    let path = root.join(CONFIG_FILE);
    fs::write(&path, serde_json::to_string_pretty(&config).expect("json") + "\n")?;
    Ok(path)
}

/// Builds the three-repository organization plus three generic repositories
/// under `root` and writes `root/config.json`. Returns the config path.
pub fn build_organization_fixture(root: &Path, seed: u64) -> io::Result<PathBuf> {
    let mut rng = rng_for(seed, &["fixture", "organization"]);
    let mut repos: Vec<FixtureRepo> = ORGANIZATION_REPOS
        .iter()
        .map(|id| FixtureRepo::init(root.join("repos").join(id), id))
        .collect::<io::Result<_>>()?;

    // interleave developer commits in a seeded order
    let devs = developers();
    let mut schedule: Vec<usize> = devs.iter().enumerate().flat_map(|(i, d)| std::iter::repeat_n(i, d.commits)).collect();
    for i in (1..schedule.len()).rev() {
        schedule.swap(i, rng.random_range(0..=i));
    }
    let mut ts = ORG_START;
    let merge_at = schedule.len() / 2;
    for (step, &d) in schedule.iter().enumerate() {
        ts += rng.random_range(600..7200);
        let dev = &devs[d];
        let who = dev.aliases.choose(&mut rng).expect("aliases").clone();
        let repo = if rng.random_bool(0.8) { dev.home_repo } else { rng.random_range(0..repos.len()) };
        repos[repo].work(&mut rng, dev.vocab, &who, ts, 2)?;

        if step == 10 {
            // many-file commit that the outlier filter removes
            ts += 60;
            let r = &mut repos[0];
            for _ in 0..30 {
                let path = r.new_file(&mut rng, ALICE_VOCAB, "Generated");
                r.add_methods(&mut rng, ALICE_VOCAB, &path, 1);
                r.write(&path)?;
            }
            r.commit(&devs[0].aliases[0], ts, "bulk import")?;
        }
        if step == 20 || step == 60 {
            ts += 60;
            let bot = &BOTS[step / 40];
            repos[1].work(&mut rng, GENERIC_VOCAB, bot, ts, 1)?;
        }
        if step == 30 {
            ts += 60;
            let r = &repos[2];
            fs::write(r.dir.join("README.md"), "Tools for the acme build.\n")?;
            r.commit(&devs[2].aliases[0], ts, "docs")?;
        }
        if step == merge_at {
            // side branch on `web`, merged back without fast-forward
            let carol = devs[2].aliases[0].clone();
            let r = &mut repos[1];
            git(&r.dir, &["checkout", "-q", "-b", "feature"], &carol, ts)?;
            let path = r.new_file(&mut rng, CAROL_VOCAB, "Feature");
            for _ in 0..2 {
                ts += 300;
                r.add_methods(&mut rng, CAROL_VOCAB, &path, 2);
                r.write(&path)?;
                r.commit(&carol, ts, "feature work")?;
            }
            git(&r.dir, &["checkout", "-q", "main"], &carol, ts)?;
            ts += 300;
            r.work(&mut rng, BOB_VOCAB, &devs[1].aliases[0], ts, 2)?;
            ts += 300;
            git(&r.dir, &["merge", "-q", "--no-ff", "-m", "merge feature", "feature"], &carol, ts)?;
        }
    }

    let mut gts = GENERIC_START;
    for (gi, id) in GENERIC_REPOS.iter().enumerate() {
        let mut r = FixtureRepo::init(root.join("repos").join(id), id)?;
        let who = Person { name: ["Gus Hale", "Hana Ito", "Ivan Roe"][gi], email: ["gus@oss.example", "hana@oss.example", "ivan@oss.example"][gi] };
        for _ in 0..40 {
            gts += rng.random_range(600..7200);
            r.work(&mut rng, GENERIC_VOCAB, &who, gts, 5)?;
        }
    }
    write_config(root, seed, &ORGANIZATION_REPOS, &GENERIC_REPOS, fixture_caps())
}

/// One repository whose single developer never reaches eligibility.
pub fn build_ineligible_fixture(root: &Path, seed: u64) -> io::Result<PathBuf> {
    let mut rng = rng_for(seed, &["fixture", "ineligible"]);
    let mut r = FixtureRepo::init(root.join("repos").join("solo"), "solo")?;
    let who = person("Dave Moss", "dave@acme.example");
    let mut ts = ORG_START;
    for _ in 0..4 {
        ts += 3600;
        r.work(&mut rng, DAVE_VOCAB, &who, ts, 2)?;
    }
    write_config(root, seed, &["solo"], &[], fixture_caps())
}
