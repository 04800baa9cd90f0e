//! Unsafe-API usage mining over a local corpus of Rust packages.

mod lexer;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::docstore::{DocDatabase, SignatureKind};
use crate::exec::Execution;
pub use lexer::strip_comments_and_strings;

/// Names of unsafe APIs that collide with safe standard-library functions.
pub const SHIPPED_SAFE_NAMES: &str = include_str!("../../data/safe_names.txt");

/// One name per line; blank lines and `#` comments are ignored.
pub fn parse_name_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn shipped_safe_names() -> BTreeSet<String> {
    parse_name_list(SHIPPED_SAFE_NAMES)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ApiNameDictionary {
    pub names: BTreeSet<String>,
    pub excluded: BTreeSet<String>,
}

/// Distinct function names across the database, minus those in `safe_names`.
pub fn build_dictionary(db: &DocDatabase, safe_names: &BTreeSet<String>) -> ApiNameDictionary {
    let all: BTreeSet<String> = db
        .iter()
        .filter(|r| r.signature.kind == SignatureKind::Fn)
        .map(|r| r.name().to_string())
        .collect();
    let (excluded, names) = all.into_iter().partition(|n| safe_names.contains(n));
    ApiNameDictionary { names, excluded }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub root: PathBuf,
    /// Matched against each file's path relative to `root`.
    pub file_pattern: glob::Pattern,
    pub strip_comments_and_strings: bool,
    pub require_unsafe_in_file: bool,
    /// Count every whole-token occurrence, not only call-like ones.
    pub bare_token: bool,
    /// When false, packages named in `yanked` are skipped.
    pub follow_yanked: bool,
    pub yanked: BTreeSet<String>,
    pub execution: Execution,
}

impl ScanConfig {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            file_pattern: glob::Pattern::new("*.rs").expect("static pattern"),
            strip_comments_and_strings: true,
            require_unsafe_in_file: true,
            bare_token: false,
            follow_yanked: false,
            yanked: BTreeSet::new(),
            execution: Execution::default(),
        }
    }
}

/// Result of scanning one file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileScan {
    pub counts: BTreeMap<String, u64>,
    pub has_unsafe: bool,
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

/// Identifier tokens with their byte ranges.
pub(crate) fn identifiers(text: &str) -> impl Iterator<Item = (usize, usize)> + '_ {
    let bytes = text.as_bytes();
    let mut i = 0;
    std::iter::from_fn(move || {
        while i < bytes.len() {
            if is_ident_byte(bytes[i]) {
                let start = i;
                while i < bytes.len() && is_ident_byte(bytes[i]) {
                    i += 1;
                }
                if !bytes[start].is_ascii_digit() {
                    return Some((start, i));
                }
            } else {
                i += 1;
            }
        }
        None
    })
}

fn skip_ws(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    i
}

/// End of a `<...>` group starting at `i`, ignoring the `>` of `->`.
fn angle_group_end(bytes: &[u8], mut i: usize) -> Option<usize> {
    let mut depth = 0usize;
    while i < bytes.len() {
        match bytes[i] {
            b'<' => depth += 1,
            b'>' if i > 0 && bytes[i - 1] == b'-' => {}
            b'>' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            b';' | b'{' | b'}' => return None,
            _ => {}
        }
        i += 1;
    }
    None
}

/// Whether the token ending at `end` is followed by an optional turbofish
/// and an opening parenthesis.
pub(crate) fn is_call_like(text: &str, end: usize) -> bool {
    let bytes = text.as_bytes();
    let mut i = skip_ws(bytes, end);
    if bytes[i..].starts_with(b"::") {
        let j = skip_ws(bytes, i + 2);
        if bytes.get(j) != Some(&b'<') {
            return false;
        }
        match angle_group_end(bytes, j) {
            Some(k) => i = skip_ws(bytes, k),
            None => return false,
        }
    }
    bytes.get(i) == Some(&b'(')
}

fn has_unsafe_token(text: &str) -> bool {
    identifiers(text).any(|(s, e)| &text[s..e] == "unsafe")
}

/// Counts dictionary names in one file. Fails only when the content is not
/// UTF-8.
pub fn scan_file(content: &[u8], dict: &ApiNameDictionary, cfg: &ScanConfig) -> Result<FileScan, std::str::Utf8Error> {
    let source = std::str::from_utf8(content)?;
    let stripped = strip_comments_and_strings(source);
    let text = if cfg.strip_comments_and_strings { stripped.as_str() } else { source };
    let has_unsafe = has_unsafe_token(text);
    let mut counts = BTreeMap::new();
    if has_unsafe || !cfg.require_unsafe_in_file {
        for (s, e) in identifiers(text) {
            let token = &text[s..e];
            // Tokens outside comments and literals take their lookahead from
            // the stripped text in both modes, so not stripping only adds matches.
            let context = if stripped[s..e] == *token { stripped.as_str() } else { source };
            if dict.names.contains(token) && (cfg.bare_token || is_call_like(context, e)) {
                *counts.entry(token.to_string()).or_insert(0) += 1;
            }
        }
    }
    Ok(FileScan { counts, has_unsafe })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PackageReport {
    pub package_name: String,
    /// Package directory relative to the scan root, `/`-separated.
    pub path: String,
    pub counts: BTreeMap<String, u64>,
    pub has_unsafe: bool,
    pub files: usize,
}

impl PackageReport {
    pub fn new(package_name: impl Into<String>, path: impl Into<String>) -> Self {
        Self { package_name: package_name.into(), path: path.into(), counts: BTreeMap::new(), has_unsafe: false, files: 0 }
    }

    pub fn merge(&mut self, file: &FileScan) {
        for (name, n) in &file.counts {
            *self.counts.entry(name.clone()).or_insert(0) += n;
        }
        self.has_unsafe |= file.has_unsafe;
        self.files += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NameStats {
    pub package_count: u64,
    pub total_occurrences: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EcosystemReport {
    pub per_name: BTreeMap<String, NameStats>,
    pub scanned_packages: u64,
    pub packages_with_unsafe: u64,
    pub packages: Vec<PackageReport>,
    pub skipped_files: Vec<SkippedFile>,
}

impl EcosystemReport {
    /// Aggregates package reports. The result does not depend on their order.
    pub fn from_packages(packages: impl IntoIterator<Item = PackageReport>, mut skipped_files: Vec<SkippedFile>) -> Self {
        let mut packages: Vec<PackageReport> = packages.into_iter().collect();
        packages.sort_by(|a, b| (&a.path, &a.package_name).cmp(&(&b.path, &b.package_name)));
        let mut per_name: BTreeMap<String, NameStats> = BTreeMap::new();
        for p in &packages {
            for (name, &n) in &p.counts {
                let s = per_name.entry(name.clone()).or_insert(NameStats { package_count: 0, total_occurrences: 0 });
                s.package_count += 1;
                s.total_occurrences += n;
            }
        }
        skipped_files.sort_by(|a, b| a.path.cmp(&b.path));
        Self {
            per_name,
            scanned_packages: packages.len() as u64,
            packages_with_unsafe: packages.iter().filter(|p| p.has_unsafe).count() as u64,
            packages,
            skipped_files,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("cannot read scan root {path}: {source}")]
    Root { path: PathBuf, source: std::io::Error },
    #[error("cannot walk {path}: {message}")]
    Walk { path: PathBuf, message: String },
}

fn rel(root: &Path, path: &Path) -> String {
    let r = path.strip_prefix(root).unwrap_or(path);
    let s = r.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
    if s.is_empty() { ".".into() } else { s }
}

fn manifest_name(dir: &Path) -> Option<String> {
    let text = std::fs::read_to_string(dir.join("Cargo.toml")).ok()?;
    let doc: toml::Table = toml::from_str(&text).ok()?;
    doc.get("package")?.get("name")?.as_str().map(str::to_string)
}

fn skipped_dir(name: &str) -> bool {
    name == "target" || (name.starts_with('.') && name.len() > 1)
}

/// Scans every package under `cfg.root`.
///
/// A package is the nearest directory holding a `Cargo.toml`; files outside
/// any package are grouped per top-level directory.
pub fn scan_corpus(cfg: &ScanConfig, dict: &ApiNameDictionary) -> Result<EcosystemReport, ScanError> {
    let root = &cfg.root;
    std::fs::read_dir(root).map_err(|source| ScanError::Root { path: root.clone(), source })?;

    let mut package_dirs: BTreeMap<PathBuf, PackageReport> = BTreeMap::new();
    let mut files: Vec<PathBuf> = Vec::new();
    let walker = walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !(e.file_type().is_dir() && skipped_dir(&e.file_name().to_string_lossy())));
    for entry in walker {
        let entry = entry.map_err(|e| ScanError::Walk { path: root.clone(), message: e.to_string() })?;
        if entry.file_type().is_dir() {
            if entry.path().join("Cargo.toml").is_file() {
                let dir = entry.path().to_path_buf();
                let fallback = dir.file_name().map_or_else(|| rel(root, &dir), |n| n.to_string_lossy().into_owned());
                let name = manifest_name(&dir).unwrap_or(fallback);
                package_dirs.insert(dir.clone(), PackageReport::new(name, rel(root, &dir)));
            }
        } else if entry.file_type().is_file() && cfg.file_pattern.matches(&rel(root, entry.path())) {
            files.push(entry.path().to_path_buf());
        }
    }

    let mut synthetic: BTreeMap<PathBuf, PackageReport> = BTreeMap::new();
    let owner: Vec<PathBuf> = files
        .iter()
        .map(|f| {
            if let Some(dir) = f.ancestors().skip(1).take_while(|a| a.starts_with(root)).find(|a| package_dirs.contains_key(*a)) {
                return dir.to_path_buf();
            }
            let top = f.strip_prefix(root).ok().and_then(|r| r.components().next()).filter(|_| f.parent() != Some(root.as_path()));
            let dir = top.map_or_else(|| root.clone(), |c| root.join(c));
            synthetic.entry(dir.clone()).or_insert_with(|| {
                let name = if dir == *root { "(root)".to_string() } else { rel(root, &dir) };
                PackageReport::new(name, rel(root, &dir))
            });
            dir
        })
        .collect();
    package_dirs.extend(synthetic);

    let excluded: BTreeSet<PathBuf> = package_dirs
        .iter()
        .filter(|(_, p)| !cfg.follow_yanked && cfg.yanked.contains(&p.package_name))
        .map(|(dir, _)| dir.clone())
        .collect();
    let jobs: Vec<(usize, &PathBuf)> = files.iter().enumerate().filter(|(i, _)| !excluded.contains(&owner[*i])).collect();
    let results = cfg.execution.map(&jobs, |(_, path)| {
        std::fs::read(path).map_err(|e| e.to_string()).and_then(|bytes| scan_file(&bytes, dict, cfg).map_err(|e| format!("not UTF-8: {e}")))
    });

    let mut skipped = Vec::new();
    for ((i, path), result) in jobs.iter().zip(results) {
        match result {
            Ok(scan) => package_dirs.get_mut(&owner[*i]).expect("owner registered").merge(&scan),
            Err(reason) => skipped.push(SkippedFile { path: rel(root, path), reason }),
        }
    }
    let packages = package_dirs.into_iter().filter(|(dir, _)| !excluded.contains(dir)).map(|(_, p)| p).collect::<Vec<_>>();
    Ok(EcosystemReport::from_packages(packages, skipped))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankKey {
    PackageCount,
    TotalOccurrences,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopRow {
    pub name: String,
    pub package_count: u64,
    pub total_occurrences: u64,
}

/// At most `n` names, descending by `key`, ties broken by name.
pub fn top_n(report: &EcosystemReport, n: usize, key: RankKey) -> Vec<TopRow> {
    let mut rows: Vec<TopRow> = report
        .per_name
        .iter()
        .map(|(name, s)| TopRow { name: name.clone(), package_count: s.package_count, total_occurrences: s.total_occurrences })
        .collect();
    let k = |r: &TopRow| match key {
        RankKey::PackageCount => r.package_count,
        RankKey::TotalOccurrences => r.total_occurrences,
    };
    rows.sort_by(|a, b| k(b).cmp(&k(a)).then_with(|| a.name.cmp(&b.name)));
    rows.truncate(n);
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docstore::seed_database;
    use crate::taxonomy::shipped_catalog;
    use proptest::prelude::*;

    fn dict(names: &[&str]) -> ApiNameDictionary {
        ApiNameDictionary { names: names.iter().map(|s| s.to_string()).collect(), excluded: BTreeSet::new() }
    }

    fn scan(src: &str, names: &[&str], cfg: &ScanConfig) -> BTreeMap<String, u64> {
        scan_file(src.as_bytes(), &dict(names), cfg).unwrap().counts
    }

    fn counts(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn scan_file_examples() {
        let cfg = ScanConfig::new(".");
        assert_eq!(scan("unsafe { ptr::read(p) }", &["read"], &cfg), counts(&[("read", 1)]));
        assert_eq!(scan("fn read_all() {}", &["read"], &cfg), counts(&[]));
        assert_eq!(scan("let x = transmute::<A,B>(y);", &["transmute"], &cfg), counts(&[]));
        let ungated = ScanConfig { require_unsafe_in_file: false, ..ScanConfig::new(".") };
        assert_eq!(scan("let x = transmute::<A,B>(y);", &["transmute"], &ungated), counts(&[("transmute", 1)]));
    }

    #[test]
    fn call_like_forms() {
        let cfg = ScanConfig::new(".");
        let src = "unsafe { p.read(); read (q); read::<fn() -> u8>(r); let read = 1; read.x; transmute :: < Vec<u8> , X > (y); }";
        assert_eq!(scan(src, &["read", "transmute"], &cfg), counts(&[("read", 3), ("transmute", 1)]));
        let bare = ScanConfig { bare_token: true, ..ScanConfig::new(".") };
        assert_eq!(scan(src, &["read", "transmute"], &bare), counts(&[("read", 5), ("transmute", 1)]));
    }

    #[test]
    fn stripping() {
        let src = "// unsafe read()\nfn f() { let s = \"unsafe { read(p) }\"; }";
        assert_eq!(scan(src, &["read"], &ScanConfig::new(".")), counts(&[]));
        let raw = ScanConfig { strip_comments_and_strings: false, ..ScanConfig::new(".") };
        assert_eq!(scan(src, &["read"], &raw), counts(&[("read", 2)]));
        assert!(scan_file(&[0xff, 0xfe], &dict(&["read"]), &raw).is_err());
    }

    #[test]
    fn dictionary_from_seed() {
        let cat = shipped_catalog();
        let db = seed_database(&cat);
        let d = build_dictionary(&db, &shipped_safe_names());
        assert!(d.excluded.contains("read") && d.excluded.contains("add"));
        assert!(!d.names.contains("read"));
        assert!(d.names.contains("from_raw") && d.names.contains("unwrap_unchecked"));
        assert!(!d.names.contains("Send"));
        assert!(d.names.is_disjoint(&d.excluded));
        let all = build_dictionary(&db, &BTreeSet::new());
        assert_eq!(all.names.iter().filter(|n| *n == "read").count(), 1);
        assert_eq!(build_dictionary(&crate::docstore::DocDatabase { records: Default::default(), catalog_version: String::new() }, &shipped_safe_names()), ApiNameDictionary::default());
        assert_eq!(shipped_safe_names().len(), 20);
    }

    #[test]
    fn top_n_ties() {
        let mk = |name: &str, p, t| PackageReport { package_name: name.into(), path: name.into(), counts: counts(&[(name, t)]), has_unsafe: p, files: 1 };
        let report = EcosystemReport::from_packages([mk("b", true, 2), mk("a", true, 2), mk("c", false, 5)], vec![]);
        let names = |rows: Vec<TopRow>| rows.into_iter().map(|r| r.name).collect::<Vec<_>>();
        assert_eq!(names(top_n(&report, 10, RankKey::PackageCount)), ["a", "b", "c"]);
        assert_eq!(names(top_n(&report, 2, RankKey::TotalOccurrences)), ["c", "a"]);
        assert!(top_n(&report, 0, RankKey::PackageCount).is_empty());
        assert_eq!(report.packages_with_unsafe, 2);
    }

    proptest! {
        #[test]
        fn merge_is_order_independent(
            files in proptest::collection::vec((0usize..3, proptest::collection::btree_map("[a-c]", 1u64..4, 0..3), any::<bool>()), 0..12),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let build = |order: &[usize]| {
                let mut pk: Vec<PackageReport> = (0..3).map(|i| PackageReport::new(format!("p{i}"), format!("p{i}"))).collect();
                for &i in order {
                    let (p, c, u) = &files[i];
                    pk[*p].merge(&FileScan { counts: c.clone(), has_unsafe: *u });
                }
                let mut pk_order: Vec<PackageReport> = pk;
                pk_order.reverse();
                EcosystemReport::from_packages(pk_order, vec![])
            };
            let identity: Vec<usize> = (0..files.len()).collect();
            let mut shuffled = identity.clone();
            shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
            let a = build(&identity);
            prop_assert_eq!(&a, &build(&shuffled));
            for s in a.per_name.values() {
                prop_assert!(s.package_count <= a.scanned_packages && s.package_count <= s.total_occurrences);
            }
        }

        #[test]
        fn gates_are_monotone(src in "(unsafe|read|\\(|\\)|//|\n|\"|'| |x|/\\*|\\*/|::<u8>){0,40}") {
            let d = dict(&["read"]);
            let get = |strip, gate| {
                let cfg = ScanConfig { strip_comments_and_strings: strip, require_unsafe_in_file: gate, ..ScanConfig::new(".") };
                scan_file(src.as_bytes(), &d, &cfg).unwrap().counts.get("read").copied().unwrap_or(0)
            };
            prop_assert!(get(false, true) >= get(true, true));
            prop_assert!(get(false, false) >= get(true, false));
            prop_assert!(get(true, false) >= get(true, true));
            prop_assert!(get(false, false) >= get(false, true));
        }
    }
}
