//! One line per acceptance criterion. Set UNSAFE_PROPS_FULL_LABELS and
//! UNSAFE_PROPS_FULL_CVES to run the full-dataset variants.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use unsafe_props::analysis::{correlate, load_label_matrix, phi, report_pairs, small_dataset, LabelMatrix, RowMeta};
use unsafe_props::cvebench::{distribution, export_benchmark, load_cves, timeline_fraction, RootCause, SEED_CVES};
use unsafe_props::docstore::{export_canonical, load_database, render_doc, seed_database, ApiMeta, SEED_DATABASE};
use unsafe_props::scanner::{build_dictionary, scan_corpus, shipped_safe_names, EcosystemReport, ScanConfig};
use unsafe_props::taxonomy::{load_catalog, prerequisite_closure, primary_closure, shipped_catalog, Category, PropertyCatalog, SHIPPED_CATALOG};

type Check = Result<String, String>;
type Criterion = (&'static str, Option<Duration>, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    }};
}

fn set(ids: &[&str]) -> BTreeSet<String> {
    ids.iter().map(|s| s.to_string()).collect()
}

fn catalog_conformance() -> Check {
    let cat = load_catalog(SHIPPED_CATALOG).map_err(|e| e.to_string())?;
    ensure!(cat.properties.len() == 13, "{} properties", cat.properties.len());
    ensure!(cat.sub_property_count() == 22, "{} sub-properties", cat.sub_property_count());
    ensure!(cat.count_in(Category::Pre) == (7, 14), "pre {:?}", cat.count_in(Category::Pre));
    ensure!(cat.count_in(Category::Post) == (6, 8), "post {:?}", cat.count_in(Category::Post));
    let table = [
        ("Allocated", 172),
        ("Bounded", 141),
        ("Initialized", 104),
        ("Layout", 109),
        ("SystemIO", 26),
        ("Thread", 2),
        ("Unreachable", 5),
        ("Aliased", 32),
        ("DualOwned", 46),
        ("Untyped", 37),
        ("Freed", 19),
        ("Leaked", 35),
        ("Pinned", 5),
    ];
    for (id, n) in table {
        let p = cat.property(id).ok_or(format!("{id} missing"))?;
        ensure!(p.expected_label_count == Some(n), "{id}: {:?} != {n}", p.expected_label_count);
    }
    Ok(String::new())
}

fn hierarchy() -> Check {
    let cat = shipped_catalog();
    let closure = |ids: &[&str]| prerequisite_closure(&cat, &set(ids)).map_err(|e| e.to_string());
    ensure!(closure(&["Non-Dangling"])?.contains("Non-Null"), "Non-Dangling does not require Non-Null");
    ensure!(closure(&["Encoded"])?.contains("Typed"), "Encoded does not require Typed");
    let fitted = closure(&["Fitted"])?;
    ensure!(fitted.contains("Sized") && fitted.contains("Aligned"), "Fitted closure {fitted:?}");
    for p in ["Bounded", "Initialized", "Layout"] {
        let c = primary_closure(&cat, &set(&[p])).map_err(|e| e.to_string())?;
        ensure!(c.contains("Allocated"), "{p} closure {c:?}");
    }
    Ok(String::new())
}

fn document_fidelity() -> Check {
    let cat = shipped_catalog();
    let db = seed_database(&cat);
    let record = db.lookup("primitive.pointer.html#method.read").ok_or("record missing")?;
    let text = render_doc(record, &cat);
    let headings: Vec<&str> = text.split("\n\n").skip(1).filter_map(|b| b.lines().next()).collect();
    let want = ["self: Allocated", "self: Bounded", "self: Initialized", "self: Layout", "retval: DualOwned"];
    ensure!(headings == want, "headings {headings:?}");
    Ok(String::new())
}

fn round_trip() -> Check {
    let cat = shipped_catalog();
    let first = export_canonical(&load_database(SEED_DATABASE, &cat).map_err(|e| e.to_string())?, &cat);
    let text = String::from_utf8(first.clone()).map_err(|e| e.to_string())?;
    let second = export_canonical(&load_database(&text, &cat).map_err(|e| e.to_string())?, &cat);
    ensure!(first == second, "second export differs");
    Ok(format!("{} records", seed_database(&cat).len()))
}

fn pearson(x: &[bool], y: &[bool]) -> Option<f64> {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (a, b) = (f64::from(u8::from(a)), f64::from(u8::from(b)));
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / (vx * vy).sqrt())
}

fn random_matrix(rng: &mut StdRng, rows: usize, cols: usize) -> LabelMatrix {
    let cells: Vec<Vec<bool>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_bool(0.5)).collect()).collect();
    let row_meta = (0..rows)
        .map(|i| {
            let mut meta = ApiMeta::default();
            if rng.random_bool(0.5) {
                meta.mutability_variant_group = Some(format!("g{}", rng.random_range(0..3)));
            }
            if rng.random_bool(0.3) {
                meta.trait_name = Some("Tr".into());
            }
            RowMeta { name: format!("f{}", rng.random_range(0..4)), impl_type: format!("T{i}"), signature: String::new(), meta }
        })
        .collect();
    LabelMatrix {
        rows: (0..rows).map(|i| format!("m/fn.f{i:02}.html")).collect(),
        columns: (0..cols).map(|j| format!("P{j}")).collect(),
        cells,
        row_meta,
    }
}

fn correlation_oracle() -> Check {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut compared = 0usize;
    for _ in 0..1000 {
        let (r, c) = (rng.random_range(1..=12), rng.random_range(1..=5));
        let m = random_matrix(&mut rng, r, c);
        let cm = correlate(&m);
        for i in 0..c {
            for j in 0..c {
                let (a, b) = (m.column(i), m.column(j));
                let got = phi(&a, &b).map_err(|e| e.to_string())?;
                let want = pearson(&a, &b);
                match (got, want) {
                    (Some(g), Some(w)) => ensure!((g - w).abs() <= 1e-12, "phi {g} vs pearson {w}"),
                    (None, None) => {}
                    _ => return Err(format!("definedness differs: {got:?} vs {want:?}")),
                }
                compared += 1;
                ensure!(cm.values[i][j] == cm.values[j][i], "matrix not symmetric at ({i},{j})");
                if i == j && want.is_some() {
                    ensure!(cm.values[i][i] == Some(1.0), "diagonal {:?}", cm.values[i][i]);
                }
                if i != j {
                    ensure!(cm.values[i][j] == got, "matrix cell differs from phi");
                }
            }
        }
    }
    Ok(format!("{compared} column pairs"))
}

fn property_suites() -> Check {
    let mut rng = StdRng::seed_from_u64(42);
    for _ in 0..500 {
        let (r, c) = (rng.random_range(0..=20), rng.random_range(2..=6));
        let m = random_matrix(&mut rng, r, c);
        let small = small_dataset(&m);
        ensure!(small_dataset(&small) == small, "small_dataset not idempotent");
        let threshold = rng.random_range(-1.0..1.0);
        let (cl, cs) = (correlate(&m), correlate(&small));
        let report = report_pairs(&cl, &cs, threshold).map_err(|e| e.to_string())?;
        let mut want = BTreeSet::new();
        for i in 0..c {
            for j in i + 1..c {
                if let (Some(a), Some(b)) = (cl.values[i][j], cs.values[i][j]) {
                    if (a + b) / 2.0 > threshold {
                        want.insert((m.columns[i].clone(), m.columns[j].clone()));
                    }
                }
            }
        }
        let got: BTreeSet<_> = report.rows.iter().map(|r| (r.sp1.clone(), r.sp2.clone())).collect();
        ensure!(got.len() == report.rows.len(), "duplicate pairs");
        ensure!(got == want, "pairs {got:?} vs brute force {want:?}");
    }
    Ok(String::new())
}

fn pair_report() -> Check {
    let Ok(path) = std::env::var("UNSAFE_PROPS_FULL_LABELS") else {
        property_suites()?;
        return Ok("full label dataset not supplied; oracle and idempotence suites ran instead".into());
    };
    let cat = shipped_catalog();
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let large = load_label_matrix(&text, &cat).map_err(|e| e.to_string())?;
    let small = small_dataset(&large);
    let report = report_pairs(&correlate(&large), &correlate(&small), 0.4).map_err(|e| e.to_string())?;
    let want = [("Allocated", "Bounded", 0.51), ("Allocated", "Layout", 0.48), ("Layout", "Untyped", 0.45), ("Leaked", "Untyped", 0.49)];
    let got: BTreeMap<(&str, &str), f64> = report.rows.iter().map(|r| ((r.sp1.as_str(), r.sp2.as_str()), r.avg_cc)).collect();
    ensure!(got.len() == 4, "{} pairs: {got:?}", got.len());
    for (a, b, cc) in want {
        let v = got.get(&(a, b)).ok_or(format!("{a}-{b} missing: {got:?}"))?;
        ensure!((v - cc).abs() <= 0.02, "{a}-{b} avg {v:.3}, expected {cc}");
    }
    Ok(format!("{} rows large, {} small", large.len(), small.len()))
}

fn filter4() -> Check {
    let labels = [true, true, false, false, false];
    let mut m = LabelMatrix { rows: vec![], columns: (0..5).map(|j| format!("P{j}")).collect(), cells: vec![], row_meta: vec![] };
    for i in 0..30 {
        let meta = ApiMeta { trait_name: Some("SliceIndex".into()), ..ApiMeta::default() };
        m.rows.push(format!("slice/trait.SliceIndex.html#impl-{i:02}"));
        m.cells.push(labels.to_vec());
        m.row_meta.push(RowMeta { name: "get_unchecked".into(), impl_type: format!("Range{i}"), signature: String::new(), meta });
    }
    for i in 0..5 {
        m.rows.push(format!("m/fn.distinct{i}.html"));
        m.cells.push((0..5).map(|j| j == i).collect());
        m.row_meta.push(RowMeta { name: format!("distinct{i}"), impl_type: String::new(), signature: String::new(), meta: ApiMeta::default() });
    }
    let small = small_dataset(&m);
    ensure!(small.len() == 6, "{} rows", small.len());
    ensure!(small_dataset(&small) == small, "not idempotent");
    Ok(String::new())
}

type Truth = BTreeMap<&'static str, BTreeMap<&'static str, u64>>;

fn counts(report: &EcosystemReport) -> BTreeMap<String, BTreeMap<String, u64>> {
    report.packages.iter().map(|p| (p.package_name.clone(), p.counts.clone())).collect()
}

fn matches_truth(report: &EcosystemReport, truth: &Truth) -> bool {
    let want: BTreeMap<String, BTreeMap<String, u64>> =
        truth.iter().map(|(p, c)| (p.to_string(), c.iter().map(|(n, k)| (n.to_string(), *k)).collect())).collect();
    counts(report) == want
}

fn dominates(big: &EcosystemReport, small: &EcosystemReport) -> bool {
    let (b, s) = (counts(big), counts(small));
    s.iter().all(|(p, names)| names.iter().all(|(n, k)| b.get(p).and_then(|c| c.get(n)).is_some_and(|v| v >= k)))
}

fn scanner() -> Check {
    let cat = shipped_catalog();
    let dict = build_dictionary(&seed_database(&cat), &shipped_safe_names());
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let scan = |f: &dyn Fn(&mut ScanConfig)| {
        let mut cfg = ScanConfig::new(&root);
        f(&mut cfg);
        scan_corpus(&cfg, &dict).map_err(|e| e.to_string())
    };
    let base = scan(&|_| {})?;
    let truth: Truth = BTreeMap::from([
        ("alpha", BTreeMap::from([("from_raw", 2), ("from_raw_parts", 1), ("from_utf8_unchecked", 1), ("get_unchecked", 1)])),
        ("beta-crate", BTreeMap::from([("from_ptr", 1), ("unwrap_unchecked", 1)])),
        ("gamma", BTreeMap::new()),
    ]);
    ensure!(matches_truth(&base, &truth), "default gates: {:?}", counts(&base));
    ensure!(base.scanned_packages == 3 && base.packages_with_unsafe == 2, "{} scanned, {} with unsafe", base.scanned_packages, base.packages_with_unsafe);
    let no_strip = scan(&|c| c.strip_comments_and_strings = false)?;
    let no_gate = scan(&|c| c.require_unsafe_in_file = false)?;
    let bare = scan(&|c| c.bare_token = true)?;
    ensure!(counts(&no_strip)["alpha"]["from_raw"] == 4 && counts(&no_strip)["gamma"]["from_raw"] == 2, "no-strip: {:?}", counts(&no_strip));
    ensure!(counts(&no_gate)["beta-crate"]["from_raw_parts"] == 2, "no-gate: {:?}", counts(&no_gate));
    ensure!(counts(&bare)["alpha"]["from_raw_parts"] == 2, "bare-token: {:?}", counts(&bare));
    for (name, r) in [("no-strip", &no_strip), ("no-unsafe-gate", &no_gate), ("bare-token", &bare)] {
        ensure!(dominates(r, &base), "{name} lowered a count");
        ensure!(r != &base, "{name} changed nothing");
    }
    Ok(String::new())
}

fn cve_seed() -> Check {
    let cat = shipped_catalog();
    let seed = load_cves(SEED_CVES, &cat).map_err(|e| e.to_string())?;
    let d = distribution(&seed, &cat);
    ensure!(d.per_property["Layout"] >= 1, "Layout {}", d.per_property["Layout"]);
    let bench = export_benchmark(&seed, &cat, "Layout").map_err(|e| e.to_string())?;
    ensure!(bench.iter().any(|r| r.id == "CVE-2021-45709"), "benchmark lacks CVE-2021-45709");
    let Ok(path) = std::env::var("UNSAFE_PROPS_FULL_CVES") else {
        return Ok("seed only; full dataset not supplied".into());
    };
    full_cves(&cat, &path)
}

fn full_cves(cat: &PropertyCatalog, path: &str) -> Check {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    let ds = load_cves(&text, cat).map_err(|e| e.to_string())?;
    let d = distribution(&ds, cat);
    for (p, n) in [("Thread", 70), ("Initialized", 46), ("Bounded", 27), ("Layout", 20), ("Aliased", 19), ("Allocated", 5)] {
        ensure!(d.per_property[p] == n, "{p}: {} != {n}", d.per_property[p]);
    }
    ensure!(d.zero_properties.len() == 4, "zero properties {:?}", d.zero_properties);
    let f = d.root_cause_fractions[&RootCause::StdApiMisuse];
    ensure!((f - 0.8636).abs() <= 0.0001, "StdApiMisuse fraction {f}");
    let day = |y, m, d| NaiveDate::from_ymd_opt(y, m, d).expect("valid date");
    let t = timeline_fraction(&ds, day(2019, 8, 1), day(2021, 12, 31)).map_err(|e| e.to_string())?;
    ensure!((t - 0.9184).abs() <= 0.0001, "timeline fraction {t}");
    Ok(format!("{} records", ds.records.len()))
}

const TAKE_SNIPPET: &str = "// impl<T> ManuallyDrop<T>\n\
pub unsafe fn take(slot: &mut ManuallyDrop<T>) -> T {\n    \
// SAFETY: we are reading from a reference, which is\n    \
// guaranteed to be valid for reads.\n    \
unsafe { ptr::read(&slot.value) }\n}\n";

fn frame(v: &Value) -> Vec<u8> {
    let body = serde_json::to_vec(v).expect("json");
    let mut out = format!("Content-Length: {}\r\n\r\n", body.len()).into_bytes();
    out.extend(body);
    out
}

fn unframe(mut bytes: &[u8]) -> Result<Vec<Value>, String> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let end = bytes.windows(4).position(|w| w == b"\r\n\r\n").ok_or("unterminated header")?;
        let header = std::str::from_utf8(&bytes[..end]).map_err(|e| e.to_string())?;
        let n: usize = header.strip_prefix("Content-Length: ").ok_or("bad header")?.parse().map_err(|_| "bad length")?;
        let body = bytes.get(end + 4..end + 4 + n).ok_or("truncated body")?;
        out.push(serde_json::from_slice(body).map_err(|e| e.to_string())?);
        bytes = &bytes[end + 4 + n..];
    }
    Ok(out)
}

fn lsp_session() -> Check {
    let (line, col) = TAKE_SNIPPET.lines().enumerate().find_map(|(i, l)| l.find("read(&slot").map(|c| (i, c))).expect("snippet");
    let uri = "file:///take.rs";
    let script = [
        json!({"jsonrpc": "2.0", "id": 1, "method": "initialize", "params": {"capabilities": {}}}),
        json!({"jsonrpc": "2.0", "method": "initialized", "params": {}}),
        json!({"jsonrpc": "2.0", "method": "textDocument/didOpen", "params": {"textDocument": {"uri": uri, "languageId": "rust", "version": 1, "text": TAKE_SNIPPET}}}),
        json!({"jsonrpc": "2.0", "id": 2, "method": "textDocument/hover", "params": {"textDocument": {"uri": uri}, "position": {"line": line, "character": col + 1}}}),
        json!({"jsonrpc": "2.0", "id": 3, "method": "shutdown"}),
        json!({"jsonrpc": "2.0", "method": "exit"}),
    ];
    let input: Vec<u8> = script.iter().flat_map(frame).collect();
    let start = Instant::now();
    let mut child = Command::new(env!("CARGO_BIN_EXE_unsafe-props"))
        .arg("serve-lsp")
        .env_remove("UNSAFE_PROPS_CONFIG")
        .env_remove("UNSAFE_PROPS_DATABASE")
        .env_remove("UNSAFE_PROPS_CATALOG")
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    child.stdin.take().expect("stdin").write_all(&input).map_err(|e| e.to_string())?;
    let mut output = Vec::new();
    child.stdout.take().expect("stdout").read_to_end(&mut output).map_err(|e| e.to_string())?;
    let status = child.wait().map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(status.code() == Some(0), "exit status {status}");
    ensure!(elapsed < Duration::from_secs(2), "session took {elapsed:?}");
    let replies = unframe(&output)?;
    let hover = replies.iter().find(|r| r["id"] == 2).ok_or("no hover response")?;
    let value = hover["result"]["contents"]["value"].as_str().ok_or(format!("no hover contents: {hover}"))?;
    ensure!(value.contains("DualOwned"), "hover lacks DualOwned: {value}");
    Ok(format!("session {elapsed:.2?}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("catalog conformance", Some(Duration::from_secs(1)), catalog_conformance),
        ("hierarchy", Some(Duration::from_secs(1)), hierarchy),
        ("document fidelity", None, document_fidelity),
        ("round-trip", None, round_trip),
        ("correlation oracle", Some(Duration::from_secs(10)), correlation_oracle),
        ("pair report reproduction", None, pair_report),
        ("filter 4", None, filter4),
        ("scanner", Some(Duration::from_secs(2)), scanner),
        ("cve seed", None, cve_seed),
        ("lsp session", None, lsp_session),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let mut result = check();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&result, limit) {
            if elapsed > limit {
                result = Err(format!("took {elapsed:?}, limit {limit:?}"));
            }
        }
        match result {
            Ok(note) if note.is_empty() => println!("PASS {name} ({elapsed:.2?})"),
            Ok(note) => println!("PASS {name} ({elapsed:.2?}): {note}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    println!("{} of {} criteria passed", 10 - failed, 10);
    if failed > 0 {
        std::process::exit(1);
    }
}
