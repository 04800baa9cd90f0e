//! Vulnerability records classified by the safety property they violate.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::diagnostic::Site;
use crate::docstore::ApiIdentifier;
use crate::taxonomy::PropertyCatalog;

pub const SEED_CVES: &str = include_str!("../data/seed_cves.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RootCause {
    StdApiMisuse,
    OtherUnsafeOp,
    NonStdUnsafeFn,
    FfiBoundary,
}

impl RootCause {
    pub const ALL: [RootCause; 4] = [Self::StdApiMisuse, Self::OtherUnsafeOp, Self::NonStdUnsafeFn, Self::FfiBoundary];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CveRecord {
    pub id: String,
    pub published: NaiveDate,
    pub package: String,
    pub description: String,
    pub root_cause: RootCause,
    pub violated: Vec<String>,
    pub implicated_apis: Vec<ApiIdentifier>,
    pub advisories: Vec<String>,
    /// Why the record is kept out of the statistics, if it is.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CveDataset {
    pub records: Vec<CveRecord>,
    pub source_note: String,
}

impl CveDataset {
    /// Records that count towards the statistics.
    pub fn included(&self) -> impl Iterator<Item = &CveRecord> {
        self.records.iter().filter(|r| r.excluded.is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CveError {
    #[error("malformed CVE dataset: {0}")]
    Malformed(String),
    #[error("{site}: `{id}` is not a CVE-YYYY-NNNN id")]
    InvalidId { id: String, site: Site },
    #[error("{site}: duplicate id `{id}`")]
    DuplicateId { id: String, site: Site },
    #[error("{site}: {id}: unknown property `{property}`")]
    UnknownProperty { id: String, property: String, site: Site },
    #[error("{site}: {id}: cannot parse date `{value}`")]
    BadDate { id: String, value: String, site: Site },
    #[error("{site}: {id}: StdApiMisuse needs at least one implicated API")]
    MissingImplicatedApi { id: String, site: Site },
    #[error("{site}: {id}: no violated property")]
    NoViolation { id: String, site: Site },
    #[error("{site}: {id}: bad API identifier: {detail}")]
    InvalidApi { id: String, detail: String, site: Site },
    #[error("unknown property `{0}`")]
    UnknownBenchmarkProperty(String),
    #[error("range start {from} is after its end {to}")]
    BadRange { from: NaiveDate, to: NaiveDate },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    #[serde(default)]
    source_note: String,
    #[serde(default)]
    cve: Vec<RawCve>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCve {
    id: String,
    published: toml::Value,
    package: String,
    #[serde(default)]
    description: String,
    root_cause: RootCause,
    #[serde(default)]
    violated: Vec<String>,
    #[serde(default)]
    implicated_apis: Vec<String>,
    #[serde(default)]
    advisories: Vec<String>,
    #[serde(default)]
    excluded: Option<String>,
}

fn valid_cve_id(id: &str) -> bool {
    let mut parts = id.splitn(3, '-');
    let (Some("CVE"), Some(year), Some(seq)) = (parts.next(), parts.next(), parts.next()) else { return false };
    year.len() == 4 && year.bytes().all(|b| b.is_ascii_digit()) && seq.len() >= 4 && seq.bytes().all(|b| b.is_ascii_digit())
}

fn parse_date(v: &toml::Value) -> Option<NaiveDate> {
    let text = match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Datetime(d) if d.time.is_none() && d.offset.is_none() => d.to_string(),
        _ => return None,
    };
    NaiveDate::parse_from_str(&text, "%Y-%m-%d").ok()
}

/// Loads and validates a dataset. Records marked `excluded` may leave
/// `violated` empty.
pub fn load_cves(source: &str, catalog: &PropertyCatalog) -> Result<CveDataset, CveError> {
    let raw: RawDataset = toml::from_str(source).map_err(|e| CveError::Malformed(e.to_string()))?;
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(raw.cve.len());
    for (i, r) in raw.cve.into_iter().enumerate() {
        let site = Site::Path(format!("cve[{i}]"));
        let id = r.id;
        if !valid_cve_id(&id) {
            return Err(CveError::InvalidId { id, site });
        }
        if !seen.insert(id.clone()) {
            return Err(CveError::DuplicateId { id, site });
        }
        let published = parse_date(&r.published)
            .ok_or_else(|| CveError::BadDate { id: id.clone(), value: r.published.to_string(), site: site.clone() })?;
        if let Some(p) = r.violated.iter().find(|p| !catalog.contains(p)) {
            return Err(CveError::UnknownProperty { id, property: p.clone(), site });
        }
        if r.violated.is_empty() && r.excluded.is_none() {
            return Err(CveError::NoViolation { id, site });
        }
        if r.root_cause == RootCause::StdApiMisuse && r.implicated_apis.is_empty() {
            return Err(CveError::MissingImplicatedApi { id, site });
        }
        let implicated_apis = r
            .implicated_apis
            .into_iter()
            .map(ApiIdentifier::new)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CveError::InvalidApi { id: id.clone(), detail: e.to_string(), site: site.clone() })?;
        records.push(CveRecord {
            id,
            published,
            package: r.package,
            description: r.description,
            root_cause: r.root_cause,
            violated: r.violated,
            implicated_apis,
            advisories: r.advisories,
            excluded: r.excluded,
        });
    }
    Ok(CveDataset { records, source_note: raw.source_note })
}

pub fn seed_cves(catalog: &PropertyCatalog) -> CveDataset {
    load_cves(SEED_CVES, catalog).expect("bundled CVE seed is valid")
}

/// Primary properties a record violates.
pub fn projected(record: &CveRecord, catalog: &PropertyCatalog) -> BTreeSet<String> {
    record.violated.iter().filter_map(|p| catalog.primary_of(p)).map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    pub per_property: BTreeMap<String, u64>,
    pub zero_properties: Vec<String>,
    pub total: u64,
    pub root_cause_fractions: BTreeMap<RootCause, f64>,
}

/// Counts included records per primary property (each record once per
/// property) and the share of each root cause.
pub fn distribution(ds: &CveDataset, catalog: &PropertyCatalog) -> DistributionReport {
    let mut per_property: BTreeMap<String, u64> = catalog.primary_ids().map(|p| (p.to_string(), 0)).collect();
    let mut causes: BTreeMap<RootCause, u64> = RootCause::ALL.iter().map(|c| (*c, 0)).collect();
    let mut total = 0u64;
    for r in ds.included() {
        total += 1;
        *causes.entry(r.root_cause).or_default() += 1;
        for p in projected(r, catalog) {
            *per_property.entry(p).or_default() += 1;
        }
    }
    let zero_properties = catalog.primary_ids().filter(|p| per_property[*p] == 0).map(str::to_string).collect();
    let root_cause_fractions = causes
        .into_iter()
        .map(|(c, n)| (c, if total == 0 { 0.0 } else { n as f64 / total as f64 }))
        .collect();
    DistributionReport { per_property, zero_properties, total, root_cause_fractions }
}

/// Share of included records published within `[from, to]`; 0 for an
/// empty dataset.
pub fn timeline_fraction(ds: &CveDataset, from: NaiveDate, to: NaiveDate) -> Result<f64, CveError> {
    if from > to {
        return Err(CveError::BadRange { from, to });
    }
    let (mut inside, mut total) = (0u64, 0u64);
    for r in ds.included() {
        total += 1;
        inside += u64::from((from..=to).contains(&r.published));
    }
    Ok(if total == 0 { 0.0 } else { inside as f64 / total as f64 })
}

/// Included records violating `property` (sub-properties are compared at
/// their primary level), sorted by id.
pub fn export_benchmark(ds: &CveDataset, catalog: &PropertyCatalog, property: &str) -> Result<Vec<CveRecord>, CveError> {
    let target = catalog.primary_of(property).ok_or_else(|| CveError::UnknownBenchmarkProperty(property.to_string()))?;
    let mut out: Vec<CveRecord> = ds.included().filter(|r| projected(r, catalog).contains(target)).cloned().collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

#[derive(Serialize)]
struct CsvRow<'a> {
    id: &'a str,
    published: String,
    package: &'a str,
    root_cause: RootCause,
    violated: String,
    implicated_apis: String,
    advisories: String,
}

/// CSV with list fields joined by `;`.
pub fn records_to_csv(records: &[CveRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        let row = CsvRow {
            id: &r.id,
            published: r.published.to_string(),
            package: &r.package,
            root_cause: r.root_cause,
            violated: r.violated.join(";"),
            implicated_apis: r.implicated_apis.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(";"),
            advisories: r.advisories.join(";"),
        };
        w.serialize(row).expect("in-memory CSV write");
    }
    let mut text = String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV of UTF-8 fields");
    if records.is_empty() {
        text = "id,published,package,root_cause,violated,implicated_apis,advisories\n".into();
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::shipped_catalog;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn record(id: &str, date: &str, violated: &[&str]) -> String {
        let list = violated.iter().map(|v| format!("\"{v}\"")).collect::<Vec<_>>().join(", ");
        format!("[[cve]]\nid = \"{id}\"\npublished = {date}\npackage = \"p\"\nroot_cause = \"OtherUnsafeOp\"\nviolated = [{list}]\n")
    }

    #[test]
    fn seed_dataset() {
        let cat = shipped_catalog();
        let ds = seed_cves(&cat);
        assert_eq!(ds.records.len(), 1);
        let r = &ds.records[0];
        assert_eq!(r.id, "CVE-2021-45709");
        assert_eq!(r.root_cause, RootCause::StdApiMisuse);
        assert_eq!(r.implicated_apis[0].as_str(), "slice/fn.from_raw_parts_mut.html");
        let dist = distribution(&ds, &cat);
        assert_eq!(dist.per_property["Layout"], 1);
        assert_eq!(dist.per_property.values().sum::<u64>(), 1);
        assert_eq!(dist.zero_properties.len(), 12);
        assert_eq!(dist.root_cause_fractions[&RootCause::StdApiMisuse], 1.0);
        let bench = export_benchmark(&ds, &cat, "Layout").unwrap();
        assert_eq!(bench.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["CVE-2021-45709"]);
        assert!(export_benchmark(&ds, &cat, "Pinned").unwrap().is_empty());
        assert!(matches!(export_benchmark(&ds, &cat, "Bogus"), Err(CveError::UnknownBenchmarkProperty(_))));
    }

    #[test]
    fn validation_errors() {
        let cat = shipped_catalog();
        let bogus = load_cves(&record("CVE-2020-1234", "2020-01-01", &["Bogus"]), &cat).unwrap_err();
        assert!(matches!(bogus, CveError::UnknownProperty { ref property, .. } if property == "Bogus"));
        assert!(matches!(load_cves(&record("CVE-20-1", "2020-01-01", &["Freed"]), &cat), Err(CveError::InvalidId { .. })));
        assert!(matches!(load_cves(&record("CVE-2020-1234", "\"2020-13-01\"", &["Freed"]), &cat), Err(CveError::BadDate { .. })));
        let dup = format!("{}{}", record("CVE-2020-1234", "2020-01-01", &["Freed"]), record("CVE-2020-1234", "2020-01-02", &["Freed"]));
        let err = load_cves(&dup, &cat).unwrap_err();
        assert_eq!(err.to_string(), "cve[1]: duplicate id `CVE-2020-1234`");
        let std_misuse = "[[cve]]\nid = \"CVE-2020-1234\"\npublished = 2020-01-01\npackage = \"p\"\nroot_cause = \"StdApiMisuse\"\nviolated = [\"Freed\"]\n";
        assert!(matches!(load_cves(std_misuse, &cat), Err(CveError::MissingImplicatedApi { .. })));
        assert!(matches!(load_cves(&record("CVE-2020-1234", "2020-01-01", &[]), &cat), Err(CveError::NoViolation { .. })));
        assert!(matches!(load_cves("[[cve]]\nid = 1\n", &cat), Err(CveError::Malformed(_))));
        let empty = load_cves("", &cat).unwrap();
        assert!(empty.records.is_empty());
        let dist = distribution(&empty, &cat);
        assert_eq!(dist.zero_properties.len(), 13);
        assert_eq!(dist.total, 0);
    }

    #[test]
    fn excluded_records_are_not_counted() {
        let cat = shipped_catalog();
        let src = format!(
            "{}{}excluded = \"panic safety\"\n",
            record("CVE-2020-0001", "2020-01-01", &["Freed"]),
            record("CVE-2020-0002", "2020-01-01", &[])
        );
        let ds = load_cves(&src, &cat).unwrap();
        assert_eq!(ds.records.len(), 2);
        assert_eq!(distribution(&ds, &cat).total, 1);
    }

    #[test]
    fn timeline_and_multilabel() {
        let cat = shipped_catalog();
        let src = format!(
            "{}{}{}",
            record("CVE-2019-0001", "2019-01-01", &["Freed", "Aligned"]),
            record("CVE-2020-0001", "2020-06-01", &["Sized", "Aligned"]),
            record("CVE-2022-0001", "2022-01-01", &["Send"])
        );
        let ds = load_cves(&src, &cat).unwrap();
        let dist = distribution(&ds, &cat);
        assert_eq!(dist.per_property["Layout"], 2);
        assert!(dist.per_property.values().sum::<u64>() >= dist.total);
        assert_eq!(export_benchmark(&ds, &cat, "Freed").unwrap().len(), 1);
        assert_eq!(export_benchmark(&ds, &cat, "Layout").unwrap().len(), 2);
        assert_eq!(timeline_fraction(&ds, d("2019-01-01"), d("2022-01-01")).unwrap(), 1.0);
        assert_eq!(timeline_fraction(&ds, d("2000-01-01"), d("2000-12-31")).unwrap(), 0.0);
        assert!((timeline_fraction(&ds, d("2019-01-02"), d("2022-01-01")).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(timeline_fraction(&ds, d("2021-01-01"), d("2020-01-01")), Err(CveError::BadRange { .. })));
        let csv = records_to_csv(&ds.records);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().contains("Freed;Aligned"));
        assert_eq!(records_to_csv(&[]).lines().count(), 1);
    }

    fn arb_dataset() -> impl Strategy<Value = Vec<(u16, Vec<usize>)>> {
        proptest::collection::vec((0u16..2000, proptest::collection::vec(0usize..28, 1..3)), 0..15)
    }

    proptest! {
        #[test]
        fn benchmark_sizes_match_distribution(plan in arb_dataset(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let cat = shipped_catalog();
            let ids: Vec<&str> = cat.all_ids().collect();
            let mut src = String::new();
            for (i, (day, props)) in plan.iter().enumerate() {
                let date = d("2018-01-01") + chrono::Days::new(u64::from(*day));
                let violated: Vec<&str> = props.iter().map(|&p| ids[p]).collect();
                src += &record(&format!("CVE-2020-{:04}", i), &date.to_string(), &violated);
            }
            let ds = load_cves(&src, &cat).unwrap();
            let dist = distribution(&ds, &cat);
            let sum: usize = cat.primary_ids().map(|p| export_benchmark(&ds, &cat, p).unwrap().len()).sum();
            prop_assert_eq!(sum as u64, dist.per_property.values().sum::<u64>());
            let mut shuffled = ds.clone();
            shuffled.records.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
            prop_assert_eq!(distribution(&shuffled, &cat), dist);
        }
    }
}
