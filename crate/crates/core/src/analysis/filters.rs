use std::collections::{BTreeMap, HashMap};

use super::{LabelMatrix, RowMeta};
use crate::docstore::ApiRecord;

fn namespace_rank(ns: &str) -> Option<u8> {
    match ns {
        "std" => Some(0),
        "core" => Some(1),
        "alloc" => Some(2),
        _ => None,
    }
}

/// Dataset pre-filters, applied in order:
///
/// 1. records identical except for a `std`/`core`/`alloc` namespace collapse
///    to one, preferring `std`, then `core`, then `alloc`;
/// 2. one record per `numeric_variant_group`, the smallest identifier;
/// 3. intrinsic wrappers that have a stable counterpart are dropped.
///
/// Surviving records keep their input order.
pub fn apply_prefilters(records: &[ApiRecord]) -> Vec<ApiRecord> {
    let mut keep = vec![true; records.len()];

    let mut best: HashMap<(&str, &str, &str), usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let Some(rank) = namespace_rank(&r.meta.namespace) else { continue };
        let key = (r.identifier.as_str(), r.signature.raw.as_str(), r.impl_type.as_str());
        match best.get(&key) {
            Some(&j) if namespace_rank(&records[j].meta.namespace) <= Some(rank) => keep[i] = false,
            Some(&j) => {
                keep[j] = false;
                best.insert(key, i);
            }
            None => {
                best.insert(key, i);
            }
        }
    }

    let mut group_rep: HashMap<&str, usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        let Some(group) = r.meta.numeric_variant_group.as_deref() else { continue };
        match group_rep.get(group) {
            Some(&j) if records[j].identifier <= r.identifier => keep[i] = false,
            Some(&j) => {
                keep[j] = false;
                group_rep.insert(group, i);
            }
            None => {
                group_rep.insert(group, i);
            }
        }
    }

    records
        .iter()
        .zip(keep)
        .filter(|(r, k)| *k && !(r.meta.intrinsic_wrapper && r.meta.stable_counterpart))
        .map(|(r, _)| r.clone())
        .collect()
}

/// Whether two rows are structural variants of one another.
fn related(a: &RowMeta, b: &RowMeta) -> bool {
    let same = |x: &Option<String>, y: &Option<String>| x.is_some() && x == y;
    same(&a.meta.mutability_variant_group, &b.meta.mutability_variant_group)
        || (same(&a.meta.trait_name, &b.meta.trait_name) && a.impl_type != b.impl_type)
        || (a.name == b.name && a.meta.namespace == b.meta.namespace && a.impl_type != b.impl_type)
        || (a.name == b.name && (a.meta.intrinsic_wrapper || b.meta.intrinsic_wrapper))
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Collapses identically labelled rows that are structural variants of one
/// another (mutability twins, trait implementations for different types,
/// same-named functions on different types in one namespace, intrinsic
/// wrappers). Each group keeps its lexicographically smallest identifier;
/// survivors keep their input order.
pub fn small_dataset(m: &LabelMatrix) -> LabelMatrix {
    let mut by_labels: BTreeMap<&[bool], Vec<usize>> = BTreeMap::new();
    for (i, cells) in m.cells.iter().enumerate() {
        by_labels.entry(cells.as_slice()).or_default().push(i);
    }
    let mut parent: Vec<usize> = (0..m.len()).collect();
    for rows in by_labels.values() {
        for (x, &i) in rows.iter().enumerate() {
            for &j in &rows[x + 1..] {
                if related(&m.row_meta[i], &m.row_meta[j]) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
    }
    let mut rep: HashMap<usize, usize> = HashMap::new();
    for i in 0..m.len() {
        let root = find(&mut parent, i);
        let e = rep.entry(root).or_insert(i);
        if m.rows[i] < m.rows[*e] {
            *e = i;
        }
    }
    let mut keep: Vec<usize> = rep.into_values().collect();
    keep.sort_unstable();
    m.select(&keep)
}
