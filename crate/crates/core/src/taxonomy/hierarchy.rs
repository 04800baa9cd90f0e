use std::collections::{BTreeMap, BTreeSet};

use super::{CatalogError, PropertyCatalog};

/// All transitive prerequisites of `ids`, plus `ids` themselves.
///
/// Only hierarchy edges are followed: a sub-property does not pull in its
/// parent, and sub-level edges never lift to the primary level.
pub fn prerequisite_closure(
    catalog: &PropertyCatalog,
    ids: &BTreeSet<String>,
) -> Result<BTreeSet<String>, CatalogError> {
    let mut closure = BTreeSet::new();
    let mut stack = Vec::new();
    for id in ids {
        if !catalog.contains(id) {
            return Err(CatalogError::UnknownId(id.clone()));
        }
        stack.push(id.clone());
    }
    while let Some(id) = stack.pop() {
        if !closure.insert(id.clone()) {
            continue;
        }
        stack.extend(
            catalog
                .hierarchy
                .iter()
                .filter(|e| e.dependent == id)
                .map(|e| e.prerequisite.clone()),
        );
    }
    Ok(closure)
}

/// Projects `ids` to their primary properties and closes over primary edges.
pub fn primary_closure(
    catalog: &PropertyCatalog,
    ids: &BTreeSet<String>,
) -> Result<BTreeSet<String>, CatalogError> {
    let projected = ids
        .iter()
        .map(|id| {
            catalog
                .primary_of(id)
                .map(str::to_string)
                .ok_or_else(|| CatalogError::UnknownId(id.clone()))
        })
        .collect::<Result<BTreeSet<_>, _>>()?;
    prerequisite_closure(catalog, &projected)
}

/// Orders every catalog id so that prerequisites precede dependents. Ties
/// keep catalog order. Fails with the cycle path when the hierarchy is not a DAG.
pub fn topological_order(catalog: &PropertyCatalog) -> Result<Vec<String>, Vec<String>> {
    let ids: Vec<&str> = catalog.all_ids().collect();
    let pos: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut indegree = vec![0usize; ids.len()];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
    for e in &catalog.hierarchy {
        let (Some(&a), Some(&b)) = (pos.get(e.prerequisite.as_str()), pos.get(e.dependent.as_str())) else {
            continue;
        };
        out[a].push(b);
        indegree[b] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..ids.len()).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(ids.len());
    while let Some(i) = ready.pop_first() {
        order.push(ids[i].to_string());
        for &j in &out[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.insert(j);
            }
        }
    }
    if order.len() == ids.len() {
        Ok(order)
    } else {
        Err(find_cycle(catalog).unwrap_or_default())
    }
}

/// Finds one cycle as `[a, b, ..., a]`, following prerequisite -> dependent.
pub(super) fn find_cycle(catalog: &PropertyCatalog) -> Option<Vec<String>> {
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &catalog.hierarchy {
        adjacency.entry(e.prerequisite.as_str()).or_default().push(e.dependent.as_str());
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }

    fn visit<'a>(
        node: &'a str,
        adjacency: &BTreeMap<&'a str, Vec<&'a str>>,
        marks: &mut BTreeMap<&'a str, Mark>,
        path: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        marks.insert(node, Mark::Active);
        path.push(node);
        for &next in adjacency.get(node).into_iter().flatten() {
            match marks.get(next) {
                Some(Mark::Active) => {
                    let start = path.iter().position(|&n| n == next).unwrap_or(0);
                    let mut cycle: Vec<String> = path[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(next.to_string());
                    return Some(cycle);
                }
                Some(Mark::Done) => {}
                None => {
                    if let Some(c) = visit(next, adjacency, marks, path) {
                        return Some(c);
                    }
                }
            }
        }
        path.pop();
        marks.insert(node, Mark::Done);
        None
    }

    let mut marks = BTreeMap::new();
    let starts: Vec<&str> = adjacency.keys().copied().collect();
    for start in starts {
        if !marks.contains_key(start) {
            if let Some(c) = visit(start, &adjacency, &mut marks, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}
