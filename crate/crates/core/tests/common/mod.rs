//! Independent reference computations shared by the integration tests and
//! the acceptance suite. Nothing here calls into the engines' own segment
//! or parent logic.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cubemr::{Cube, Dimension, Grouping, Row, Schema, SegmentKey};

pub type Key = Vec<u32>;
pub type RefCube = BTreeMap<Key, i64>;

pub struct Case {
    pub schema: Schema,
    pub grouping: Grouping,
    pub rows: Vec<Row>,
}

pub fn schema_from_depths(depths: &[usize]) -> Schema {
    let dims = depths
        .iter()
        .enumerate()
        .map(|(d, &depth)| {
            let cols: Vec<String> = (0..depth).map(|l| format!("d{d}c{l}")).collect();
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            Dimension::new(format!("d{d}"), &cols)
        })
        .collect();
    Schema::new(dims, "count").unwrap()
}

/// Random contiguous split of the dimensions, leftmost group first.
pub fn random_grouping(schema: &Schema, rng: &mut impl Rng) -> Grouping {
    let ranges = schema.dimension_ranges();
    let mut groups = Vec::new();
    let mut start = 0;
    for (d, r) in ranges.iter().enumerate() {
        if d + 1 == ranges.len() || rng.random_bool(0.5) {
            groups.push(ranges[start].start..r.end);
            start = d + 1;
        }
    }
    Grouping::new(schema, groups).unwrap()
}

/// 3 to 5 dimensions of depth at most 3, cardinalities at most 6,
/// counts in [-100, 100], up to `max_rows` rows.
pub fn random_case(seed: u64, max_rows: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ndims = rng.random_range(3..=5);
    let depths: Vec<usize> = (0..ndims).map(|_| rng.random_range(1..=3)).collect();
    let schema = schema_from_depths(&depths);
    let cards: Vec<u32> = (0..schema.num_columns())
        .map(|_| rng.random_range(1..=6))
        .collect();
    let grouping = random_grouping(&schema, &mut rng);
    let n = rng.random_range(0..=max_rows);
    let rows = (0..n)
        .map(|_| {
            let key: Key = cards.iter().map(|&c| rng.random_range(1..=c)).collect();
            Row::new(SegmentKey::from_raw(&key), rng.random_range(-100..=100)).unwrap()
        })
        .collect();
    Case {
        schema,
        grouping,
        rows,
    }
}

pub fn depths(schema: &Schema) -> Vec<usize> {
    schema
        .dimensions()
        .iter()
        .map(|d| d.columns.len())
        .collect()
}

/// Every valid star pattern (`true` = star): per dimension, a prefix of
/// concrete columns followed by stars.
pub fn star_patterns(depths: &[usize]) -> Vec<Vec<bool>> {
    let mut out = vec![Vec::new()];
    for &depth in depths {
        let mut next = Vec::new();
        for p in &out {
            for concrete in 0..=depth {
                let mut q = p.clone();
                q.extend((0..depth).map(|l| l >= concrete));
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn apply(pattern: &[bool], key: &[u32]) -> Key {
    key.iter()
        .zip(pattern)
        .map(|(&v, &star)| if star { 0 } else { v })
        .collect()
}

pub fn is_valid(depths: &[usize], key: &[u32]) -> bool {
    let mut at = 0;
    for &depth in depths {
        let cells = &key[at..at + depth];
        let stars = cells.iter().filter(|&&c| c == 0).count();
        if cells[depth - stars..].iter().any(|&c| c != 0) {
            return false;
        }
        at += depth;
    }
    true
}

pub fn oracle_cube(schema: &Schema, rows: &[Row]) -> RefCube {
    let patterns = star_patterns(&depths(schema));
    let mut cube = RefCube::new();
    for row in rows {
        let raw: Key = row.key.cells().iter().map(|c| c.raw()).collect();
        for p in &patterns {
            *cube.entry(apply(p, &raw)).or_insert(0) += row.count;
        }
    }
    cube
}

pub fn to_ref(cube: &Cube) -> RefCube {
    cube.iter()
        .map(|(k, v)| (k.cells().iter().map(|c| c.raw()).collect(), v))
        .collect()
}

/// First star of the rightmost dimension that holds a star.
fn primary_pos(depths: &[usize], key: &[u32]) -> Option<usize> {
    let mut end = key.len();
    for &depth in depths.iter().rev() {
        let start = end - depth;
        if let Some(i) = (start..end).find(|&i| key[i] == 0) {
            return Some(i);
        }
        end = start;
    }
    None
}

/// The parents of `a` straight from the definition: every valid `b`,
/// over all star patterns, that differs from `a` in exactly its primary
/// position, where `a` is concrete.
pub fn brute_parents(depths: &[usize], a: &[u32]) -> BTreeSet<Key> {
    let mut out = BTreeSet::new();
    for p in star_patterns(depths) {
        let b = apply(&p, a);
        let diff: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
        if diff.len() == 1 && primary_pos(depths, &b) == Some(diff[0]) {
            out.insert(b);
        }
    }
    out
}

/// All schemas up to `max_columns` columns, one per composition.
pub fn all_schemas(max_columns: usize) -> Vec<Schema> {
    fn compositions(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for first in 1..=n {
            for mut rest in compositions(n - first) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }
    (1..=max_columns)
        .flat_map(compositions)
        .map(|d| schema_from_depths(&d))
        .collect()
}

/// Depths of the dimensions inside a column range.
pub fn group_depths(schema: &Schema, group: &Range<usize>) -> Vec<usize> {
    schema
        .dimension_ranges()
        .iter()
        .filter(|r| r.start >= group.start && r.end <= group.end)
        .map(|r| r.len())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhaseExpect {
    pub input_rows: u64,
    pub output_rows: u64,
    pub local_msgs: u64,
}

/// Per-phase figures of the batched algorithm recomputed from the oracle
/// cube. Phase i sees the segments concrete on everything left of G_i and
/// produces the ones concrete left of G_i's start; each produced segment
/// sends one local message per parent within G_i.
pub fn expected_phases(schema: &Schema, grouping: &Grouping, rows: &[Row]) -> Vec<PhaseExpect> {
    let cube = oracle_cube(schema, rows);
    let concrete_prefix = |k: &Key, n: usize| k[..n].iter().all(|&c| c != 0);
    let mut out = Vec::new();
    for i in 1..=grouping.num_groups() {
        let g = grouping.group(i);
        let gd = group_depths(schema, &g);
        let input_rows = if i == 1 {
            rows.len() as u64
        } else {
            cube.keys().filter(|k| concrete_prefix(k, g.end)).count() as u64
        };
        let mut output_rows = 0;
        let mut local_msgs = 0;
        for k in cube.keys().filter(|k| concrete_prefix(k, g.start)) {
            output_rows += 1;
            local_msgs += brute_parents(&gd, &k[g.clone()]).len() as u64;
        }
        out.push(PhaseExpect {
            input_rows,
            output_rows,
            local_msgs,
        });
    }
    out
}

/// Every row of the full cross product of `n` one-column dimensions with
/// `c` values each, count 1.
pub fn cross_product(n: usize, c: u32) -> (Schema, Vec<Row>) {
    let schema = schema_from_depths(&vec![1; n]);
    let mut rows = Vec::new();
    let total = (c as usize).pow(n as u32);
    for mut idx in 0..total {
        let mut key = Vec::with_capacity(n);
        for _ in 0..n {
            key.push((idx % c as usize) as u32 + 1);
            idx /= c as usize;
        }
        rows.push(Row::new(SegmentKey::from_raw(&key), 1).unwrap());
    }
    (schema, rows)
}
