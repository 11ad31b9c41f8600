//! Schemas, segment keys and the primary-child relation.
//!
//! A segment key holds one [`Cell`] per column. Cells are interned value ids;
//! id 0 is reserved for `*` (aggregated), so the derived ordering on keys
//! sorts `*` before every concrete value.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cell(u32);

impl Cell {
    pub const ALL: Cell = Cell(0);

    /// Concrete cell for a dictionary id. Ids start at 1.
    pub fn concrete(id: u32) -> Cell {
        assert!(id != 0, "id 0 is reserved for `*`");
        Cell(id)
    }

    pub fn from_raw(raw: u32) -> Cell {
        Cell(raw)
    }

    pub fn raw(self) -> u32 {
        self.0
    }

    pub fn is_all(self) -> bool {
        self.0 == 0
    }

    pub fn is_concrete(self) -> bool {
        self.0 != 0
    }

    pub fn id(self) -> Option<u32> {
        (self.0 != 0).then_some(self.0)
    }
}

impl fmt::Debug for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.id() {
            Some(id) => write!(f, "{id}"),
            None => f.write_str("*"),
        }
    }
}

pub type Cells = SmallVec<[Cell; 8]>;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SegmentKey(Cells);

impl SegmentKey {
    pub fn new(cells: impl IntoIterator<Item = Cell>) -> Self {
        SegmentKey(cells.into_iter().collect())
    }

    /// Builds a key from raw ids, `0` meaning `*`.
    pub fn from_raw(raw: &[u32]) -> Self {
        SegmentKey(raw.iter().copied().map(Cell::from_raw).collect())
    }

    pub fn cells(&self) -> &[Cell] {
        &self.0
    }

    pub fn into_cells(self) -> Cells {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn star_count(&self) -> usize {
        self.0.iter().filter(|c| c.is_all()).count()
    }

    pub fn is_fully_concrete(&self) -> bool {
        self.0.iter().all(|c| c.is_concrete())
    }

    /// Copy of this key with the cell at `pos` replaced.
    pub fn with_cell(&self, pos: usize, cell: Cell) -> SegmentKey {
        let mut cells = self.0.clone();
        cells[pos] = cell;
        SegmentKey(cells)
    }

    /// Whether a fully concrete row key belongs to this segment.
    pub fn covers(&self, row: &SegmentKey) -> bool {
        self.0.len() == row.0.len()
            && self
                .0
                .iter()
                .zip(row.0.iter())
                .all(|(s, r)| s.is_all() || s == r)
    }
}

impl From<Cells> for SegmentKey {
    fn from(cells: Cells) -> Self {
        SegmentKey(cells)
    }
}

impl fmt::Debug for SegmentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for SegmentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c:?}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dimension {
    pub name: String,
    /// Column names, highest level first.
    pub columns: Vec<String>,
}

impl Dimension {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Dimension {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    dimensions: Vec<Dimension>,
    metric_name: String,
    ranges: Vec<Range<usize>>,
}

impl Schema {
    pub fn new(dimensions: Vec<Dimension>, metric_name: impl Into<String>) -> Result<Schema> {
        let metric_name = metric_name.into();
        validate_schema(&dimensions, &metric_name)?;
        let mut ranges = Vec::with_capacity(dimensions.len());
        let mut start = 0;
        for d in &dimensions {
            ranges.push(start..start + d.columns.len());
            start += d.columns.len();
        }
        Ok(Schema {
            dimensions,
            metric_name,
            ranges,
        })
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn metric_name(&self) -> &str {
        &self.metric_name
    }

    pub fn num_columns(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn num_dimensions(&self) -> usize {
        self.dimensions.len()
    }

    /// Column positions of each dimension, left to right.
    pub fn dimension_ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn dimension_index(&self, name: &str) -> Option<usize> {
        self.dimensions.iter().position(|d| d.name == name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.dimensions
            .iter()
            .flat_map(|d| d.columns.iter().map(String::as_str))
    }

    fn check_len(&self, key: &SegmentKey) -> Result<()> {
        if key.len() != self.num_columns() {
            return Err(Error::KeyLength {
                expected: self.num_columns(),
                actual: key.len(),
            });
        }
        Ok(())
    }
}

pub fn validate_schema(dimensions: &[Dimension], metric_name: &str) -> Result<()> {
    if dimensions.is_empty() {
        return Err(Error::EmptySchema);
    }
    let mut dims = HashMap::new();
    let mut columns = HashMap::new();
    columns.insert(metric_name, ());
    for d in dimensions {
        if d.columns.is_empty() {
            return Err(Error::EmptyDimension(d.name.clone()));
        }
        if dims.insert(d.name.as_str(), ()).is_some() {
            return Err(Error::DuplicateDimension(d.name.clone()));
        }
        for c in &d.columns {
            if columns.insert(c.as_str(), ()).is_some() {
                return Err(Error::DuplicateColumn(c.clone()));
            }
        }
    }
    Ok(())
}

/// `*` cells must form a suffix of every dimension.
pub fn is_valid_segment(schema: &Schema, key: &SegmentKey) -> Result<bool> {
    schema.check_len(key)?;
    Ok(valid_in(schema.dimension_ranges(), key.cells()))
}

pub(crate) fn valid_in(ranges: &[Range<usize>], cells: &[Cell]) -> bool {
    ranges.iter().all(|r| {
        let dim = &cells[r.clone()];
        let first_star = dim.iter().position(|c| c.is_all()).unwrap_or(dim.len());
        dim[first_star..].iter().all(|c| c.is_all())
    })
}

/// Every segment a fully concrete row belongs to, the row itself first.
pub fn enumerate_segments(schema: &Schema, row_key: &SegmentKey) -> Result<Vec<SegmentKey>> {
    schema.check_len(row_key)?;
    if let Some(column) = row_key.cells().iter().position(|c| c.is_all()) {
        return Err(Error::NotConcrete { column });
    }
    let total: usize = schema
        .dimension_ranges()
        .iter()
        .map(|r| r.len() + 1)
        .product();
    let mut out = Vec::with_capacity(total);
    out.push(row_key.clone());
    for r in schema.dimension_ranges() {
        let base = out.len();
        for i in 0..base {
            for cut in (r.start..r.end).rev() {
                let mut cells = out[i].0.clone();
                for c in &mut cells[cut..r.end] {
                    *c = Cell::ALL;
                }
                out.push(SegmentKey(cells));
            }
        }
    }
    Ok(out)
}

pub fn rightmost_star(key: &SegmentKey) -> Option<usize> {
    key.cells().iter().rposition(|c| c.is_all())
}

/// Position that primary children of `key` fill in: the first `*` of the
/// rightmost dimension containing a `*`. For one-column dimensions this is
/// simply the rightmost `*`; in a hierarchical dimension it is the highest
/// starred level, since a lower level cannot be concrete under a `*`.
pub fn primary_position(schema: &Schema, key: &SegmentKey) -> Option<usize> {
    primary_position_in(schema.dimension_ranges(), key.cells())
}

pub(crate) fn primary_position_in(ranges: &[Range<usize>], cells: &[Cell]) -> Option<usize> {
    ranges.iter().rev().find_map(|r| {
        cells[r.clone()]
            .iter()
            .position(|c| c.is_all())
            .map(|i| r.start + i)
    })
}

/// `a` is a primary child of `b` when they differ exactly at `b`'s primary
/// position, where `a` is concrete.
pub fn is_primary_child(schema: &Schema, a: &SegmentKey, b: &SegmentKey) -> bool {
    if a.len() != schema.num_columns() || b.len() != schema.num_columns() {
        return false;
    }
    let Some(p) = primary_position(schema, b) else {
        return false;
    };
    a.cells()[p].is_concrete()
        && a.cells()
            .iter()
            .zip(b.cells())
            .enumerate()
            .all(|(i, (x, y))| i == p || x == y)
}

pub fn primary_parents(schema: &Schema, a: &SegmentKey) -> Vec<SegmentKey> {
    parent_positions(schema.dimension_ranges(), a.cells())
        .into_iter()
        .map(|p| a.with_cell(p, Cell::ALL))
        .collect()
}

/// Positions whose starring yields a primary parent. Walking dimensions from
/// the right, each dimension contributes its last concrete column; the walk
/// stops after the first dimension that already holds a `*`.
pub(crate) fn parent_positions(ranges: &[Range<usize>], cells: &[Cell]) -> SmallVec<[usize; 8]> {
    let mut out = SmallVec::new();
    for r in ranges.iter().rev() {
        let dim = &cells[r.clone()];
        if let Some(last) = dim.iter().rposition(|c| c.is_concrete()) {
            out.push(r.start + last);
        }
        if dim.iter().any(|c| c.is_all()) {
            break;
        }
    }
    out
}

/// Segment key to additive count.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cube {
    entries: FxHashMap<SegmentKey, i64>,
}

impl Cube {
    pub fn new() -> Self {
        Cube::default()
    }

    pub fn add(&mut self, key: SegmentKey, count: i64) -> Result<()> {
        match self.entries.entry(key) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                *e.get_mut() = checked_add(*e.get(), count, e.key())?;
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(count);
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &SegmentKey) -> Option<i64> {
        self.entries.get(key).copied()
    }

    pub fn contains(&self, key: &SegmentKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SegmentKey, i64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &SegmentKey> {
        self.entries.keys()
    }

    /// Entries in key order.
    pub fn sorted(&self) -> Vec<(&SegmentKey, i64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        v
    }
}

pub(crate) fn checked_add(a: i64, b: i64, key: &SegmentKey) -> Result<i64> {
    a.checked_add(b).ok_or_else(|| Error::Overflow {
        key: key.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub key: SegmentKey,
    pub count: i64,
}

impl Row {
    pub fn new(key: SegmentKey, count: i64) -> Result<Row> {
        if let Some(column) = key.cells().iter().position(|c| c.is_all()) {
            return Err(Error::NotConcrete { column });
        }
        Ok(Row { key, count })
    }
}

/// Per-column bijection between text values and dense ids (1-based).
#[derive(Clone, Debug, Default)]
pub struct ValueDictionary {
    columns: Vec<ColumnDictionary>,
}

#[derive(Clone, Debug, Default)]
struct ColumnDictionary {
    ids: HashMap<String, u32>,
    values: Vec<String>,
}

impl ValueDictionary {
    pub fn new(num_columns: usize) -> Self {
        ValueDictionary {
            columns: vec![ColumnDictionary::default(); num_columns],
        }
    }

    pub fn for_schema(schema: &Schema) -> Self {
        Self::new(schema.num_columns())
    }

    pub fn intern(&mut self, column: usize, value: &str) -> Cell {
        let col = &mut self.columns[column];
        if let Some(&id) = col.ids.get(value) {
            return Cell::concrete(id);
        }
        col.values.push(value.to_owned());
        let id = col.values.len() as u32;
        col.ids.insert(value.to_owned(), id);
        Cell::concrete(id)
    }

    pub fn lookup(&self, column: usize, value: &str) -> Option<Cell> {
        self.columns[column]
            .ids
            .get(value)
            .map(|&id| Cell::concrete(id))
    }

    pub fn value(&self, column: usize, cell: Cell) -> Option<&str> {
        let id = cell.id()? as usize;
        self.columns[column].values.get(id - 1).map(String::as_str)
    }

    pub fn column_len(&self, column: usize) -> usize {
        self.columns[column].values.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }
}
