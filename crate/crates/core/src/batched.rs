//! Grouped, phase-per-group cube materialization.
//!
//! Columns are partitioned into contiguous groups `G_g, .., G_1` (left to
//! right), each holding whole dimensions. Phase `i` shuffles every segment by
//! its cells outside `G_i`, so a single reducer sees all `G_i`-variants of one
//! setting of the other groups and materializes `G_i` locally, level by
//! level, from primary children. Only the mapper emission is remote; every
//! copy-add inside the reducer is local.
//!
//! Phase `i` input: concrete in `G_g..G_i`, anything in `G_{i-1}..G_1`.
//! Phase `i` output: concrete in `G_g..G_{i+1}`, anything in `G_i..G_1`.

use std::ops::Range;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::model::{parent_positions, Cell, Cells, Cube, Row, Schema, SegmentKey};
use crate::sim::{run_mapreduce, Emitter, PhaseStore, ReduceContext, RunStats, SimConfig};

/// Ordered partition of the columns, `G_g` (leftmost) first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grouping {
    groups: Vec<Range<usize>>,
}

impl Grouping {
    /// Groups as column ranges, leftmost (`G_g`) first.
    pub fn new(schema: &Schema, groups: Vec<Range<usize>>) -> Result<Grouping> {
        let g = Grouping { groups };
        g.validate(schema)?;
        Ok(g)
    }

    /// Groups as lists of dimension names, leftmost (`G_g`) first.
    pub fn from_dimension_groups<S: AsRef<str>>(
        schema: &Schema,
        groups: &[Vec<S>],
    ) -> Result<Grouping> {
        let ranges = schema.dimension_ranges();
        let mut next_dim = 0;
        let mut out = Vec::with_capacity(groups.len());
        for group in groups {
            if group.is_empty() {
                return Err(Error::Grouping("empty group".into()));
            }
            let start = next_dim;
            for name in group {
                let name = name.as_ref();
                let idx = schema
                    .dimension_index(name)
                    .ok_or_else(|| Error::Grouping(format!("unknown dimension `{name}`")))?;
                if idx < next_dim {
                    return Err(Error::Grouping(format!(
                        "dimension `{name}` listed twice or out of schema order"
                    )));
                }
                if idx > next_dim {
                    let missing = &schema.dimensions()[next_dim].name;
                    return Err(Error::Grouping(format!(
                        "dimension `{missing}` must come before `{name}`"
                    )));
                }
                next_dim += 1;
            }
            out.push(ranges[start].start..ranges[next_dim - 1].end);
        }
        if next_dim != schema.num_dimensions() {
            let missing = &schema.dimensions()[next_dim].name;
            return Err(Error::Grouping(format!(
                "dimension `{missing}` is not in any group"
            )));
        }
        Grouping::new(schema, out)
    }

    /// One group holding every column.
    pub fn single(schema: &Schema) -> Grouping {
        Grouping {
            groups: std::iter::once(0..schema.num_columns()).collect(),
        }
    }

    /// One group per dimension.
    pub fn per_dimension(schema: &Schema) -> Grouping {
        Grouping {
            groups: schema.dimension_ranges().to_vec(),
        }
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Column range of `G_i`, `i` in `1..=g`.
    pub fn group(&self, i: usize) -> Range<usize> {
        self.groups[self.groups.len() - i].clone()
    }

    /// Column ranges, leftmost (`G_g`) first.
    pub fn ranges(&self) -> &[Range<usize>] {
        &self.groups
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::Grouping("no groups".into()));
        }
        let mut expected = 0;
        for g in &self.groups {
            if g.start != expected {
                return Err(Error::Grouping(format!(
                    "groups must be contiguous in column order; expected a group starting at column {expected}, found {g:?}"
                )));
            }
            if g.is_empty() {
                return Err(Error::Grouping(format!(
                    "empty group at column {}",
                    g.start
                )));
            }
            expected = g.end;
        }
        if expected != schema.num_columns() {
            return Err(Error::Grouping(format!(
                "groups cover {expected} of {} columns",
                schema.num_columns()
            )));
        }
        for (d, r) in schema.dimensions().iter().zip(schema.dimension_ranges()) {
            if !self
                .groups
                .iter()
                .any(|g| g.start <= r.start && r.end <= g.end)
            {
                return Err(Error::Grouping(format!(
                    "dimension `{}` is split across groups",
                    d.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhasePlan {
    /// `i` in `1..=g`.
    pub phase: usize,
    /// Columns of `G_i`.
    pub group: Range<usize>,
    /// Dimension ranges inside `G_i`, relative to `group.start`.
    pub group_dims: Vec<Range<usize>>,
    /// Input segments are concrete on columns `0..input_concrete`.
    pub input_concrete: usize,
    /// Output segments are concrete on columns `0..output_concrete`.
    pub output_concrete: usize,
}

impl PhasePlan {
    pub fn width(&self) -> usize {
        self.group.len()
    }

    fn rejoin(&self, shuffle_key: &SegmentKey, group_cells: &[Cell]) -> SegmentKey {
        let outer = shuffle_key.cells();
        let split = self.group.start;
        SegmentKey::new(
            outer[..split]
                .iter()
                .chain(group_cells)
                .chain(&outer[split..])
                .copied(),
        )
    }
}

pub fn plan_phases(schema: &Schema, grouping: &Grouping) -> Result<Vec<PhasePlan>> {
    grouping.validate(schema)?;
    let plans = (1..=grouping.num_groups())
        .map(|i| {
            let group = grouping.group(i);
            let group_dims = schema
                .dimension_ranges()
                .iter()
                .filter(|r| group.start <= r.start && r.end <= group.end)
                .map(|r| r.start - group.start..r.end - group.start)
                .collect();
            PhasePlan {
                phase: i,
                input_concrete: group.end,
                output_concrete: group.start,
                group,
                group_dims,
            }
        })
        .collect();
    Ok(plans)
}

/// Mapper: shuffle key is every cell outside `G_i`, value is the `G_i` cells
/// and the count.
pub fn map_phase(
    plan: &PhasePlan,
    segment: &SegmentKey,
    count: i64,
) -> Result<(SegmentKey, (Cells, i64))> {
    let cells = segment.cells();
    if cells.len() < plan.input_concrete {
        return Err(Error::KeyLength {
            expected: plan.input_concrete,
            actual: cells.len(),
        });
    }
    if let Some(column) = cells[..plan.input_concrete].iter().position(|c| c.is_all()) {
        return Err(Error::ShapeMismatch {
            phase: plan.phase,
            column,
        });
    }
    let key = SegmentKey::new(
        cells[..plan.group.start]
            .iter()
            .chain(&cells[plan.group.end..])
            .copied(),
    );
    let value = Cells::from_slice(&cells[plan.group.clone()]);
    Ok((key, (value, count)))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReduceOutput {
    pub rows: Vec<(SegmentKey, i64)>,
    /// `h_{k-1} -> h_k` copy-adds.
    pub local_msgs: u64,
}

/// Reducer: local materialization of `G_i` for one shuffle key.
///
/// `levels[k]` holds the `G_i` vectors with exactly `k` stars. Level 0 merges
/// the incoming values; level `k` is built from level `k - 1` by sending each
/// entry to its primary parents within `G_i`. Rows come out level by level,
/// each level in key order.
pub fn reduce_phase(
    plan: &PhasePlan,
    shuffle_key: &SegmentKey,
    values: Vec<(Cells, i64)>,
) -> Result<ReduceOutput> {
    let width = plan.width();
    let mut levels: Vec<FxHashMap<Cells, i64>> = vec![FxHashMap::default(); width + 1];
    let overflow = |v: &[Cell]| Error::Overflow {
        key: plan.rejoin(shuffle_key, v).to_string(),
    };

    for (v, count) in values {
        if let Some(pos) = v.iter().position(|c| c.is_all()) {
            return Err(Error::ShapeMismatch {
                phase: plan.phase,
                column: plan.group.start + pos,
            });
        }
        let slot = levels[0].entry(v).or_insert(0);
        *slot = slot.checked_add(count).ok_or_else(|| Error::Overflow {
            key: shuffle_key.to_string(),
        })?;
    }

    let mut local_msgs = 0u64;
    for k in 1..=width {
        let (done, rest) = levels.split_at_mut(k);
        let (below, current) = (&done[k - 1], &mut rest[0]);
        for (v, &count) in below {
            for p in parent_positions(&plan.group_dims, v) {
                let mut u = v.clone();
                u[p] = Cell::ALL;
                let slot = current.entry(u).or_insert(0);
                *slot = slot.checked_add(count).ok_or_else(|| overflow(v))?;
                local_msgs += 1;
            }
        }
    }

    let mut rows = Vec::with_capacity(levels.iter().map(|h| h.len()).sum());
    for level in levels {
        let mut entries: Vec<(Cells, i64)> = level.into_iter().collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        rows.extend(
            entries
                .into_iter()
                .map(|(v, c)| (plan.rejoin(shuffle_key, &v), c)),
        );
    }
    Ok(ReduceOutput { rows, local_msgs })
}

pub fn batched_materialize(
    schema: &Schema,
    grouping: &Grouping,
    rows: impl IntoIterator<Item = Row>,
    sim: &SimConfig,
) -> Result<(Cube, RunStats)> {
    let plans = plan_phases(schema, grouping)?;
    sim.validate()?;
    let mut stats = RunStats::new("batched");
    let mut input: Box<dyn Iterator<Item = Result<(SegmentKey, i64)>> + '_> =
        Box::new(rows.into_iter().map(|r| Ok((r.key, r.count))));
    let mut cube = Cube::new();

    for plan in &plans {
        let (outputs, phase_stats) = run_mapreduce(
            plan.phase,
            input,
            |(segment, count): (SegmentKey, i64), e: &mut Emitter<SegmentKey, (Cells, i64)>| {
                let (key, value) = map_phase(plan, &segment, count)?;
                e.emit(key, value);
                Ok(())
            },
            |key: &SegmentKey, values, ctx: &mut ReduceContext<(SegmentKey, i64)>| {
                let out = reduce_phase(plan, key, values)?;
                ctx.add_local(out.local_msgs);
                for row in out.rows {
                    ctx.emit(row);
                }
                Ok(())
            },
            sim,
        )?;
        debug_assert_eq!(phase_stats.remote_msgs, phase_stats.input_rows);
        stats.phases.push(phase_stats);

        if plan.phase == plans.len() {
            for (key, count) in outputs {
                cube.add(key, count)?;
            }
            break;
        }
        input = PhaseStore::new(outputs, sim)?.into_rows();
    }
    Ok((cube, stats))
}
