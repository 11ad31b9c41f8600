//! Layer-by-layer materialization over the simulator.
//!
//! Round 0 merges duplicate rows. Round `k` takes every segment with `k - 1`
//! stars and sends its count to each of its primary parents, all of which
//! have exactly `k` stars. Shuffle keys are whole segment keys, so every
//! send is a remote message.

use crate::error::Result;
use crate::model::{checked_add, parent_positions, Cell, Cube, Row, Schema, SegmentKey};
use crate::sim::{run_mapreduce, Emitter, PhaseStore, ReduceContext, RunStats, SimConfig};

fn sum_counts(
    key: &SegmentKey,
    counts: Vec<i64>,
    ctx: &mut ReduceContext<(SegmentKey, i64)>,
) -> Result<()> {
    let total = counts
        .into_iter()
        .try_fold(0i64, |acc, c| checked_add(acc, c, key))?;
    ctx.emit((key.clone(), total));
    Ok(())
}

pub fn layered_materialize(
    schema: &Schema,
    rows: impl IntoIterator<Item = Row>,
    sim: &SimConfig,
) -> Result<(Cube, RunStats)> {
    let mut stats = RunStats::new("layered");
    let mut cube = Cube::new();
    let mut rows = rows.into_iter().peekable();
    if rows.peek().is_none() {
        sim.validate()?;
        return Ok((cube, stats));
    }

    let (level, round) = run_mapreduce(
        0,
        rows.map(Ok),
        |row: Row, e: &mut Emitter<SegmentKey, i64>| {
            e.emit(row.key, row.count);
            Ok(())
        },
        sum_counts,
        sim,
    )?;
    stats.phases.push(round);
    for (key, count) in &level {
        cube.add(key.clone(), *count)?;
    }
    let mut store = PhaseStore::new(level, sim)?;

    let ranges = schema.dimension_ranges();
    for k in 1..=schema.num_columns() {
        // Every non-empty segment with a star has a non-empty primary child,
        // so an empty level means all later levels are empty too.
        if store.is_empty() {
            break;
        }
        let (level, round) = run_mapreduce(
            k,
            store.into_rows(),
            |(key, count): (SegmentKey, i64), e: &mut Emitter<SegmentKey, i64>| {
                for p in parent_positions(ranges, key.cells()) {
                    e.emit(key.with_cell(p, Cell::ALL), count);
                }
                Ok(())
            },
            sum_counts,
            sim,
        )?;
        stats.phases.push(round);
        for (key, count) in &level {
            debug_assert_eq!(key.star_count(), k);
            cube.add(key.clone(), *count)?;
        }
        store = PhaseStore::new(level, sim)?;
    }
    Ok((cube, stats))
}
