//! Naive broadcast materialization: every row sends its count to every
//! segment it belongs to.
//!
//! This is the reference the other engines are checked against, so it does
//! not go through the simulator. Message counts are computed directly: each
//! row produces `segments - 1` broadcast messages (remote) plus its own
//! shuffle message, which equals `input_rows` and is not repeated here.

use crate::error::Result;
use crate::model::{enumerate_segments, Cube, Row, Schema};
use crate::sim::{PhaseStats, RunStats};

pub fn broadcast_materialize(
    schema: &Schema,
    rows: impl IntoIterator<Item = Row>,
) -> Result<(Cube, RunStats)> {
    let mut cube = Cube::new();
    let mut input_rows = 0u64;
    let mut broadcast_msgs = 0u64;
    for row in rows {
        input_rows += 1;
        let segments = enumerate_segments(schema, &row.key)?;
        broadcast_msgs += segments.len() as u64 - 1;
        for seg in segments {
            cube.add(seg, row.count)?;
        }
    }
    let output_rows = cube.len() as u64;
    let stats = RunStats {
        algorithm: "broadcast".into(),
        phases: vec![PhaseStats {
            phase: 1,
            input_rows,
            remote_msgs: broadcast_msgs,
            output_rows,
            local_msgs: 0,
            reducer_keys: output_rows,
            max_output_rows_per_key: u64::from(output_rows > 0),
            max_local_msgs_per_key: 0,
            machine_rows: Vec::new(),
            machine_local_msgs: Vec::new(),
        }],
    };
    Ok((cube, stats))
}

/// Messages per row under broadcast, excluding the row's own segment.
pub fn broadcast_msgs_per_row(schema: &Schema) -> u64 {
    schema
        .dimension_ranges()
        .iter()
        .map(|r| r.len() as u64 + 1)
        .product::<u64>()
        - 1
}
