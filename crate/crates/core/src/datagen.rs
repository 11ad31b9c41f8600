//! Seeded synthetic datasets with hierarchical dimensions and Zipf skew.
//!
//! For each dimension one leaf value (lowest-level column) is drawn by rank
//! from a Zipf distribution over the leaf cardinality; the higher-level
//! values are derived from it. Value `j` at level `l` has parent
//! `j mod card(l-1)`, so every parent prefix owns a fixed set of children.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::error::{Error, Result};
use crate::io::{DatasetWriter, DimensionProfile};
use crate::model::Schema;

pub const MAX_COUNT: i64 = 100;

struct DimensionSampler {
    zipf: Zipf<f64>,
    cardinalities: Vec<u64>,
}

impl DimensionSampler {
    /// Value index per column, highest level first.
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut Vec<u64>) {
        let leaf = self.zipf.sample(rng) as u64 - 1;
        let start = out.len();
        out.resize(start + self.cardinalities.len(), 0);
        let mut v = leaf;
        for (l, &card) in self.cardinalities.iter().enumerate().rev() {
            v %= card;
            out[start + l] = v;
        }
    }
}

pub struct Generator {
    samplers: Vec<DimensionSampler>,
    columns: Vec<String>,
    rng: ChaCha8Rng,
}

impl Generator {
    pub fn new(schema: &Schema, profiles: &[DimensionProfile], seed: u64) -> Result<Generator> {
        if profiles.len() != schema.num_dimensions() {
            return Err(Error::InvalidParameter(format!(
                "{} dimension profiles for {} dimensions",
                profiles.len(),
                schema.num_dimensions()
            )));
        }
        let mut samplers = Vec::with_capacity(profiles.len());
        for (dim, p) in schema.dimensions().iter().zip(profiles) {
            if p.cardinalities.len() != dim.columns.len() {
                return Err(Error::InvalidParameter(format!(
                    "dimension `{}`: {} cardinalities for {} columns",
                    dim.name,
                    p.cardinalities.len(),
                    dim.columns.len()
                )));
            }
            if p.cardinalities.contains(&0) {
                return Err(Error::InvalidParameter(format!(
                    "dimension `{}`: cardinality must be at least 1",
                    dim.name
                )));
            }
            let leaves = *p.cardinalities.last().unwrap();
            let zipf = Zipf::new(leaves as f64, p.skew)
                .map_err(|e| Error::InvalidParameter(format!("dimension `{}`: {e}", dim.name)))?;
            samplers.push(DimensionSampler {
                zipf,
                cardinalities: p.cardinalities.clone(),
            });
        }
        Ok(Generator {
            samplers,
            columns: schema.column_names().map(str::to_owned).collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Next row as per-column value indices plus a count in `1..=MAX_COUNT`.
    pub fn next_indices(&mut self, out: &mut Vec<u64>) -> i64 {
        out.clear();
        for s in &self.samplers {
            s.sample(&mut self.rng, out);
        }
        self.rng.random_range(1..=MAX_COUNT)
    }

    pub fn value_name(&self, column: usize, index: u64) -> String {
        format!("{}{}", self.columns[column], index)
    }
}

/// Writes `rows` generated rows in the dataset format.
pub fn generate<W: Write>(
    schema: &Schema,
    profiles: &[DimensionProfile],
    rows: u64,
    seed: u64,
    out: W,
) -> Result<W> {
    let mut gen = Generator::new(schema, profiles, seed)?;
    let mut writer = DatasetWriter::new(out, schema)?;
    let mut idx = Vec::with_capacity(schema.num_columns());
    let mut values = Vec::with_capacity(schema.num_columns());
    for _ in 0..rows {
        let count = gen.next_indices(&mut idx);
        values.clear();
        values.extend(idx.iter().enumerate().map(|(c, &i)| gen.value_name(c, i)));
        writer.write_row(&values, count)?;
    }
    writer.finish()
}
