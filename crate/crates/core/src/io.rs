//! Config loading, TSV datasets, cube files and cube diffs.
//!
//! Datasets and cube files are tab-separated with a header of the column
//! names followed by the metric name. In cube files an aggregated cell is the
//! literal `*`. Cell values may not contain tabs or newlines; a literal `*`
//! or `\` inside a value is written as `\*` or `\\`.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::batched::Grouping;
use crate::error::{Error, Result};
use crate::model::{
    is_valid_segment, Cell, Cube, Dimension, Row, Schema, SegmentKey, ValueDictionary,
};

pub const STAR: &str = "*";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    metric: String,
    #[serde(rename = "dimension")]
    dimensions: Vec<RawDimension>,
    grouping: Option<RawGrouping>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDimension {
    name: String,
    columns: Vec<String>,
    cardinalities: Option<Vec<u64>>,
    skew: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrouping {
    groups: Vec<Vec<String>>,
}

/// Generator settings carried alongside a schema in the config file.
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionProfile {
    /// Distinct values per column, highest level first.
    pub cardinalities: Vec<u64>,
    pub skew: f64,
}

pub const DEFAULT_CARDINALITY: u64 = 8;

#[derive(Clone, Debug)]
pub struct Config {
    pub schema: Schema,
    pub grouping: Grouping,
    pub profiles: Vec<DimensionProfile>,
}

/// Loads a TOML config:
///
/// ```toml
/// metric = "count"
///
/// [[dimension]]
/// name = "region"
/// columns = ["country", "state", "city"]
/// cardinalities = [4, 20, 200]   # optional, used by `generate`
/// skew = 1.0                     # optional, used by `generate`
///
/// [grouping]                     # optional, defaults to one group
/// groups = [["region"], ["query"], ["advertiser"]]
/// ```
pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_config(&text, path)
}

pub fn parse_config(text: &str, path: &Path) -> Result<Config> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map_or(0, |s| text[..s.start].matches('\n').count() + 1);
        Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.message().to_string(),
        }
    })?;
    let config_err = |message: String| Error::Config {
        path: path.to_path_buf(),
        message,
    };

    let mut profiles = Vec::with_capacity(raw.dimensions.len());
    let mut dimensions = Vec::with_capacity(raw.dimensions.len());
    for d in raw.dimensions {
        let cardinalities = match d.cardinalities {
            Some(c) if c.len() != d.columns.len() => {
                return Err(config_err(format!(
                    "dimension `{}`: {} cardinalities for {} columns",
                    d.name,
                    c.len(),
                    d.columns.len()
                )))
            }
            Some(c) => c,
            None => vec![DEFAULT_CARDINALITY; d.columns.len()],
        };
        profiles.push(DimensionProfile {
            cardinalities,
            skew: d.skew.unwrap_or(0.0),
        });
        dimensions.push(Dimension {
            name: d.name,
            columns: d.columns,
        });
    }
    let schema = Schema::new(dimensions, raw.metric).map_err(|e| config_err(e.to_string()))?;
    let grouping = match raw.grouping {
        Some(g) => Grouping::from_dimension_groups(&schema, &g.groups)
            .map_err(|e| config_err(e.to_string()))?,
        None => Grouping::single(&schema),
    };
    Ok(Config {
        schema,
        grouping,
        profiles,
    })
}

pub fn escape_value(value: &str) -> Result<Cow<'_, str>> {
    if value.contains(['\t', '\n', '\r']) {
        return Err(Error::UnencodableValue(value.to_owned()));
    }
    if !value.contains(['*', '\\']) {
        return Ok(Cow::Borrowed(value));
    }
    let mut out = String::with_capacity(value.len() + 2);
    for ch in value.chars() {
        if ch == '*' || ch == '\\' {
            out.push('\\');
        }
        out.push(ch);
    }
    Ok(Cow::Owned(out))
}

pub fn unescape_value(cell: &str) -> std::result::Result<Cow<'_, str>, String> {
    if !cell.contains(['*', '\\']) {
        return Ok(Cow::Borrowed(cell));
    }
    let mut out = String::with_capacity(cell.len());
    let mut chars = cell.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '\\' => match chars.next() {
                Some(c @ ('*' | '\\')) => out.push(c),
                Some(c) => return Err(format!("unknown escape `\\{c}`")),
                None => return Err("dangling `\\` at end of cell".into()),
            },
            '*' => return Err("unescaped `*` inside a value".into()),
            c => out.push(c),
        }
    }
    Ok(Cow::Owned(out))
}

fn header_for(schema: &Schema) -> Vec<String> {
    schema
        .column_names()
        .chain(std::iter::once(schema.metric_name()))
        .map(str::to_owned)
        .collect()
}

fn open(path: &Path) -> Result<Lines<BufReader<File>>> {
    let f = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    Ok(BufReader::new(f).lines())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok(BufWriter::new(f))
}

struct TsvLines {
    path: PathBuf,
    lines: Lines<BufReader<File>>,
    line: usize,
}

impl TsvLines {
    fn open(path: &Path) -> Result<Self> {
        Ok(TsvLines {
            path: path.to_path_buf(),
            lines: open(path)?,
            line: 0,
        })
    }

    fn parse_err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Option<Result<String>> {
        let line = self.lines.next()?;
        self.line += 1;
        Some(
            line.map_err(|e| Error::io(format!("reading {}", self.path.display()), e))
                .map(|mut l| {
                    if l.ends_with('\r') {
                        l.pop();
                    }
                    l
                }),
        )
    }

    fn header(&mut self) -> Result<Vec<String>> {
        match self.next_line() {
            Some(line) => Ok(line?.split('\t').map(str::to_owned).collect()),
            None => Err(self.parse_err("missing header")),
        }
    }

    fn expect_header(&mut self, expected: &[String]) -> Result<()> {
        let header = self.header()?;
        if header != expected {
            return Err(self.parse_err(format!(
                "header {header:?} does not match schema {expected:?}"
            )));
        }
        Ok(())
    }

    fn parse_count(&self, field: &str) -> Result<i64> {
        field
            .parse::<i64>()
            .map_err(|e| self.parse_err(format!("metric {field:?}: {e}")))
    }
}

/// Streams rows from a dataset file, interning values as it goes.
pub struct DatasetReader<'d> {
    tsv: TsvLines,
    width: usize,
    dict: &'d mut ValueDictionary,
}

impl<'d> DatasetReader<'d> {
    pub fn open(path: &Path, schema: &Schema, dict: &'d mut ValueDictionary) -> Result<Self> {
        let mut tsv = TsvLines::open(path)?;
        tsv.expect_header(&header_for(schema))?;
        Ok(DatasetReader {
            tsv,
            width: schema.num_columns(),
            dict,
        })
    }

    fn parse(&mut self, line: &str) -> Result<Row> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != self.width + 1 {
            return Err(self.tsv.parse_err(format!(
                "expected {} fields, found {}",
                self.width + 1,
                fields.len()
            )));
        }
        let mut cells = Vec::with_capacity(self.width);
        for (col, field) in fields[..self.width].iter().enumerate() {
            if *field == STAR {
                return Err(self.tsv.parse_err(format!(
                    "column {}: `*` is not allowed in input rows",
                    col + 1
                )));
            }
            let value = unescape_value(field)
                .map_err(|m| self.tsv.parse_err(format!("column {}: {m}", col + 1)))?;
            cells.push(self.dict.intern(col, &value));
        }
        let count = self.tsv.parse_count(fields[self.width])?;
        Row::new(SegmentKey::new(cells), count)
    }
}

impl Iterator for DatasetReader<'_> {
    type Item = Result<Row>;

    fn next(&mut self) -> Option<Result<Row>> {
        let line = match self.tsv.next_line()? {
            Ok(l) => l,
            Err(e) => return Some(Err(e)),
        };
        Some(self.parse(&line))
    }
}

pub fn read_dataset(path: &Path, schema: &Schema, dict: &mut ValueDictionary) -> Result<Vec<Row>> {
    DatasetReader::open(path, schema, dict)?.collect()
}

/// Writes dataset rows given as already-rendered values.
pub struct DatasetWriter<W: Write> {
    out: W,
    width: usize,
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(mut out: W, schema: &Schema) -> Result<Self> {
        write_line(&mut out, header_for(schema).iter().map(String::as_str))?;
        Ok(DatasetWriter {
            out,
            width: schema.num_columns(),
        })
    }

    pub fn write_row<S: AsRef<str>>(&mut self, values: &[S], count: i64) -> Result<()> {
        assert_eq!(values.len(), self.width, "row arity");
        let mut fields = Vec::with_capacity(self.width + 1);
        for v in values {
            fields.push(escape_value(v.as_ref())?.into_owned());
        }
        fields.push(count.to_string());
        write_line(&mut self.out, fields.iter().map(String::as_str))
    }

    pub fn finish(mut self) -> Result<W> {
        self.out
            .flush()
            .map_err(|e| Error::io("flushing dataset", e))?;
        Ok(self.out)
    }
}

fn write_line<'a>(out: &mut impl Write, fields: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut first = true;
    let w = || -> std::io::Result<()> {
        for f in fields {
            if !first {
                out.write_all(b"\t")?;
            }
            first = false;
            out.write_all(f.as_bytes())?;
        }
        out.write_all(b"\n")
    };
    w().map_err(|e| Error::io("writing", e))
}

/// Writes the cube sorted by key, keeping only segments with
/// `|count| >= min_abs_count` when a threshold is given. Returns rows written.
pub fn write_cube(
    path: &Path,
    schema: &Schema,
    dict: &ValueDictionary,
    cube: &Cube,
    min_abs_count: Option<u64>,
) -> Result<usize> {
    let mut out = create(path)?;
    let n = write_cube_to(&mut out, schema, dict, cube, min_abs_count)?;
    out.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(n)
}

pub fn write_cube_to(
    out: &mut impl Write,
    schema: &Schema,
    dict: &ValueDictionary,
    cube: &Cube,
    min_abs_count: Option<u64>,
) -> Result<usize> {
    write_line(out, header_for(schema).iter().map(String::as_str))?;
    let mut written = 0;
    let mut fields: Vec<String> = Vec::with_capacity(schema.num_columns() + 1);
    for (key, count) in cube.sorted() {
        if min_abs_count.is_some_and(|t| count.unsigned_abs() < t) {
            continue;
        }
        fields.clear();
        for (col, cell) in key.cells().iter().enumerate() {
            if cell.is_all() {
                fields.push(STAR.to_owned());
            } else {
                let value = dict.value(col, *cell).ok_or_else(|| {
                    Error::UnencodableValue(format!(
                        "no dictionary entry for id {cell:?} in column {col}"
                    ))
                })?;
                fields.push(escape_value(value)?.into_owned());
            }
        }
        fields.push(count.to_string());
        write_line(out, fields.iter().map(String::as_str))?;
        written += 1;
    }
    Ok(written)
}

pub fn read_cube(path: &Path, schema: &Schema, dict: &mut ValueDictionary) -> Result<Cube> {
    let mut tsv = TsvLines::open(path)?;
    tsv.expect_header(&header_for(schema))?;
    let width = schema.num_columns();
    let mut cube = Cube::new();
    while let Some(line) = tsv.next_line() {
        let line = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != width + 1 {
            return Err(tsv.parse_err(format!(
                "expected {} fields, found {}",
                width + 1,
                fields.len()
            )));
        }
        let mut cells = Vec::with_capacity(width);
        for (col, field) in fields[..width].iter().enumerate() {
            if *field == STAR {
                cells.push(Cell::ALL);
            } else {
                let v = unescape_value(field)
                    .map_err(|m| tsv.parse_err(format!("column {}: {m}", col + 1)))?;
                cells.push(dict.intern(col, &v));
            }
        }
        let key = SegmentKey::new(cells);
        if !is_valid_segment(schema, &key)? {
            return Err(tsv.parse_err("segment violates the dimension hierarchy"));
        }
        if cube.contains(&key) {
            return Err(tsv.parse_err("duplicate segment"));
        }
        cube.add(key, tsv.parse_count(fields[width])?)?;
    }
    Ok(cube)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Discrepancy {
    OnlyInA { key: String, count: i64 },
    OnlyInB { key: String, count: i64 },
    CountDiffers { key: String, a: i64, b: i64 },
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Discrepancy::OnlyInA { key, count } => write!(f, "only in A: {key} = {count}"),
            Discrepancy::OnlyInB { key, count } => write!(f, "only in B: {key} = {count}"),
            Discrepancy::CountDiffers { key, a, b } => write!(f, "differs: {key}: A={a} B={b}"),
        }
    }
}

type RawCube = BTreeMap<Vec<Option<String>>, i64>;

fn read_raw_cube(path: &Path) -> Result<(Vec<String>, RawCube)> {
    let mut tsv = TsvLines::open(path)?;
    let header = tsv.header()?;
    let width = header.len().saturating_sub(1);
    let mut rows = BTreeMap::new();
    while let Some(line) = tsv.next_line() {
        let line = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != header.len() {
            return Err(tsv.parse_err(format!(
                "expected {} fields, found {}",
                header.len(),
                fields.len()
            )));
        }
        let key = fields[..width]
            .iter()
            .map(|f| {
                if *f == STAR {
                    Ok(None)
                } else {
                    unescape_value(f)
                        .map(|v| Some(v.into_owned()))
                        .map_err(|m| tsv.parse_err(m))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let count = tsv.parse_count(fields[width])?;
        if rows.insert(key, count).is_some() {
            return Err(tsv.parse_err("duplicate segment"));
        }
    }
    Ok((header, rows))
}

fn render_raw_key(key: &[Option<String>]) -> String {
    let cells: Vec<&str> = key.iter().map(|c| c.as_deref().unwrap_or(STAR)).collect();
    format!("({})", cells.join(", "))
}

/// Differences between two cube files, in key order. Empty iff the files
/// hold the same segment-to-count map.
pub fn diff_cubes(a: &Path, b: &Path) -> Result<Vec<Discrepancy>> {
    let (ha, ra) = read_raw_cube(a)?;
    let (hb, rb) = read_raw_cube(b)?;
    if ha != hb {
        return Err(Error::SchemaMismatch { a: ha, b: hb });
    }
    let mut out = Vec::new();
    let mut ia = ra.into_iter().peekable();
    let mut ib = rb.into_iter().peekable();
    loop {
        let ord = match (ia.peek(), ib.peek()) {
            (None, None) => break,
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (Some((ka, _)), Some((kb, _))) => ka.cmp(kb),
        };
        match ord {
            std::cmp::Ordering::Less => {
                let (k, count) = ia.next().unwrap();
                out.push(Discrepancy::OnlyInA {
                    key: render_raw_key(&k),
                    count,
                });
            }
            std::cmp::Ordering::Greater => {
                let (k, count) = ib.next().unwrap();
                out.push(Discrepancy::OnlyInB {
                    key: render_raw_key(&k),
                    count,
                });
            }
            std::cmp::Ordering::Equal => {
                let (k, a) = ia.next().unwrap();
                let (_, b) = ib.next().unwrap();
                if a != b {
                    out.push(Discrepancy::CountDiffers {
                        key: render_raw_key(&k),
                        a,
                        b,
                    });
                }
            }
        }
    }
    Ok(out)
}
