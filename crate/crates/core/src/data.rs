//! Typed column store: attribute types, resolution estimation, schema
//! inference and CSV ingestion.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CrackError, Result};

/// Fraction of the record count used to pick the k-th smallest gap.
pub const DEFAULT_RESOLUTION_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeType {
    Binary,
    Categorical,
    Numeric,
}

impl AttributeType {
    pub fn is_nominal(self) -> bool {
        !matches!(self, AttributeType::Numeric)
    }

    pub fn code(self) -> char {
        match self {
            AttributeType::Binary => 'b',
            AttributeType::Categorical => 'c',
            AttributeType::Numeric => 'n',
        }
    }
}

impl FromStr for AttributeType {
    type Err = CrackError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "b" | "binary" => Ok(AttributeType::Binary),
            "c" | "categorical" => Ok(AttributeType::Categorical),
            "n" | "numeric" => Ok(AttributeType::Numeric),
            other => Err(CrackError::Schema(format!("unknown type `{other}`"))),
        }
    }
}

impl fmt::Display for AttributeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttributeType::Binary => "binary",
            AttributeType::Categorical => "categorical",
            AttributeType::Numeric => "numeric",
        };
        f.write_str(s)
    }
}

/// Parses a comma separated type list such as `b,c,n`, or the compact
/// form `bcn` of single-letter codes.
pub fn parse_type_list(s: &str) -> Result<Vec<AttributeType>> {
    let s = s.trim();
    if !s.contains(',') && s.len() > 1 && s.chars().all(|c| "bcnBCN".contains(c)) {
        return s.chars().map(|c| c.to_string().parse()).collect();
    }
    s.split(',').map(str::parse).collect()
}

/// Cell storage. Nominal cells are dense category codes in first-appearance order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Column {
    Nominal {
        codes: Vec<u32>,
        labels: Vec<String>,
    },
    Numeric(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Nominal { codes, .. } => codes.len(),
            Column::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Result of [`robust_min_diff`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolutionEstimate {
    pub resolution: f64,
    pub constant: bool,
}

/// Estimates the recording resolution of a numeric column as the k-th
/// smallest strictly positive gap between sorted distinct values, with
/// `k = max(1, round(fraction * n))` clamped to the number of gaps.
///
/// A column without two distinct values yields resolution 1 and is
/// flagged constant.
pub fn robust_min_diff(values: &[f64], fraction: f64) -> ResolutionEstimate {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut gaps: Vec<f64> = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .collect();
    if gaps.is_empty() {
        return ResolutionEstimate {
            resolution: 1.0,
            constant: true,
        };
    }
    let k = ((fraction * values.len() as f64).round() as usize).clamp(1, gaps.len());
    let (_, kth, _) = gaps.select_nth_unstable_by(k - 1, f64::total_cmp);
    ResolutionEstimate {
        resolution: *kth,
        constant: false,
    }
}

/// A single typed column with its resolution and domain bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeType,
    pub column: Column,
    pub resolution: f64,
    /// Numeric only; 0 for nominal attributes.
    pub min: f64,
    /// Numeric only; 0 for nominal attributes.
    pub max: f64,
    /// Nominal only; 1 for numeric attributes.
    pub category_count: usize,
    /// Fewer than two distinct values.
    pub constant: bool,
}

impl Attribute {
    /// Numeric attribute with resolution estimated by [`robust_min_diff`].
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::numeric_with_fraction(name, values, DEFAULT_RESOLUTION_FRACTION)
    }

    pub fn numeric_with_fraction(
        name: impl Into<String>,
        values: Vec<f64>,
        fraction: f64,
    ) -> Result<Self> {
        let est = robust_min_diff(&values, fraction);
        let mut attr = Self::numeric_with_resolution(name, values, est.resolution)?;
        attr.constant = est.constant;
        Ok(attr)
    }

    pub fn numeric_with_resolution(
        name: impl Into<String>,
        values: Vec<f64>,
        resolution: f64,
    ) -> Result<Self> {
        let name = name.into();
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(CrackError::column(0, &name, "resolution must be positive"));
        }
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(CrackError::column(
                0,
                &name,
                format!("non-finite value at row {row}"),
            ));
        }
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let (min, max) = if values.is_empty() {
            (0.0, 0.0)
        } else {
            (min, max)
        };
        Ok(Attribute {
            name,
            kind: AttributeType::Numeric,
            constant: min == max,
            column: Column::Numeric(values),
            resolution,
            min,
            max,
            category_count: 1,
        })
    }

    /// Nominal attribute from dense codes. `labels` may be empty, in which
    /// case codes are labelled by their number.
    pub fn nominal(
        name: impl Into<String>,
        codes: Vec<u32>,
        category_count: usize,
        labels: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        if category_count == 0 && !codes.is_empty() {
            return Err(CrackError::column(0, &name, "no categories"));
        }
        if let Some(bad) = codes.iter().find(|&&c| c as usize >= category_count) {
            return Err(CrackError::column(
                0,
                &name,
                format!("category code {bad} out of range 0..{category_count}"),
            ));
        }
        let labels = if labels.is_empty() {
            (0..category_count).map(|c| c.to_string()).collect()
        } else {
            labels
        };
        let distinct = {
            let mut seen = vec![false; category_count];
            codes.iter().for_each(|&c| seen[c as usize] = true);
            seen.into_iter().filter(|&s| s).count()
        };
        let kind = if category_count == 2 {
            AttributeType::Binary
        } else {
            AttributeType::Categorical
        };
        Ok(Attribute {
            name,
            kind,
            column: Column::Nominal { codes, labels },
            resolution: 1.0,
            min: 0.0,
            max: 0.0,
            category_count: category_count.max(1),
            constant: distinct < 2,
        })
    }

    /// Nominal attribute from text labels, coded by first appearance.
    pub fn nominal_from_labels<S: AsRef<str>>(
        name: impl Into<String>,
        cells: &[S],
    ) -> Result<Self> {
        let mut index: HashMap<&str, u32> = HashMap::new();
        let mut labels = Vec::new();
        let codes = cells
            .iter()
            .map(|cell| {
                let cell = cell.as_ref();
                *index.entry(cell).or_insert_with(|| {
                    labels.push(cell.to_string());
                    (labels.len() - 1) as u32
                })
            })
            .collect();
        let count = labels.len();
        Self::nominal(name, codes, count, labels)
    }

    pub fn len(&self) -> usize {
        self.column.len()
    }

    pub fn is_empty(&self) -> bool {
        self.column.is_empty()
    }

    pub fn is_nominal(&self) -> bool {
        self.kind.is_nominal()
    }

    /// Number of distinguishable values: category count for nominal
    /// attributes, `(max - min) / res + 1` for numeric ones.
    pub fn domain_size(&self) -> f64 {
        if self.is_nominal() {
            self.category_count as f64
        } else {
            (self.max - self.min) / self.resolution + 1.0
        }
    }

    pub fn numeric_values(&self) -> Option<&[f64]> {
        match &self.column {
            Column::Numeric(v) => Some(v),
            Column::Nominal { .. } => None,
        }
    }

    pub fn codes(&self) -> Option<&[u32]> {
        match &self.column {
            Column::Nominal { codes, .. } => Some(codes),
            Column::Numeric(_) => None,
        }
    }

    /// Category histogram over the whole column (nominal only).
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.category_count];
        if let Some(codes) = self.codes() {
            codes.iter().for_each(|&c| h[c as usize] += 1);
        }
        h
    }

    /// Cell value as f64 (category code for nominal attributes).
    #[inline]
    pub fn value(&self, row: usize) -> f64 {
        match &self.column {
            Column::Numeric(v) => v[row],
            Column::Nominal { codes, .. } => codes[row] as f64,
        }
    }

    /// Applies a permutation to the category codes; used to check that
    /// scores do not depend on label order.
    pub fn relabel(&self, permutation: &[u32]) -> Result<Self> {
        let Column::Nominal { codes, labels } = &self.column else {
            return Err(CrackError::Schema("relabel on numeric attribute".into()));
        };
        if permutation.len() != self.category_count {
            return Err(CrackError::Schema("permutation size mismatch".into()));
        }
        let mut new_labels = labels.clone();
        for (old, &new) in permutation.iter().enumerate() {
            new_labels[new as usize] = labels[old].clone();
        }
        let codes = codes.iter().map(|&c| permutation[c as usize]).collect();
        Self::nominal(self.name.clone(), codes, self.category_count, new_labels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    X,
    Y,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::X => Side::Y,
            Side::Y => Side::X,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::X => "X",
            Side::Y => "Y",
        }
    }
}

/// Records over a set of typed attributes, partitioned into X and Y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    attributes: Vec<Attribute>,
    n: usize,
    x: Vec<usize>,
    y: Vec<usize>,
}

impl Dataset {
    pub fn new(attributes: Vec<Attribute>, x: Vec<usize>, y: Vec<usize>) -> Result<Self> {
        let n = attributes.first().map_or(0, Attribute::len);
        for (i, a) in attributes.iter().enumerate() {
            if a.len() != n {
                return Err(CrackError::column(
                    i,
                    &a.name,
                    format!("has {} cells, expected {n}", a.len()),
                ));
            }
        }
        if n == 0 {
            return Err(CrackError::EmptyDataset);
        }
        for &i in x.iter().chain(&y) {
            if i >= attributes.len() {
                return Err(CrackError::SelectorOutOfRange {
                    index: i,
                    columns: attributes.len(),
                });
            }
        }
        if let Some(&i) = x.iter().find(|i| y.contains(i)) {
            return Err(CrackError::OverlappingSelectors(i));
        }
        let mut x = x;
        let mut y = y;
        for side in [&mut x, &mut y] {
            side.sort_unstable();
            side.dedup();
        }
        Ok(Dataset {
            attributes,
            n,
            x,
            y,
        })
    }

    /// Dataset where the first `split` attributes are X and the rest Y.
    pub fn from_split(attributes: Vec<Attribute>, split: usize) -> Result<Self> {
        let m = attributes.len();
        Self::new(attributes, (0..split).collect(), (split..m).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, i: usize) -> &Attribute {
        &self.attributes[i]
    }

    pub fn indices(&self, side: Side) -> &[usize] {
        match side {
            Side::X => &self.x,
            Side::Y => &self.y,
        }
    }

    pub fn x_indices(&self) -> &[usize] {
        &self.x
    }

    pub fn y_indices(&self) -> &[usize] {
        &self.y
    }

    /// Read-only view of one side.
    pub fn project(&self, side: Side) -> Result<DatasetView<'_>> {
        let indices = self.indices(side);
        if indices.is_empty() {
            return Err(CrackError::EmptySide(side.label()));
        }
        Ok(DatasetView {
            dataset: self,
            indices,
        })
    }

    /// Same data with X and Y exchanged.
    pub fn swapped(&self) -> Dataset {
        Dataset {
            attributes: self.attributes.clone(),
            n: self.n,
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }

    /// Replaces one attribute, keeping the X/Y partition.
    pub fn with_attribute(&self, i: usize, attribute: Attribute) -> Result<Dataset> {
        let mut attributes = self.attributes.clone();
        attributes[i] = attribute;
        Dataset::new(attributes, self.x.clone(), self.y.clone())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DatasetView<'a> {
    dataset: &'a Dataset,
    indices: &'a [usize],
}

impl<'a> DatasetView<'a> {
    pub fn n(&self) -> usize {
        self.dataset.n
    }

    pub fn indices(&self) -> &'a [usize] {
        self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn attributes(&self) -> impl Iterator<Item = &'a Attribute> + 'a {
        let d = self.dataset;
        self.indices.iter().map(move |&i| &d.attributes[i])
    }
}

/// Parses a selector list such as `0,2-4` (inclusive ranges, 0-based).
pub fn parse_selector(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || CrackError::InvalidSelector(part.to_string());
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(CrackError::InvalidSelector(s.to_string()));
    }
    Ok(out)
}

/// Text table as read from disk, before typing.
#[derive(Clone, Debug, Default)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delimiter {
    Byte(u8),
    Whitespace,
}

impl RawTable {
    /// Reads a delimited table. Without a header row, columns are named `c0, c1, ...`.
    pub fn read<R: Read>(mut reader: R, delimiter: Delimiter, has_header: bool) -> Result<Self> {
        let mut lines: Vec<Vec<String>> = match delimiter {
            Delimiter::Byte(b) => {
                let mut rdr = csv::ReaderBuilder::new()
                    .delimiter(b)
                    .has_headers(false)
                    .flexible(true)
                    .trim(csv::Trim::All)
                    .from_reader(reader);
                rdr.records()
                    .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
                    .collect::<std::result::Result<_, _>>()?
            }
            Delimiter::Whitespace => {
                let mut text = String::new();
                reader
                    .read_to_string(&mut text)
                    .map_err(|e| CrackError::io("<input>", e))?;
                text.lines()
                    .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
                    .filter(|cells| !cells.is_empty())
                    .collect()
            }
        };
        let header = if has_header {
            if lines.is_empty() {
                return Err(CrackError::EmptyDataset);
            }
            lines.remove(0)
        } else {
            let width = lines.first().map_or(0, Vec::len);
            (0..width).map(|i| format!("c{i}")).collect()
        };
        for (r, row) in lines.iter().enumerate() {
            if row.len() != header.len() {
                return Err(CrackError::RaggedRow {
                    row: r + usize::from(has_header) + 1,
                    found: row.len(),
                    expected: header.len(),
                });
            }
        }
        Ok(RawTable {
            header,
            rows: lines,
        })
    }

    pub fn from_path(path: &Path, delimiter: Delimiter, has_header: bool) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| CrackError::io(path, e))?;
        Self::read(std::io::BufReader::new(file), delimiter, has_header)
    }

    pub fn columns(&self) -> usize {
        self.header.len()
    }

    fn column_cells(&self, c: usize) -> impl Iterator<Item = &str> {
        self.rows.iter().map(move |r| r[c].as_str())
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell,
        "" | "?" | "NA" | "na" | "NaN" | "nan" | "null" | "NULL"
    )
}

fn parse_real(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Infers one type per column: two distinct non-numeric tokens is binary,
/// all cells numeric is numeric, anything else categorical.
pub fn infer_schema(table: &RawTable) -> Result<Vec<AttributeType>> {
    (0..table.columns())
        .map(|c| {
            let name = &table.header[c];
            if table.rows.is_empty() {
                return Err(CrackError::column(c, name, "empty column"));
            }
            if let Some(r) = table.column_cells(c).position(is_missing) {
                return Err(CrackError::column(
                    c,
                    name,
                    format!("missing value at data row {}", r + 1),
                ));
            }
            if table.column_cells(c).all(|cell| parse_real(cell).is_some()) {
                return Ok(AttributeType::Numeric);
            }
            let mut distinct: Vec<&str> = table.column_cells(c).collect();
            distinct.sort_unstable();
            distinct.dedup();
            Ok(if distinct.len() == 2 {
                AttributeType::Binary
            } else {
                AttributeType::Categorical
            })
        })
        .collect()
}

/// Ingestion settings shared by the CLI and the benchmark loader.
#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub types: Option<Vec<AttributeType>>,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub delimiter: Delimiter,
    pub has_header: bool,
    pub resolution_fraction: f64,
}

impl LoadOptions {
    pub fn new(x: Vec<usize>, y: Vec<usize>) -> Self {
        LoadOptions {
            types: None,
            x,
            y,
            delimiter: Delimiter::Byte(b','),
            has_header: true,
            resolution_fraction: DEFAULT_RESOLUTION_FRACTION,
        }
    }
}

/// Types a raw table and builds a dataset.
pub fn dataset_from_table(table: &RawTable, opts: &LoadOptions) -> Result<Dataset> {
    if table.rows.is_empty() {
        return Err(CrackError::EmptyDataset);
    }
    let m = table.columns();
    for &i in opts.x.iter().chain(&opts.y) {
        if i >= m {
            return Err(CrackError::SelectorOutOfRange {
                index: i,
                columns: m,
            });
        }
    }
    if let Some(&i) = opts.x.iter().find(|i| opts.y.contains(i)) {
        return Err(CrackError::OverlappingSelectors(i));
    }
    let types = match &opts.types {
        Some(t) if t.len() != m => {
            return Err(CrackError::Schema(format!(
                "{} types given for {m} columns",
                t.len()
            )))
        }
        Some(t) => t.clone(),
        None => infer_schema(table)?,
    };
    let mut attributes = Vec::with_capacity(m);
    for (c, kind) in types.iter().enumerate() {
        let name = &table.header[c];
        if let Some(r) = table.column_cells(c).position(is_missing) {
            return Err(CrackError::column(
                c,
                name,
                format!("missing value at data row {}", r + 1),
            ));
        }
        let attr = match kind {
            AttributeType::Numeric => {
                let values = table
                    .column_cells(c)
                    .enumerate()
                    .map(|(r, cell)| {
                        parse_real(cell).ok_or_else(|| {
                            CrackError::column(
                                c,
                                name,
                                format!("unparseable numeric cell `{cell}` at data row {}", r + 1),
                            )
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Attribute::numeric_with_fraction(name.clone(), values, opts.resolution_fraction)?
            }
            nominal => {
                let cells: Vec<&str> = table.column_cells(c).collect();
                let mut attr = Attribute::nominal_from_labels(name.clone(), &cells)?;
                match nominal {
                    AttributeType::Binary if attr.category_count > 2 => {
                        return Err(CrackError::column(
                            c,
                            name,
                            format!("declared binary but has {} categories", attr.category_count),
                        ))
                    }
                    AttributeType::Binary => {
                        // a binary column observed with a single value still has two categories
                        attr.category_count = 2;
                        attr.kind = AttributeType::Binary;
                        if let Column::Nominal { labels, .. } = &mut attr.column {
                            labels.resize(2, String::from("<unobserved>"));
                        }
                    }
                    _ => attr.kind = AttributeType::Categorical,
                }
                attr
            }
        };
        attributes.push(attr);
    }
    Dataset::new(attributes, opts.x.clone(), opts.y.clone())
}

/// Reads, types and partitions a CSV file.
pub fn load_csv(path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let table = RawTable::from_path(path, opts.delimiter, opts.has_header)?;
    dataset_from_table(&table, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(header: &[&str], rows: &[&[&str]]) -> RawTable {
        RawTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
        }
    }

    #[test]
    fn domain_size_examples() {
        let b = Attribute::nominal("b", vec![0, 1, 1], 2, vec![]).unwrap();
        assert_eq!(b.domain_size(), 2.0);
        let a = Attribute::numeric_with_resolution("a", vec![0.0, 10.0], 1.0).unwrap();
        assert_eq!(a.domain_size(), 11.0);
        let a = Attribute::numeric_with_resolution("a", vec![0.0, 1.0], 0.01).unwrap();
        assert!((a.domain_size() - 101.0).abs() < 1e-9);
    }

    #[test]
    fn domain_size_scale_invariant() {
        let a = Attribute::numeric_with_resolution("a", vec![-2.0, 3.5, 7.0], 0.5).unwrap();
        let scaled = Attribute::numeric_with_resolution("a", vec![-6.0, 10.5, 21.0], 1.5).unwrap();
        assert!((a.domain_size() - scaled.domain_size()).abs() < 1e-9);
    }

    #[test]
    fn robust_min_diff_examples() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(robust_min_diff(&v, 0.1).resolution, 1.0);

        let v = [0.0, 0.5, 1.0, 1.5, 100.0];
        let est = robust_min_diff(&v, 0.1);
        assert_eq!(est.resolution, 0.5);
        assert!(!est.constant);

        let est = robust_min_diff(&[3.0, 3.0, 3.0], 0.7);
        assert_eq!(
            est,
            ResolutionEstimate {
                resolution: 1.0,
                constant: true
            }
        );
    }

    #[test]
    fn robust_min_diff_ignores_duplicates_and_clamps() {
        // gaps {1, 2, 4}; k = round(0.5 * 8) = 4 clamps to 3
        let v = [0.0, 0.0, 1.0, 1.0, 3.0, 3.0, 7.0, 7.0];
        assert_eq!(robust_min_diff(&v, 0.5).resolution, 4.0);
        assert_eq!(robust_min_diff(&v, 0.1).resolution, 1.0);
    }

    #[test]
    fn schema_inference() {
        let t = table(
            &["a", "b", "c"],
            &[
                &["yes", "1.5", "red"],
                &["no", "2.0", "green"],
                &["yes", "-3", "blue"],
            ],
        );
        assert_eq!(
            infer_schema(&t).unwrap(),
            vec![
                AttributeType::Binary,
                AttributeType::Numeric,
                AttributeType::Categorical
            ]
        );
    }

    #[test]
    fn schema_rejects_missing() {
        let t = table(&["a", "b"], &[&["1", "x"], &["2", ""]]);
        let err = infer_schema(&t).unwrap_err().to_string();
        assert!(err.contains("column 1 (b)"), "{err}");
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err =
            RawTable::read("a,b\n1,2\n3\n".as_bytes(), Delimiter::Byte(b','), true).unwrap_err();
        assert!(matches!(err, CrackError::RaggedRow { row: 3, .. }));
    }

    #[test]
    fn whitespace_tables() {
        let t = RawTable::read("1 2\n3\t4\n\n".as_bytes(), Delimiter::Whitespace, false).unwrap();
        assert_eq!(t.header, vec!["c0", "c1"]);
        assert_eq!(t.rows.len(), 2);
    }

    #[test]
    fn load_assigns_codes_by_first_appearance() {
        let t = table(
            &["c", "v"],
            &[&["z", "1"], &["a", "2"], &["z", "4"], &["m", "8"]],
        );
        let d = dataset_from_table(&t, &LoadOptions::new(vec![0], vec![1])).unwrap();
        let c = d.attribute(0);
        assert_eq!(c.codes().unwrap(), &[0, 1, 0, 2]);
        assert_eq!(c.category_count, 3);
        assert_eq!(c.resolution, 1.0);
        let v = d.attribute(1);
        assert_eq!((v.min, v.max), (1.0, 8.0));
        assert_eq!(v.resolution, 1.0);
    }

    #[test]
    fn load_errors() {
        let t = table(&["a", "b"], &[]);
        assert!(matches!(
            dataset_from_table(&t, &LoadOptions::new(vec![0], vec![1])),
            Err(CrackError::EmptyDataset)
        ));

        let t = table(&["a", "b", "c", "d", "e"], &[&["1", "2", "3", "4", "5"]]);
        let opts = LoadOptions::new(
            parse_selector("0-2").unwrap(),
            parse_selector("2-4").unwrap(),
        );
        let err = dataset_from_table(&t, &opts).unwrap_err();
        assert!(err.to_string().contains("overlapping selectors"));

        let t = table(&["a", "b"], &[&["1", "x"]]);
        let mut opts = LoadOptions::new(vec![0], vec![1]);
        opts.types = Some(vec![AttributeType::Numeric, AttributeType::Numeric]);
        let err = dataset_from_table(&t, &opts).unwrap_err().to_string();
        assert!(err.contains("unparseable"), "{err}");
    }

    #[test]
    fn schema_override_forces_nominal() {
        let t = table(&["a", "b"], &[&["1", "0"], &["2", "1"], &["3", "1"]]);
        let mut opts = LoadOptions::new(vec![0], vec![1]);
        opts.types = Some(parse_type_list("c,b").unwrap());
        assert_eq!(
            parse_type_list("cbn").unwrap(),
            [
                AttributeType::Categorical,
                AttributeType::Binary,
                AttributeType::Numeric
            ]
        );
        assert!(parse_type_list("cbx").is_err());
        let d = dataset_from_table(&t, &opts).unwrap();
        assert_eq!(d.attribute(0).kind, AttributeType::Categorical);
        assert_eq!(d.attribute(1).kind, AttributeType::Binary);
    }

    #[test]
    fn selectors() {
        assert_eq!(parse_selector("0,2-4").unwrap(), vec![0, 2, 3, 4]);
        assert!(parse_selector("3-1").is_err());
        assert!(parse_selector("x").is_err());
    }

    #[test]
    fn projection() {
        let attrs = vec![
            Attribute::numeric_with_resolution("a", vec![1.0, 2.0], 0.5).unwrap(),
            Attribute::numeric_with_resolution("b", vec![1.0, 2.0], 0.25).unwrap(),
            Attribute::nominal("c", vec![0, 1], 2, vec![]).unwrap(),
        ];
        let d = Dataset::new(attrs, vec![0], vec![1, 2]).unwrap();
        let x = d.project(Side::X).unwrap();
        let y = d.project(Side::Y).unwrap();
        let mut all: Vec<usize> = x.indices().iter().chain(y.indices()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2]);
        assert_eq!(y.attributes().next().unwrap().resolution, 0.25);
        assert_eq!(x.n(), 2);

        let d = Dataset::new(d.attributes().to_vec(), vec![0, 1], vec![]).unwrap();
        assert!(matches!(
            d.project(Side::Y),
            Err(CrackError::EmptySide("Y"))
        ));
    }

    #[test]
    fn relabel_permutes_codes() {
        let a = Attribute::nominal_from_labels("a", &["p", "q", "r", "p"]).unwrap();
        let b = a.relabel(&[2, 0, 1]).unwrap();
        assert_eq!(b.codes().unwrap(), &[2, 0, 1, 2]);
        assert_eq!(b.histogram(), vec![1, 1, 2]);
    }
}
