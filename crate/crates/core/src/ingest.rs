//! Loading flat numeric tables and computing their marginal distributions.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::{self, CHUNK};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Fields separated by runs of tabs or spaces.
    Tsv,
    /// Comma separated, RFC 4180 quoting.
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(Format::Tsv),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub format: Format,
    pub has_header: bool,
    pub id_column: bool,
    /// Require every value to be `>= 0` and every row sum to be `> 0`.
    pub nonneg: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            format: Format::Tsv,
            has_header: true,
            id_column: true,
            nonneg: true,
        }
    }
}

/// Observations (rows) crossed by attributes (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    row_ids: Arc<[String]>,
    col_names: Vec<String>,
    values: Array2<f64>,
}

impl DataMatrix {
    /// Builds a matrix from owned parts, checking shape and id uniqueness.
    pub fn new(row_ids: Vec<String>, col_names: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let (n, m) = values.dim();
        if n == 0 || m == 0 {
            return Err(Error::Empty);
        }
        if row_ids.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: row_ids.len(),
            });
        }
        if col_names.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: col_names.len(),
            });
        }
        check_unique(&row_ids)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value {v}")));
        }
        Ok(DataMatrix {
            row_ids: row_ids.into(),
            col_names,
            values,
        })
    }

    /// Convenience constructor from nested rows with synthesized column names.
    pub fn from_rows(row_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(n * m);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != m {
                return Err(Error::Ragged {
                    line: i + 1,
                    expected: m,
                    found: r.len(),
                });
            }
            flat.extend(r);
        }
        let values = Array2::from_shape_vec((n, m), flat)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        DataMatrix::new(row_ids, default_col_names(m), values)
    }

    /// Matrix with ids `row_0`, `row_1`, ...
    pub fn from_array(values: Array2<f64>) -> Result<Self> {
        let (n, m) = values.dim();
        DataMatrix::new(synth_ids(n), default_col_names(m), values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn row_ids(&self) -> &Arc<[String]> {
        &self.row_ids
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Checks the pipeline preconditions: nonnegative entries and strictly
    /// positive row sums.
    pub fn check_nonneg(&self) -> Result<()> {
        for (i, row) in self.values.outer_iter().enumerate() {
            let mut s = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if v < 0.0 {
                    return Err(Error::NegativeValue {
                        id: self.row_ids[i].clone(),
                        column: j + 1,
                        value: v,
                    });
                }
                s += v;
            }
            if s <= 0.0 {
                return Err(Error::ZeroRow(self.row_ids[i].clone()));
            }
        }
        Ok(())
    }

    /// Writes the matrix as a tab separated table with a header and an id
    /// column. Values are printed in shortest round-trip form, so
    /// [`load_matrix`] reproduces the matrix exactly.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        write!(w, "id").map_err(io)?;
        for c in &self.col_names {
            write!(w, "\t{c}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for (id, row) in self.row_ids.iter().zip(self.values.outer_iter()) {
            write!(w, "{id}").map_err(io)?;
            for v in row {
                write!(w, "\t{v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

fn synth_ids(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("row_{k}")).collect()
}

fn default_col_names(m: usize) -> Vec<String> {
    (0..m).map(|j| format!("col_{j}")).collect()
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

/// Incremental row-by-row builder shared by the two text formats.
struct TableBuilder {
    opts: LoadOptions,
    header: Option<Vec<String>>,
    ids: Vec<String>,
    flat: Vec<f64>,
    m: Option<usize>,
}

impl TableBuilder {
    fn new(opts: LoadOptions) -> Self {
        TableBuilder {
            opts,
            header: None,
            ids: Vec::new(),
            flat: Vec::new(),
            m: None,
        }
    }

    fn push<'a>(&mut self, line: usize, fields: impl Iterator<Item = &'a str>) -> Result<()> {
        let mut fields = fields.peekable();
        if fields.peek().is_none() {
            return Ok(());
        }
        if self.opts.has_header && self.header.is_none() {
            self.header = Some(fields.map(str::to_owned).collect());
            return Ok(());
        }
        let id = if self.opts.id_column {
            fields.next().map(str::to_owned)
        } else {
            None
        };
        let start = self.flat.len();
        let offset = usize::from(self.opts.id_column);
        for (k, text) in fields.enumerate() {
            let v: f64 = text
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    field: k + 1 + offset,
                    text: text.to_owned(),
                })?;
            self.flat.push(v);
        }
        let found = self.flat.len() - start;
        match self.m {
            None if found == 0 => {
                return Err(Error::Ragged {
                    line,
                    expected: 1,
                    found,
                })
            }
            None => self.m = Some(found),
            Some(m) if m != found => {
                return Err(Error::Ragged {
                    line,
                    expected: m,
                    found,
                })
            }
            Some(_) => {}
        }
        let id = id.unwrap_or_else(|| format!("row_{}", self.ids.len()));
        self.ids.push(id);
        Ok(())
    }

    fn finish(mut self) -> Result<DataMatrix> {
        let m = self.m.ok_or(Error::Empty)?;
        let n = self.ids.len();
        self.flat.shrink_to_fit();
        let col_names = match self.header.take() {
            // A header may or may not name the id column.
            Some(h) if h.len() == m + 1 && self.opts.id_column => h[1..].to_vec(),
            Some(h) if h.len() == m => h,
            _ => default_col_names(m),
        };
        let values = Array2::from_shape_vec((n, m), self.flat)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let d = DataMatrix::new(self.ids, col_names, values)?;
        if self.opts.nonneg {
            d.check_nonneg()?;
        }
        Ok(d)
    }
}

/// Reads a numeric table from disk.
///
/// Rows are streamed, so peak memory is the matrix itself plus one line.
/// Parse errors report the 1-based line and field number.
pub fn load_matrix(path: &Path, opts: LoadOptions) -> Result<DataMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(BufReader::with_capacity(1 << 20, file), opts, path)
}

/// Like [`load_matrix`] for any buffered reader; `origin` names the source
/// in I/O errors.
pub fn read_matrix<R: BufRead>(reader: R, opts: LoadOptions, origin: &Path) -> Result<DataMatrix> {
    let mut builder = TableBuilder::new(opts);
    match opts.format {
        Format::Tsv => {
            for (k, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| Error::io(origin, e))?;
                builder.push(k + 1, line.split_whitespace())?;
            }
        }
        Format::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(reader);
            let mut record = csv::StringRecord::new();
            while rdr.read_record(&mut record)? {
                let line = record.position().map_or(0, |p| p.line() as usize);
                if record.len() == 1 && record[0].is_empty() {
                    continue;
                }
                builder.push(line, record.iter())?;
            }
        }
    }
    builder.finish()
}

/// Row sums, column sums and the corresponding masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marginals {
    pub row_sums: Vec<f64>,
    pub col_sums: Vec<f64>,
    pub total: f64,
    pub row_masses: Vec<f64>,
    pub col_masses: Vec<f64>,
}

pub fn row_sums(d: &DataMatrix) -> Vec<f64> {
    d.values
        .axis_chunks_iter(Axis(0), CHUNK)
        .into_par_iter()
        .flat_map_iter(|block| block.outer_iter().map(|r| r.sum()).collect::<Vec<_>>())
        .collect()
}

pub fn col_sums(d: &DataMatrix) -> Vec<f64> {
    let partials: Vec<Vec<f64>> = d
        .values
        .axis_chunks_iter(Axis(0), CHUNK)
        .into_par_iter()
        .map(|block| block.sum_axis(Axis(0)).to_vec())
        .collect();
    let mut acc = vec![0.0; d.m()];
    for p in partials {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    acc
}

pub fn marginals(d: &DataMatrix) -> Result<Marginals> {
    let row_sums = row_sums(d);
    let col_sums = col_sums(d);
    let total = numeric::sum(&row_sums);
    if total == 0.0 || !total.is_finite() {
        return Err(Error::Degenerate(format!("grand total is {total}")));
    }
    let row_masses = row_sums.par_iter().map(|s| s / total).collect();
    let col_masses = col_sums.iter().map(|s| s / total).collect();
    Ok(Marginals {
        row_sums,
        col_sums,
        total,
        row_masses,
        col_masses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub median: f64,
}

/// Maximum, minimum, mean and median over all entries.
///
/// The median uses linear-time selection; for an even count it is the
/// midpoint of the two central order statistics.
pub fn summary_stats(d: &DataMatrix) -> SummaryStats {
    let flat: Vec<f64> = d.values.iter().copied().collect();
    summary_of(flat)
}

pub(crate) fn summary_of(mut v: Vec<f64>) -> SummaryStats {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = numeric::mean(&v);
    let median = median_in_place(&mut v);
    SummaryStats {
        max,
        min,
        mean,
        median,
    }
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (left, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lower + (upper - lower) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentWithNormal,
    NotNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalityReport {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// D'Agostino-Pearson K², referred to chi-squared with 2 degrees of freedom.
    pub statistic: f64,
    pub p_value: f64,
    pub verdict: Verdict,
}

/// D'Agostino-Pearson omnibus normality test.
///
/// The sample skewness is mapped to a normal score with D'Agostino's
/// transformation and the sample kurtosis with Anscombe and Glynn's; the sum
/// of their squares is approximately chi-squared with two degrees of
/// freedom, whose survival function is `exp(-x / 2)`.
pub fn normality_diagnostic(v: &[f64], alpha: f64) -> Result<NormalityReport> {
    let n = v.len();
    if n < 8 {
        return Err(Error::InvalidArgument(format!(
            "normality test needs at least 8 values, got {n}"
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "non-finite value in normality test input".into(),
        ));
    }
    let nf = n as f64;
    let mean = numeric::mean(v);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in v {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= f64::EPSILON * mean * mean {
        return Err(Error::ZeroVariance("normality test input is constant"));
    }
    let skewness = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2);

    let z_skew = {
        let y = skewness * ((nf + 1.0) * (nf + 3.0) / (6.0 * (nf - 2.0))).sqrt();
        let beta2 = 3.0 * (nf * nf + 27.0 * nf - 70.0) * (nf + 1.0) * (nf + 3.0)
            / ((nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf + 9.0));
        let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
        let delta = 1.0 / (0.5 * w2.ln()).sqrt();
        let alpha_s = (2.0 / (w2 - 1.0)).sqrt();
        let y = if y == 0.0 { 1.0 } else { y };
        let r = y / alpha_s;
        delta * (r + (r * r + 1.0).sqrt()).ln()
    };

    let z_kurt = {
        let expected = 3.0 * (nf - 1.0) / (nf + 1.0);
        let var = 24.0 * nf * (nf - 2.0) * (nf - 3.0)
            / ((nf + 1.0) * (nf + 1.0) * (nf + 3.0) * (nf + 5.0));
        let x = (kurtosis - expected) / var.sqrt();
        let sqrt_beta1 = 6.0 * (nf * nf - 5.0 * nf + 2.0) / ((nf + 7.0) * (nf + 9.0))
            * (6.0 * (nf + 3.0) * (nf + 5.0) / (nf * (nf - 2.0) * (nf - 3.0))).sqrt();
        let a = 6.0
            + 8.0 / sqrt_beta1
                * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
        let term1 = 1.0 - 2.0 / (9.0 * a);
        let denom = 1.0 + x * (2.0 / (a - 4.0)).sqrt();
        let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt();
        (term1 - term2) / (2.0 / (9.0 * a)).sqrt()
    };

    let statistic = z_skew * z_skew + z_kurt * z_kurt;
    let p_value = (-statistic / 2.0).exp().clamp(0.0, 1.0);
    let verdict = if p_value > alpha {
        Verdict::ConsistentWithNormal
    } else {
        Verdict::NotNormal
    };
    Ok(NormalityReport {
        skewness,
        excess_kurtosis: kurtosis - 3.0,
        statistic,
        p_value,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_row_without_header() {
        let f = write_tmp("a 1.0 2.0\n");
        let opts = LoadOptions {
            has_header: false,
            ..LoadOptions::default()
        };
        let d = load_matrix(f.path(), opts).unwrap();
        assert_eq!((d.n(), d.m()), (1, 2));
        assert_eq!(&d.row_ids()[..], &["a".to_string()]);
        assert_eq!(d.values(), &array![[1.0, 2.0]]);
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let f = write_tmp("id\tx\ty\nr1\t1\t2\nr2\t3\tabc\n");
        let err = load_matrix(f.path(), LoadOptions::default()).unwrap_err();
        match err {
            Error::Parse { line, field, text } => {
                assert_eq!((line, field, text.as_str()), (3, 3, "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let f = write_tmp("r1 1 2\nr2 3\n");
        let opts = LoadOptions {
            has_header: false,
            ..LoadOptions::default()
        };
        assert!(matches!(
            load_matrix(f.path(), opts),
            Err(Error::Ragged {
                line: 2,
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn synthesized_ids_and_scientific_notation() {
        let f = write_tmp("1e3,2.5E-1\n3,4\n");
        let opts = LoadOptions {
            format: Format::Csv,
            has_header: false,
            id_column: false,
            nonneg: true,
        };
        let d = load_matrix(f.path(), opts).unwrap();
        assert_eq!(
            &d.row_ids()[..],
            &["row_0".to_string(), "row_1".to_string()]
        );
        assert_eq!(d.values()[[0, 0]], 1000.0);
        assert_eq!(d.values()[[0, 1]], 0.25);
    }

    #[test]
    fn nonneg_violations_name_the_row() {
        let f = write_tmp("id a b\nx 1 2\ny -1 2\n");
        match load_matrix(f.path(), LoadOptions::default()) {
            Err(Error::NegativeValue { id, .. }) => assert_eq!(id, "y"),
            other => panic!("unexpected {other:?}"),
        }
        let f = write_tmp("id a b\nx 1 2\nz 0 0\n");
        match load_matrix(f.path(), LoadOptions::default()) {
            Err(Error::ZeroRow(id)) => assert_eq!(id, "z"),
            other => panic!("unexpected {other:?}"),
        }
        let opts = LoadOptions {
            nonneg: false,
            ..LoadOptions::default()
        };
        assert!(load_matrix(f.path(), opts).is_ok());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = write_tmp("id a\nx 1\nx 2\n");
        assert!(matches!(
            load_matrix(f.path(), LoadOptions::default()),
            Err(Error::DuplicateId(id)) if id == "x"
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err =
            load_matrix(Path::new("/nonexistent/table.tsv"), LoadOptions::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("/nonexistent/table.tsv"));
    }

    #[test]
    fn uniform_marginals() {
        let d = DataMatrix::from_array(array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let m = marginals(&d).unwrap();
        assert_eq!(m.row_sums, vec![2.0, 2.0]);
        assert_eq!(m.col_sums, vec![2.0, 2.0]);
        assert_eq!(m.total, 4.0);
        assert_eq!(m.row_masses, vec![0.5, 0.5]);
    }

    #[test]
    fn zero_total_is_degenerate() {
        let d = DataMatrix::from_array(array![[0.0, 0.0]]).unwrap();
        assert!(matches!(marginals(&d), Err(Error::Degenerate(_))));
    }

    #[test]
    fn small_summary() {
        let d = DataMatrix::from_array(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let s = summary_stats(&d);
        assert_eq!((s.max, s.min, s.mean, s.median), (4.0, 1.0, 2.5, 2.5));
        let d = DataMatrix::from_array(array![[5.0]]).unwrap();
        let s = summary_stats(&d);
        assert_eq!((s.max, s.min, s.mean, s.median), (5.0, 5.0, 5.0, 5.0));
    }

    // Reference values from scipy.stats.normaltest / skew / kurtosis on
    // v_i = sin(0.37 i) + 0.1 i.
    #[test]
    fn normality_matches_reference_values() {
        let cases = [
            (
                8,
                -0.9811141241903676,
                -0.42618914502696326,
                2.9169653713067314,
                0.23258891762862424,
            ),
            (
                20,
                0.6277483639230179,
                -0.1301595222206866,
                2.048377220139107,
                0.3590877073844878,
            ),
            (
                50,
                0.02033361501887482,
                -1.2139821726913174,
                12.44029968391035,
                0.001988947167203245,
            ),
        ];
        for (n, skew, kurt, stat, p) in cases {
            let v: Vec<f64> = (0..n)
                .map(|i| (i as f64 * 0.37).sin() + 0.1 * i as f64)
                .collect();
            let r = normality_diagnostic(&v, 0.05).unwrap();
            assert!((r.skewness - skew).abs() < 1e-12, "n={n}");
            assert!((r.excess_kurtosis - kurt).abs() < 1e-12, "n={n}");
            assert!((r.statistic - stat).abs() < 1e-9 * stat.max(1.0), "n={n}");
            assert!((r.p_value - p).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn normality_errors() {
        assert!(matches!(
            normality_diagnostic(&[3.0; 10], 0.05),
            Err(Error::ZeroVariance(_))
        ));
        assert!(normality_diagnostic(&[1.0, 2.0, 3.0], 0.05).is_err());
    }
}
