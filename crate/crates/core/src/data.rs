//! CSV ingestion, log returns, synthetic scenarios and report writers.
//!
//! Numbers are written in Rust's shortest round-trip form, so every value
//! re-parses to the identical `f64`. Lines starting with `#` are comments:
//! writers emit manifest metadata that way and the reader skips it.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::ParamTrajectory;
use crate::baselines::{simulate_garch, GarchParams};
use crate::distribution::{StudentTParams, GAUSSIAN_NU};
use crate::error::{Error, Result};
use crate::evaluation::{SweepReport, TailTable};

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    values: Vec<f64>,
    labels: Option<Vec<String>>,
    source_id: String,
}

impl PriceSeries {
    pub fn new(
        values: Vec<f64>,
        labels: Option<Vec<String>>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        check_labels(values.len(), labels.as_deref())?;
        if values.len() < 2 {
            return Err(Error::SeriesTooShort {
                len: values.len(),
                required: 2,
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::NonPositivePrice { index, value });
        }
        Ok(Self {
            values,
            labels,
            source_id: source_id.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    values: Vec<f64>,
    labels: Option<Vec<String>>,
    source_id: String,
}

impl ReturnSeries {
    pub fn new(
        values: Vec<f64>,
        labels: Option<Vec<String>>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        check_labels(values.len(), labels.as_deref())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateData(format!(
                "non-finite return at index {i}"
            )));
        }
        Ok(Self {
            values,
            labels,
            source_id: source_id.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_labels(n: usize, labels: Option<&[String]>) -> Result<()> {
    match labels {
        Some(l) if l.len() != n => Err(Error::LengthMismatch {
            expected: n,
            got: l.len(),
        }),
        _ => Ok(()),
    }
}

/// `x_t = ln(v_{t+1} / v_t)`; each return takes the later date label.
pub fn to_log_returns(prices: &PriceSeries) -> ReturnSeries {
    let values = prices
        .values
        .windows(2)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    let labels = prices.labels.as_ref().map(|l| l[1..].to_vec());
    ReturnSeries {
        values,
        labels,
        source_id: prices.source_id.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    /// Zero-based.
    Index(usize),
}

impl std::str::FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    /// All-digit strings are indices; anything else is a header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        })
    }
}

/// Which columns to read.
///
/// The value column defaults to the last column. Unless `no_date` is set, the
/// date column defaults to column 0 whenever that is not the value column.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnSpec {
    pub value: Option<ColumnRef>,
    pub date: Option<ColumnRef>,
    pub no_date: bool,
}

/// A parsed numeric column with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub values: Vec<f64>,
    pub labels: Option<Vec<String>>,
}

fn parse_error(line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_cell(cell: &str, line: u64, column: usize) -> Result<f64> {
    if cell.is_empty() {
        return Err(parse_error(line, column + 1, "empty cell"));
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(parse_error(
            line,
            column + 1,
            format!("non-finite value {cell:?}"),
        )),
        Err(_) => Err(parse_error(
            line,
            column + 1,
            format!("not a number: {cell:?}"),
        )),
    }
}

fn resolve(
    col: &ColumnRef,
    header: Option<&csv::StringRecord>,
    width: usize,
    line: u64,
) -> Result<usize> {
    match col {
        ColumnRef::Index(i) if *i < width => Ok(*i),
        ColumnRef::Index(i) => Err(parse_error(
            line,
            i + 1,
            format!("column index {i} out of range (width {width})"),
        )),
        ColumnRef::Name(name) => header
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| parse_error(line, 0, format!("no header column named {name:?}"))),
    }
}

/// Reads one numeric column (plus optional labels) from CSV text.
///
/// A first row whose value cell is not numeric is taken as the header.
pub fn read_column_from<R: Read>(reader: R, spec: &ColumnSpec) -> Result<RawColumn> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header: Option<csv::StringRecord> = None;
    let mut layout: Option<(usize, Option<usize>)> = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();

    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let (value_col, date_col) = match layout {
            Some(l) => l,
            None => {
                let width = record.len();
                let wants_header = matches!(spec.value, Some(ColumnRef::Name(_)))
                    || matches!(spec.date, Some(ColumnRef::Name(_)));
                let default_value = width - 1;
                let probe = match &spec.value {
                    Some(ColumnRef::Index(i)) => *i,
                    _ => default_value,
                };
                let looks_like_header =
                    record.get(probe).is_some_and(|c| c.parse::<f64>().is_err());
                if wants_header || looks_like_header {
                    header = Some(record.clone());
                }
                let value_col = match &spec.value {
                    Some(c) => resolve(c, header.as_ref(), width, line)?,
                    None => default_value,
                };
                let date_col = match (&spec.date, spec.no_date) {
                    (_, true) => None,
                    (Some(c), false) => Some(resolve(c, header.as_ref(), width, line)?),
                    (None, false) => (value_col != 0).then_some(0),
                };
                layout = Some((value_col, date_col));
                if header.is_some() {
                    continue;
                }
                (value_col, date_col)
            }
        };
        let cell = record
            .get(value_col)
            .ok_or_else(|| parse_error(line, value_col + 1, "missing value cell"))?;
        values.push(parse_cell(cell, line, value_col)?);
        if let Some(d) = date_col {
            let label = record
                .get(d)
                .ok_or_else(|| parse_error(line, d + 1, "missing date cell"))?;
            labels.push(label.to_string());
        }
    }
    let has_dates = matches!(layout, Some((_, Some(_))));
    Ok(RawColumn {
        values,
        labels: has_dates.then_some(labels),
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(Error::Io)
}

pub fn read_prices(path: &Path, spec: &ColumnSpec) -> Result<PriceSeries> {
    let raw = read_column_from(open(path)?, spec)?;
    PriceSeries::new(raw.values, raw.labels, path.display().to_string())
}

pub fn read_returns(path: &Path, spec: &ColumnSpec) -> Result<ReturnSeries> {
    let raw = read_column_from(open(path)?, spec)?;
    ReturnSeries::new(raw.values, raw.labels, path.display().to_string())
}

/// Formats a float so that it parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Column label for a ν value; the Gaussian limit is `inf`.
pub fn nu_label(nu: f64) -> String {
    if nu >= GAUSSIAN_NU {
        "inf".to_string()
    } else {
        format!("{nu}")
    }
}

fn write_comments<W: Write>(w: &mut W, lines: &[String]) -> io::Result<()> {
    for line in lines {
        for part in line.lines() {
            writeln!(w, "# {part}")?;
        }
    }
    Ok(())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Io(io::Error::other(format!("{other:?}"))),
    }
}

/// Writes `date,x` (or just `x` without labels).
pub fn write_returns<W: Write>(mut w: W, series: &ReturnSeries, manifest: &[String]) -> Result<()> {
    write_comments(&mut w, manifest)?;
    let mut out = csv_writer(w);
    let res: std::result::Result<(), csv::Error> = (|| {
        match series.labels() {
            Some(labels) => {
                out.write_record(["date", "x"])?;
                for (d, x) in labels.iter().zip(series.values()) {
                    out.write_record([d.as_str(), &fmt_f64(*x)])?;
                }
            }
            None => {
                out.write_record(["x"])?;
                for x in series.values() {
                    out.write_record([fmt_f64(*x)])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    })();
    res.map_err(csv_err)
}

/// Writes `t,date,x,mu,sigma,nu,log_density`, one row per record.
pub fn write_trajectory<W: Write>(
    mut w: W,
    traj: &ParamTrajectory,
    labels: Option<&[String]>,
    manifest: &[String],
) -> Result<()> {
    write_comments(&mut w, manifest)?;
    let mut out = csv_writer(w);
    let res: std::result::Result<(), csv::Error> = (|| {
        out.write_record(["t", "date", "x", "mu", "sigma", "nu", "log_density"])?;
        for r in &traj.records {
            let date = labels.and_then(|l| l.get(r.t)).map_or("", String::as_str);
            out.write_record([
                r.t.to_string(),
                date.to_string(),
                fmt_f64(r.x),
                fmt_f64(r.mu),
                fmt_f64(r.sigma),
                fmt_f64(r.nu),
                fmt_f64(r.log_density),
            ])?;
        }
        out.flush()?;
        Ok(())
    })();
    res.map_err(csv_err)
}

/// Writes `inv_nu,static_loglik,adaptive_loglik` after a metadata comment
/// block holding the GARCH row and per-row details.
pub fn write_sweep<W: Write>(mut w: W, report: &SweepReport, manifest: &[String]) -> Result<()> {
    let g = &report.garch_params;
    let mut meta = manifest.to_vec();
    meta.push(format!("series_id: {}", report.series_id));
    meta.push(format!("score_start: {}", report.score_start));
    meta.push(format!("n_scored: {}", report.n_scored));
    meta.push(format!("garch_loglik: {}", fmt_f64(report.garch_loglik)));
    meta.push(format!(
        "garch_params: omega={} alpha={} beta={} initial_var={}",
        fmt_f64(g.omega),
        fmt_f64(g.alpha),
        fmt_f64(g.beta),
        fmt_f64(g.initial_var)
    ));
    for row in &report.rows {
        if row.adaptive_p_sigma != report.config.p_sigma {
            meta.push(format!(
                "p_sigma_override: inv_nu={} p_sigma={}",
                fmt_f64(row.inv_nu),
                fmt_f64(row.adaptive_p_sigma)
            ));
        }
    }
    write_comments(&mut w, &meta)?;
    let mut out = csv_writer(w);
    let res: std::result::Result<(), csv::Error> = (|| {
        out.write_record(["inv_nu", "static_loglik", "adaptive_loglik"])?;
        for row in &report.rows {
            out.write_record([
                fmt_f64(row.inv_nu),
                fmt_f64(row.static_loglik),
                fmt_f64(row.adaptive_loglik),
            ])?;
        }
        out.flush()?;
        Ok(())
    })();
    res.map_err(csv_err)
}

/// Writes `k,observed,expected_nu_<label>...`.
pub fn write_tail_table<W: Write>(mut w: W, table: &TailTable, manifest: &[String]) -> Result<()> {
    let mut meta = manifest.to_vec();
    meta.push(format!("n_effective: {}", table.n_effective));
    meta.push(format!("normalization: {:?}", table.normalization).to_lowercase());
    write_comments(&mut w, &meta)?;
    let mut out = csv_writer(w);
    let res: std::result::Result<(), csv::Error> = (|| {
        let mut header = vec!["k".to_string(), "observed".to_string()];
        header.extend(
            table
                .expected_counts
                .iter()
                .map(|(nu, _)| format!("expected_nu_{}", nu_label(*nu))),
        );
        out.write_record(&header)?;
        for (i, k) in table.k_values.iter().enumerate() {
            let mut row = vec![k.to_string(), table.observed_counts[i].to_string()];
            row.extend(table.expected_counts.iter().map(|(_, c)| fmt_f64(c[i])));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    })();
    res.map_err(csv_err)
}

fn gaussian_nu() -> f64 {
    GAUSSIAN_NU
}

/// A block of i.i.d. t draws. Omitting `nu` gives Gaussian draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub n: usize,
    #[serde(default)]
    pub mu: f64,
    pub sigma: f64,
    #[serde(default = "gaussian_nu")]
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Segments { segments: Vec<Segment> },
    Garch { n: usize, params: GarchParams },
}

/// Draws a synthetic return series; identical `(scenario, seed)` give
/// identical output.
pub fn generate_synthetic(scenario: &Scenario, seed: u64) -> Result<ReturnSeries> {
    let values = match scenario {
        Scenario::Segments { segments } => {
            if segments.is_empty() {
                return Err(Error::InvalidScenario("no segments".into()));
            }
            let dists = segments
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    if s.n == 0 {
                        return Err(Error::InvalidScenario(format!("segment {i} has n = 0")));
                    }
                    StudentTParams::new(s.mu, s.sigma, s.nu)
                        .map_err(|e| Error::InvalidScenario(format!("segment {i}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            segments
                .iter()
                .zip(&dists)
                .flat_map(|(s, d)| d.sample_with(&mut rng, s.n))
                .collect()
        }
        Scenario::Garch { n, params } => {
            if *n == 0 {
                return Err(Error::InvalidScenario("GARCH path has n = 0".into()));
            }
            simulate_garch(params, *n, seed).map_err(|e| Error::InvalidScenario(e.to_string()))?
        }
    };
    ReturnSeries::new(values, None, format!("synthetic:seed={seed}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::abs_central_moment;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn read_str(s: &str, spec: &ColumnSpec) -> Result<RawColumn> {
        read_column_from(s.as_bytes(), spec)
    }

    #[test]
    fn log_returns_examples() {
        let p = PriceSeries::new(vec![1.0, E], None, "a").unwrap();
        assert_eq!(to_log_returns(&p).values(), &[1.0]);
        let p = PriceSeries::new(
            vec![2.0; 3],
            Some(vec!["a".into(), "b".into(), "c".into()]),
            "b",
        )
        .unwrap();
        let r = to_log_returns(&p);
        assert_eq!(r.values(), &[0.0, 0.0]);
        assert_eq!(r.labels().unwrap(), &["b".to_string(), "c".to_string()]);
        let p = PriceSeries::new((1..=2518).map(|i| i as f64).collect(), None, "c").unwrap();
        assert_eq!(to_log_returns(&p).len(), 2517);
    }

    #[test]
    fn price_validation() {
        assert!(matches!(
            PriceSeries::new(vec![1.0, 0.0, 2.0], None, "x"),
            Err(Error::NonPositivePrice { index: 1, .. })
        ));
        assert!(matches!(
            PriceSeries::new(vec![1.0], None, "x"),
            Err(Error::SeriesTooShort { .. })
        ));
        assert!(PriceSeries::new(vec![1.0, 2.0], Some(vec!["a".into()]), "x").is_err());
    }

    #[test]
    fn reads_dated_prices_with_header() {
        let raw = read_str(
            "date,close\n2001-01-02,10.5\r\n2001-01-03,11\n",
            &ColumnSpec::default(),
        )
        .unwrap();
        assert_eq!(raw.values, vec![10.5, 11.0]);
        assert_eq!(raw.labels.unwrap(), vec!["2001-01-02", "2001-01-03"]);
    }

    #[test]
    fn reads_headerless_single_column() {
        let raw = read_str("1.5\n-2\n3e-3\n", &ColumnSpec::default()).unwrap();
        assert_eq!(raw.values, vec![1.5, -2.0, 3e-3]);
        assert!(raw.labels.is_none());
    }

    #[test]
    fn selects_columns_by_name_and_index() {
        let text = "# comment\ndate,open,close\nd1,1,2\nd2,3,4\n";
        let by_name = ColumnSpec {
            value: Some(ColumnRef::Name("open".into())),
            ..Default::default()
        };
        assert_eq!(read_str(text, &by_name).unwrap().values, vec![1.0, 3.0]);
        let by_index = ColumnSpec {
            value: Some(ColumnRef::Index(2)),
            no_date: true,
            ..Default::default()
        };
        let raw = read_str(text, &by_index).unwrap();
        assert_eq!(raw.values, vec![2.0, 4.0]);
        assert!(raw.labels.is_none());
        let missing = ColumnSpec {
            value: Some(ColumnRef::Name("vol".into())),
            ..Default::default()
        };
        assert!(read_str(text, &missing).is_err());
    }

    #[test]
    fn bad_cell_reports_line() {
        let text = "v\n1\n2\n3\n4\n5\nabc\n";
        match read_str(text, &ColumnSpec::default()) {
            Err(Error::Parse {
                line: 7, column: 1, ..
            }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_str("1\nNaN\n", &ColumnSpec::default()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            read_str("d,v\na,1\nb,\n", &ColumnSpec::default()),
            Err(Error::Parse {
                line: 3,
                column: 2,
                ..
            })
        ));
    }

    #[test]
    fn synthetic_segments() {
        let one = Scenario::Segments {
            segments: vec![Segment {
                n: 100,
                mu: 0.0,
                sigma: 1.0,
                nu: GAUSSIAN_NU,
            }],
        };
        let a = generate_synthetic(&one, 3).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, generate_synthetic(&one, 3).unwrap());
        assert_ne!(a.values(), generate_synthetic(&one, 4).unwrap().values());
        let two = Scenario::Segments {
            segments: vec![
                Segment {
                    n: 70,
                    mu: 0.0,
                    sigma: 1.0,
                    nu: 5.0,
                },
                Segment {
                    n: 30,
                    mu: 0.0,
                    sigma: 3.0,
                    nu: 5.0,
                },
            ],
        };
        assert_eq!(generate_synthetic(&two, 1).unwrap().len(), 100);
        assert!(generate_synthetic(&Scenario::Segments { segments: vec![] }, 1).is_err());
        let bad = Scenario::Segments {
            segments: vec![Segment {
                n: 5,
                mu: 0.0,
                sigma: -1.0,
                nu: 5.0,
            }],
        };
        assert!(matches!(
            generate_synthetic(&bad, 1),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn synthetic_first_moment() {
        let s = Scenario::Segments {
            segments: vec![Segment {
                n: 1_000_000,
                mu: 0.0,
                sigma: 1.0,
                nu: 5.0,
            }],
        };
        let xs = generate_synthetic(&s, 11).unwrap();
        let m1 = xs.values().iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64;
        let expected = abs_central_moment(5.0, 1.0).unwrap();
        assert!((m1 / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn scenario_json_defaults() {
        let s: Scenario =
            serde_json::from_str(r#"{"kind":"segments","segments":[{"n":5,"sigma":2.0}]}"#)
                .unwrap();
        assert_eq!(
            s,
            Scenario::Segments {
                segments: vec![Segment {
                    n: 5,
                    mu: 0.0,
                    sigma: 2.0,
                    nu: GAUSSIAN_NU
                }]
            }
        );
    }

    #[test]
    fn nu_labels() {
        assert_eq!(nu_label(3.0), "3");
        assert_eq!(nu_label(2.5), "2.5");
        assert_eq!(nu_label(GAUSSIAN_NU), "inf");
    }

    proptest! {
        #[test]
        fn returns_round_trip_bit_exact(xs in prop::collection::vec(-1e3f64..1e3, 1..50), tiny in -1e-300f64..1e-300) {
            let mut xs = xs;
            xs.push(tiny);
            let labels: Vec<String> = (0..xs.len()).map(|i| format!("d{i}")).collect();
            let series = ReturnSeries::new(xs.clone(), Some(labels.clone()), "p").unwrap();
            let mut buf = Vec::new();
            write_returns(&mut buf, &series, &["manifest".to_string()]).unwrap();
            let raw = read_column_from(buf.as_slice(), &ColumnSpec::default()).unwrap();
            prop_assert_eq!(raw.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            xs.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(raw.labels.unwrap(), labels);
        }

        #[test]
        fn cumulative_exp_round_trip(xs in prop::collection::vec(-0.2f64..0.2, 1..200)) {
            let mut prices = vec![100.0];
            for x in &xs {
                let last = *prices.last().unwrap();
                prices.push(last * x.exp());
            }
            let r = to_log_returns(&PriceSeries::new(prices, None, "p").unwrap());
            for (a, b) in r.values().iter().zip(&xs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
