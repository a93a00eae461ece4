//! Metric matrices and curves over grid dimensions, aggregated by median over repeats.
//!
//! Axis values are the distinct values of that dimension across *all* supplied results,
//! so a cell missing under the filter is reported instead of silently shrinking the axis.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use super::{Cell, RunResult};
use crate::data_gen::{NoiseFamily, Snr};
use crate::error::{Error, Result};

/// Token written for cells whose runs all failed.
pub const NA: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dimension {
    Depth,
    Width,
    Ensemble,
    Order,
    Family,
    Snr,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Depth,
        Dimension::Width,
        Dimension::Ensemble,
        Dimension::Order,
        Dimension::Family,
        Dimension::Snr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Depth => "depth",
            Dimension::Width => "width",
            Dimension::Ensemble => "ensemble",
            Dimension::Order => "order",
            Dimension::Family => "family",
            Dimension::Snr => "snr",
        }
    }

    pub fn value_of(self, cell: &Cell) -> DimValue {
        match self {
            Dimension::Depth => DimValue::Int(cell.depth),
            Dimension::Width => DimValue::Int(cell.width),
            Dimension::Ensemble => DimValue::Int(cell.ensemble_size),
            Dimension::Order => DimValue::Int(cell.order),
            Dimension::Family => DimValue::Family(cell.family),
            Dimension::Snr => DimValue::Snr(cell.snr),
        }
    }

    fn parse_value(self, s: &str) -> Result<DimValue> {
        match self {
            Dimension::Family => Ok(DimValue::Family(s.parse()?)),
            Dimension::Snr => Ok(DimValue::Snr(s.parse()?)),
            _ => s
                .trim()
                .parse()
                .map(DimValue::Int)
                .map_err(|_| Error::invalid("filter", format!("{} needs an integer, got {s:?}", self.name()))),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "depth" | "d" => Ok(Dimension::Depth),
            "width" | "w" => Ok(Dimension::Width),
            "ensemble" | "ensemble_size" | "m" => Ok(Dimension::Ensemble),
            "order" | "n" => Ok(Dimension::Order),
            "family" | "noise" => Ok(Dimension::Family),
            "snr" => Ok(Dimension::Snr),
            other => Err(Error::invalid("dimension", format!("unknown dimension {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimValue {
    Int(usize),
    Family(NoiseFamily),
    Snr(Snr),
}

impl DimValue {
    fn total_cmp(&self, other: &DimValue) -> std::cmp::Ordering {
        match (self, other) {
            (DimValue::Int(a), DimValue::Int(b)) => a.cmp(b),
            (DimValue::Family(a), DimValue::Family(b)) => a.cmp(b),
            (DimValue::Snr(a), DimValue::Snr(b)) => a.value().total_cmp(&b.value()),
            _ => std::cmp::Ordering::Equal,
        }
    }

    pub fn as_int(&self) -> Option<usize> {
        match self {
            DimValue::Int(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for DimValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimValue::Int(v) => write!(f, "{v}"),
            DimValue::Family(v) => write!(f, "{v}"),
            DimValue::Snr(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricSplit {
    Test,
    Ood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    L1,
    L2,
    L2Raw,
    Rmse,
    Bd,
}

/// A metric of one split, named `l1`, `bd`, `ood_l1`, `test_rmse`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Metric {
    pub split: MetricSplit,
    pub kind: MetricKind,
}

impl Metric {
    pub const L1: Metric = Metric {
        split: MetricSplit::Test,
        kind: MetricKind::L1,
    };
    pub const BD: Metric = Metric {
        split: MetricSplit::Test,
        kind: MetricKind::Bd,
    };

    /// `None` for failed runs, missing splits and undefined distances.
    pub fn extract(&self, result: &RunResult) -> Option<f64> {
        if result.failed {
            return None;
        }
        let rec = match self.split {
            MetricSplit::Test => result.test.as_ref(),
            MetricSplit::Ood => result.ood.as_ref(),
        }?;
        match self.kind {
            MetricKind::L1 => Some(rec.l1),
            MetricKind::L2 => Some(rec.l2),
            MetricKind::L2Raw => Some(rec.l2_raw),
            MetricKind::Rmse => Some(rec.rmse),
            MetricKind::Bd => rec.bd,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            MetricKind::L1 => "l1",
            MetricKind::L2 => "l2",
            MetricKind::L2Raw => "l2_raw",
            MetricKind::Rmse => "rmse",
            MetricKind::Bd => "bd",
        };
        match self.split {
            MetricSplit::Test => f.write_str(kind),
            MetricSplit::Ood => write!(f, "ood_{kind}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (split, rest) = if let Some(r) = s.strip_prefix("ood_") {
            (MetricSplit::Ood, r)
        } else if let Some(r) = s.strip_prefix("test_") {
            (MetricSplit::Test, r)
        } else {
            (MetricSplit::Test, s.as_str())
        };
        let kind = match rest {
            "l1" => MetricKind::L1,
            "l2" => MetricKind::L2,
            "l2_raw" => MetricKind::L2Raw,
            "rmse" => MetricKind::Rmse,
            "bd" => MetricKind::Bd,
            _ => return Err(Error::invalid("metric", format!("unknown metric {s:?}"))),
        };
        Ok(Metric { split, kind })
    }
}

/// Fixed values for some dimensions. Parses from `order=5,family=gaussian,snr=20`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellFilter {
    pins: Vec<(Dimension, DimValue)>,
}

impl CellFilter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pin(mut self, dim: Dimension, value: DimValue) -> Self {
        self.pins.retain(|(d, _)| *d != dim);
        self.pins.push((dim, value));
        self
    }

    pub fn get(&self, dim: Dimension) -> Option<DimValue> {
        self.pins.iter().find(|(d, _)| *d == dim).map(|(_, v)| *v)
    }

    pub fn matches(&self, cell: &Cell) -> bool {
        self.pins.iter().all(|(d, v)| d.value_of(cell) == *v)
    }

    fn require_pinned(&self, free: &[Dimension]) -> Result<()> {
        let unpinned: Vec<&str> = Dimension::ALL
            .iter()
            .filter(|d| !free.contains(d) && self.get(**d).is_none())
            .map(|d| d.name())
            .collect();
        if unpinned.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid("filter", format!("must pin {}", unpinned.join(", "))))
        }
    }

    fn without(&self, dims: &[Dimension]) -> CellFilter {
        CellFilter {
            pins: self.pins.iter().filter(|(d, _)| !dims.contains(d)).copied().collect(),
        }
    }
}

impl FromStr for CellFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut f = CellFilter::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid("filter", format!("{part:?} is not key=value")))?;
            let dim: Dimension = k.parse()?;
            f = f.pin(dim, dim.parse_value(v)?);
        }
        Ok(f)
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn axis_values(results: &[RunResult], dim: Dimension) -> Vec<DimValue> {
    let mut vals: Vec<DimValue> = Vec::new();
    for r in results {
        let v = dim.value_of(&r.cell);
        if !vals.contains(&v) {
            vals.push(v);
        }
    }
    vals.sort_by(DimValue::total_cmp);
    vals
}

/// Per-axis-value medians; `Err(MissingCells)` when some combination has no record.
fn aggregate(
    results: &[RunResult],
    axes: &[(Dimension, &[DimValue])],
    metric: Metric,
    filter: &CellFilter,
) -> Result<Vec<Option<f64>>> {
    let shape: Vec<usize> = axes.iter().map(|(_, v)| v.len()).collect();
    let total: usize = shape.iter().product();
    let mut present = vec![false; total];
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); total];
    let dims: Vec<Dimension> = axes.iter().map(|(d, _)| *d).collect();
    let base = filter.without(&dims);
    for r in results.iter().filter(|r| base.matches(&r.cell)) {
        let mut idx = 0;
        let mut ok = true;
        for (dim, values) in axes {
            match values.iter().position(|v| *v == dim.value_of(&r.cell)) {
                Some(p) => idx = idx * values.len() + p,
                None => ok = false,
            }
        }
        if !ok {
            continue;
        }
        present[idx] = true;
        if let Some(v) = metric.extract(r) {
            buckets[idx].push(v);
        }
    }
    let missing: Vec<String> = (0..total)
        .filter(|&i| !present[i])
        .map(|i| {
            let mut rem = i;
            let mut parts = Vec::with_capacity(axes.len());
            for (dim, values) in axes.iter().rev() {
                parts.push(format!("{}={}", dim, values[rem % values.len()]));
                rem /= values.len();
            }
            parts.reverse();
            parts.join(" ")
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing));
    }
    Ok(buckets.iter_mut().map(|b| median(b)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub x_axis: Dimension,
    pub y_axis: Dimension,
    pub metric: Metric,
    pub x_values: Vec<DimValue>,
    pub y_values: Vec<DimValue>,
    /// `cells[row][col]`, rows follow `y_values`; `None` where every repeat failed.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl Landscape {
    pub fn get(&self, x: DimValue, y: DimValue) -> Option<f64> {
        let c = self.x_values.iter().position(|v| *v == x)?;
        let r = self.y_values.iter().position(|v| *v == y)?;
        self.cells[r][c]
    }

    pub fn transpose(&self) -> Landscape {
        let cells = (0..self.x_values.len())
            .map(|c| self.cells.iter().map(|row| row[c]).collect())
            .collect();
        Landscape {
            x_axis: self.y_axis,
            y_axis: self.x_axis,
            metric: self.metric,
            x_values: self.y_values.clone(),
            y_values: self.x_values.clone(),
            cells,
        }
    }

    /// First row: `<metric>:<y>\<x>` corner label then x values; first column: y values.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![format!("{}:{}\\{}", self.metric, self.y_axis, self.x_axis)];
        header.extend(self.x_values.iter().map(|v| v.to_string()));
        w.write_record(&header)?;
        for (y, row) in self.y_values.iter().zip(&self.cells) {
            let mut rec = vec![y.to_string()];
            rec.extend(row.iter().map(|c| c.map_or_else(|| NA.to_string(), |v| v.to_string())));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<landscape>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf8")
    }
}

/// Dense `y × x` matrix of median-over-repeats metric values.
///
/// `filter` must pin every dimension other than the two axes.
pub fn landscape_export(
    results: &[RunResult],
    x_axis: Dimension,
    y_axis: Dimension,
    metric: Metric,
    filter: &CellFilter,
) -> Result<Landscape> {
    if x_axis == y_axis {
        return Err(Error::invalid("axes", "x and y must differ"));
    }
    filter.require_pinned(&[x_axis, y_axis])?;
    let xs = axis_values(results, x_axis);
    let ys = axis_values(results, y_axis);
    if xs.is_empty() {
        return Err(Error::Empty);
    }
    let flat = aggregate(results, &[(y_axis, &ys), (x_axis, &xs)], metric, filter)?;
    let cells = flat.chunks(xs.len()).map(<[_]>::to_vec).collect();
    Ok(Landscape {
        x_axis,
        y_axis,
        metric,
        x_values: xs,
        y_values: ys,
        cells,
    })
}

/// Median metric along one dimension, every other dimension pinned by `filter`.
pub fn curve(
    results: &[RunResult],
    axis: Dimension,
    metric: Metric,
    filter: &CellFilter,
) -> Result<Vec<(DimValue, Option<f64>)>> {
    filter.require_pinned(&[axis])?;
    let xs = axis_values(results, axis);
    if xs.is_empty() {
        return Err(Error::Empty);
    }
    let vals = aggregate(results, &[(axis, &xs)], metric, filter)?;
    Ok(xs.into_iter().zip(vals).collect())
}

/// Depth minimising the median metric at `width`; ties go to the smallest depth.
pub fn optimal_depth(results: &[RunResult], width: usize, metric: Metric, filter: &CellFilter) -> Result<(usize, f64)> {
    let filter = filter.clone().pin(Dimension::Width, DimValue::Int(width));
    let series = curve(results, Dimension::Depth, metric, &filter)?;
    let mut best: Option<(usize, f64)> = None;
    for (d, v) in series {
        let (Some(d), Some(v)) = (d.as_int(), v) else { continue };
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((d, v));
        }
    }
    best.ok_or_else(|| Error::invalid("results", format!("every run at width {width} failed")))
}

/// Median metric per ensemble size, ascending in `m`.
pub fn ensemble_curve(results: &[RunResult], metric: Metric, filter: &CellFilter) -> Result<Vec<(usize, Option<f64>)>> {
    Ok(curve(results, Dimension::Ensemble, metric, filter)?
        .into_iter()
        .map(|(m, v)| (m.as_int().expect("ensemble sizes are integers"), v))
        .collect())
}
