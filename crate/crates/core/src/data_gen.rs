//! Synthetic datasets: a polynomial signal plus i.i.d. noise at a target SNR.
//!
//! SNR is the linear ratio `Var(signal) / Var(noise)`. Exponential and Rayleigh noise are
//! left un-centred, so they bias the targets as well as spreading them.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const DATASET_FORMAT: &str = "polysweep-dataset/1";

/// Floor on the magnitude of the leading coefficient drawn by [`sample_coefficients`].
pub const LEADING_COEFF_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Gaussian,
    Exponential,
    Rayleigh,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 3] = [
        NoiseFamily::Gaussian,
        NoiseFamily::Exponential,
        NoiseFamily::Rayleigh,
    ];

    /// Noise variance divided by `scale²`.
    pub fn variance_factor(self) -> f64 {
        match self {
            NoiseFamily::Gaussian | NoiseFamily::Exponential => 1.0,
            NoiseFamily::Rayleigh => (4.0 - std::f64::consts::PI) / 2.0,
        }
    }

    /// Theoretical mean of a draw with the given scale.
    pub fn mean(self, scale: f64) -> f64 {
        match self {
            NoiseFamily::Gaussian => 0.0,
            NoiseFamily::Exponential => scale,
            NoiseFamily::Rayleigh => scale * (std::f64::consts::PI / 2.0).sqrt(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Exponential => "exponential",
            NoiseFamily::Rayleigh => "rayleigh",
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            NoiseFamily::Gaussian => 0,
            NoiseFamily::Exponential => 1,
            NoiseFamily::Rayleigh => 2,
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(NoiseFamily::Gaussian),
            "exponential" | "exp" => Ok(NoiseFamily::Exponential),
            "rayleigh" => Ok(NoiseFamily::Rayleigh),
            other => Err(Error::invalid("noise family", format!("unknown family {other:?}"))),
        }
    }
}

/// Target signal-to-noise ratio. `Noiseless` disables noise entirely.
///
/// Serialises as a plain number, or as the string `"inf"` for `Noiseless`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SnrRepr", into = "SnrRepr")]
pub enum Snr {
    Ratio(f64),
    Noiseless,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SnrRepr {
    Num(f64),
    Text(String),
}

impl Snr {
    pub fn ratio(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Snr::Ratio(value))
        } else if value == f64::INFINITY {
            Ok(Snr::Noiseless)
        } else {
            Err(Error::invalid("snr", format!("must be > 0, got {value}")))
        }
    }

    /// `f64::INFINITY` for the noiseless sentinel.
    pub fn value(self) -> f64 {
        match self {
            Snr::Ratio(r) => r,
            Snr::Noiseless => f64::INFINITY,
        }
    }

    pub(crate) fn key_bits(self) -> u64 {
        self.value().to_bits()
    }
}

impl TryFrom<SnrRepr> for Snr {
    type Error = Error;

    fn try_from(repr: SnrRepr) -> Result<Self> {
        match repr {
            SnrRepr::Num(v) => Snr::ratio(v),
            SnrRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Snr> for SnrRepr {
    fn from(snr: Snr) -> Self {
        match snr {
            Snr::Ratio(r) => SnrRepr::Num(r),
            Snr::Noiseless => SnrRepr::Text("inf".into()),
        }
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Ratio(r) => write!(f, "{r}"),
            Snr::Noiseless => f.write_str("inf"),
        }
    }
}

impl FromStr for Snr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "none" | "noiseless" => Ok(Snr::Noiseless),
            t => {
                let v: f64 = t
                    .parse()
                    .map_err(|_| Error::invalid("snr", format!("not a number: {s:?}")))?;
                Snr::ratio(v)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Interval { lo, hi })
        } else {
            Err(Error::invalid("interval", format!("need finite lo < hi, got [{lo}, {hi}]")))
        }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl Default for Interval {
    fn default() -> Self {
        Interval { lo: -1.0, hi: 1.0 }
    }
}

/// `p(x) = Σ a_i x^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialSpec {
    pub order: usize,
    /// `a_0 ..= a_n`.
    pub coefficients: Vec<f64>,
    pub coeff_seed: u64,
}

impl PolynomialSpec {
    /// Builds a spec from explicit coefficients; the order is `len - 1`.
    ///
    /// The zero polynomial is accepted only as the constant `[0.0]`; otherwise the leading
    /// coefficient must be nonzero.
    pub fn from_coefficients(coefficients: Vec<f64>, coeff_seed: u64) -> Result<Self> {
        let order = coefficients
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::invalid("coefficients", "need at least one coefficient"))?;
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coefficients", "non-finite coefficient"));
        }
        if order > 0 && coefficients[order] == 0.0 {
            return Err(Error::invalid(
                "coefficients",
                format!("leading coefficient a_{order} is zero"),
            ));
        }
        Ok(PolynomialSpec {
            order,
            coefficients,
            coeff_seed,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_polynomial(self, x)
    }
}

/// Horner evaluation.
pub fn eval_polynomial(spec: &PolynomialSpec, x: f64) -> f64 {
    spec.coefficients
        .iter()
        .rev()
        .fold(0.0, |acc, &a| acc.mul_add(x, a))
}

/// Coefficients i.i.d. uniform on [-1, 1], with the leading one redrawn until
/// `|a_n| >= 0.1`.
pub fn sample_coefficients(order: usize, seed: u64) -> PolynomialSpec {
    let mut rng = seed::rng(seed::derive(seed, &[seed::tag("coefficients")]));
    let mut coefficients: Vec<f64> = (0..=order).map(|_| rng.random_range(-1.0..=1.0)).collect();
    while coefficients[order].abs() < LEADING_COEFF_FLOOR {
        coefficients[order] = rng.random_range(-1.0..=1.0);
    }
    PolynomialSpec {
        order,
        coefficients,
        coeff_seed: seed,
    }
}

/// `count` i.i.d. draws: Gaussian(0, scale), Exponential(rate 1/scale), Rayleigh(scale).
pub fn sample_noise(family: NoiseFamily, scale: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid("scale", format!("must be > 0, got {scale}")));
    }
    if count == 0 {
        return Err(Error::invalid("count", "must be > 0"));
    }
    let mut rng = seed::rng(seed);
    let draws = match family {
        NoiseFamily::Gaussian => {
            let dist = Normal::new(0.0, scale).expect("scale validated");
            dist.sample_iter(&mut rng).take(count).collect()
        }
        NoiseFamily::Exponential => {
            let dist = Exp::new(1.0 / scale).expect("scale validated");
            dist.sample_iter(&mut rng).take(count).collect()
        }
        NoiseFamily::Rayleigh => (0..count)
            .map(|_| {
                // inverse CDF; 1 - u lies in (0, 1]
                let u: f64 = rng.random();
                scale * (-2.0 * (1.0 - u).ln()).sqrt()
            })
            .collect(),
    };
    Ok(draws)
}

/// Unbiased sample variance. `None` for fewer than two samples.
pub(crate) fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    Some(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0))
}

/// Scale for which `family` noise has variance `signal_variance / target_snr`.
pub fn scale_for_variance_ratio(signal_variance: f64, family: NoiseFamily, target_snr: f64) -> Result<f64> {
    if !(signal_variance.is_finite() && signal_variance > 0.0) {
        return Err(Error::ZeroVarianceSignal);
    }
    if !(target_snr.is_finite() && target_snr > 0.0) {
        return Err(Error::invalid("snr", format!("must be finite and > 0, got {target_snr}")));
    }
    Ok((signal_variance / target_snr / family.variance_factor()).sqrt())
}

pub fn resolve_scale_for_snr(signal: &[f64], family: NoiseFamily, target_snr: f64) -> Result<f64> {
    let var = sample_variance(signal).ok_or(Error::ZeroVarianceSignal)?;
    scale_for_variance_ratio(var, family, target_snr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub target_snr: Snr,
    /// Resolved during generation; `None` for noiseless data.
    pub scale: Option<f64>,
    pub noise_seed: u64,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, target_snr: Snr, noise_seed: u64) -> Self {
        NoiseSpec {
            family,
            target_snr,
            scale: None,
            noise_seed,
        }
    }
}

/// Row counts of the three contiguous blocks: train, test, then out-of-distribution test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: usize,
    pub test: usize,
    pub ood: usize,
}

impl Split {
    pub fn train_range(&self) -> Range<usize> {
        0..self.train
    }
    pub fn test_range(&self) -> Range<usize> {
        self.train..self.train + self.test
    }
    pub fn ood_range(&self) -> Range<usize> {
        self.train + self.test..self.total()
    }
    pub fn total(&self) -> usize {
        self.train + self.test + self.ood
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub clean_targets: Vec<f64>,
    pub noise_samples: Vec<f64>,
    pub noisy_targets: Vec<f64>,
    pub split: Split,
    pub domain: Interval,
    pub ood_domain: Option<Interval>,
    pub poly: PolynomialSpec,
    pub noise: NoiseSpec,
    pub seed: u64,
}

/// A borrowed view over one block of a dataset.
#[derive(Debug, Clone, Copy)]
pub struct Block<'a> {
    pub x: &'a [f64],
    pub clean: &'a [f64],
    pub noise: &'a [f64],
    pub noisy: &'a [f64],
}

impl Block<'_> {
    pub fn len(&self) -> usize {
        self.x.len()
    }
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

impl Dataset {
    fn block(&self, r: Range<usize>) -> Block<'_> {
        Block {
            x: &self.inputs[r.clone()],
            clean: &self.clean_targets[r.clone()],
            noise: &self.noise_samples[r.clone()],
            noisy: &self.noisy_targets[r],
        }
    }
    pub fn train(&self) -> Block<'_> {
        self.block(self.split.train_range())
    }
    pub fn test(&self) -> Block<'_> {
        self.block(self.split.test_range())
    }
    /// Empty when the dataset has no out-of-distribution block.
    pub fn ood(&self) -> Block<'_> {
        self.block(self.split.ood_range())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateOptions {
    /// In-distribution sample count (train + test).
    pub size: usize,
    pub domain: Interval,
    pub test_fraction: f64,
    pub ood_domain: Option<Interval>,
    pub seed: u64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            size: 12_000,
            domain: Interval::default(),
            test_fraction: 1.0 / 6.0,
            ood_domain: Some(Interval { lo: -1.5, hi: 1.5 }),
            seed: 0,
        }
    }
}

/// Pieces of `outer \ inner`.
fn interval_difference(outer: Interval, inner: Interval) -> Vec<Interval> {
    let mut pieces = Vec::with_capacity(2);
    if outer.lo < inner.lo {
        pieces.push(Interval {
            lo: outer.lo,
            hi: outer.hi.min(inner.lo),
        });
    }
    if outer.hi > inner.hi {
        pieces.push(Interval {
            lo: outer.lo.max(inner.hi),
            hi: outer.hi,
        });
    }
    pieces.retain(|p| p.hi > p.lo);
    pieces
}

fn sample_uniform_union<R: Rng>(rng: &mut R, pieces: &[Interval], count: usize) -> Vec<f64> {
    let total: f64 = pieces.iter().map(Interval::len).sum();
    (0..count)
        .map(|_| {
            let mut u = rng.random_range(0.0..total);
            for p in pieces {
                if u < p.len() {
                    return p.lo + u;
                }
                u -= p.len();
            }
            pieces[pieces.len() - 1].hi
        })
        .collect()
}

/// `noisy = p(x) + ε`. The noise scale is resolved against the train-split clean targets.
///
/// Inputs come from `opts.seed`; noise draws come from `noise.noise_seed`.
pub fn generate_dataset(poly: &PolynomialSpec, noise: &NoiseSpec, opts: &GenerateOptions) -> Result<Dataset> {
    if opts.size < 10 {
        return Err(Error::invalid("size", format!("must be >= 10, got {}", opts.size)));
    }
    if !(opts.test_fraction > 0.0 && opts.test_fraction < 1.0) {
        return Err(Error::invalid(
            "test_fraction",
            format!("must lie in (0, 1), got {}", opts.test_fraction),
        ));
    }
    Interval::new(opts.domain.lo, opts.domain.hi)?;

    let n_test = ((opts.size as f64 * opts.test_fraction).round() as usize).clamp(1, opts.size - 1);
    let n_train = opts.size - n_test;

    let mut rng = seed::rng(seed::derive(opts.seed, &[seed::tag("inputs")]));
    let mut inputs: Vec<f64> = (0..opts.size)
        .map(|_| rng.random_range(opts.domain.lo..opts.domain.hi))
        .collect();

    let mut n_ood = 0;
    if let Some(ood) = opts.ood_domain {
        Interval::new(ood.lo, ood.hi)?;
        let pieces = interval_difference(ood, opts.domain);
        if pieces.is_empty() {
            return Err(Error::invalid("ood_domain", "lies entirely inside the training domain"));
        }
        let mut rng = seed::rng(seed::derive(opts.seed, &[seed::tag("ood")]));
        n_ood = n_test;
        inputs.extend(sample_uniform_union(&mut rng, &pieces, n_ood));
    }

    let clean: Vec<f64> = inputs.iter().map(|&x| poly.eval(x)).collect();
    let total = inputs.len();

    let mut noise = noise.clone();
    let noise_samples = match noise.target_snr {
        Snr::Noiseless => {
            noise.scale = None;
            vec![0.0; total]
        }
        Snr::Ratio(r) => {
            let scale = resolve_scale_for_snr(&clean[..n_train], noise.family, r)?;
            noise.scale = Some(scale);
            sample_noise(noise.family, scale, total, noise.noise_seed)?
        }
    };
    let noisy: Vec<f64> = clean.iter().zip(&noise_samples).map(|(c, e)| c + e).collect();

    Ok(Dataset {
        inputs,
        clean_targets: clean,
        noise_samples,
        noisy_targets: noisy,
        split: Split {
            train: n_train,
            test: n_test,
            ood: n_ood,
        },
        domain: opts.domain,
        ood_domain: opts.ood_domain,
        poly: poly.clone(),
        noise,
        seed: opts.seed,
    })
}

/// `Var(clean) / Var(noise)` over the train split; `f64::INFINITY` when the noise is zero.
pub fn measured_snr(dataset: &Dataset) -> Result<f64> {
    let train = dataset.train();
    let signal = sample_variance(train.clean).ok_or(Error::Empty)?;
    let noise = sample_variance(train.noise).ok_or(Error::Empty)?;
    if noise == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(signal / noise)
    }
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

/// Writes the metadata header (`# key = value` lines) followed by the `x,clean,noise,noisy`
/// CSV body. Rows are ordered train, test, then OOD.
pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    let mut meta: Vec<(&str, String)> = vec![
        ("format", DATASET_FORMAT.to_string()),
        ("order", dataset.poly.order.to_string()),
        ("coefficients", join_f64(&dataset.poly.coefficients)),
        ("coeff_seed", dataset.poly.coeff_seed.to_string()),
        ("noise_family", dataset.noise.family.to_string()),
        ("target_snr", dataset.noise.target_snr.to_string()),
        (
            "noise_scale",
            dataset.noise.scale.map_or_else(|| "none".to_string(), |s| s.to_string()),
        ),
        ("noise_seed", dataset.noise.noise_seed.to_string()),
        ("seed", dataset.seed.to_string()),
        ("domain", format!("{} {}", dataset.domain.lo, dataset.domain.hi)),
    ];
    if let Some(ood) = dataset.ood_domain {
        meta.push(("ood_domain", format!("{} {}", ood.lo, ood.hi)));
    }
    meta.push(("train_count", dataset.split.train.to_string()));
    meta.push(("test_count", dataset.split.test.to_string()));
    meta.push(("ood_count", dataset.split.ood.to_string()));

    let io = |e| Error::io("<dataset>", e);
    for (k, v) in meta {
        writeln!(out, "# {k} = {v}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "clean", "noise", "noisy"])?;
    for i in 0..dataset.inputs.len() {
        w.write_record([
            dataset.inputs[i].to_string(),
            dataset.clean_targets[i].to_string(),
            dataset.noise_samples[i].to_string(),
            dataset.noisy_targets[i].to_string(),
        ])?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(dataset, std::io::BufWriter::new(file))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(std::io::BufReader::new(file), path)
}

pub fn read_dataset<R: BufRead>(reader: R, origin: &Path) -> Result<Dataset> {
    let corrupt = |line: usize, reason: String| Error::CorruptFile {
        path: origin.to_path_buf(),
        line,
        reason,
    };

    let mut meta = std::collections::BTreeMap::new();
    let mut body = String::new();
    let mut body_start = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if body.is_empty() {
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| corrupt(i + 1, "metadata line without '='".into()))?;
                meta.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
                continue;
            }
            body_start = i + 1;
        }
        body.push_str(&line);
        body.push('\n');
    }

    let get = |key: &str| -> Result<(usize, &str)> {
        meta.get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| corrupt(0, format!("missing metadata key {key:?}")))
    };
    fn parse<T: FromStr>(line: usize, key: &str, v: &str, origin: &Path) -> Result<T> {
        v.parse().map_err(|_| Error::CorruptFile {
            path: origin.to_path_buf(),
            line,
            reason: format!("bad value for {key}: {v:?}"),
        })
    }
    let floats = |key: &str| -> Result<Vec<f64>> {
        let (l, v) = get(key)?;
        v.split_whitespace().map(|t| parse(l, key, t, origin)).collect()
    };
    let interval = |key: &str| -> Result<Interval> {
        let v = floats(key)?;
        if v.len() != 2 {
            return Err(corrupt(get(key)?.0, format!("{key} needs two bounds")));
        }
        Interval::new(v[0], v[1])
    };
    let scalar = |key: &str| -> Result<u64> {
        let (l, v) = get(key)?;
        parse(l, key, v, origin)
    };

    let (l, format) = get("format")?;
    if format != DATASET_FORMAT {
        return Err(corrupt(l, format!("unsupported format {format:?}")));
    }
    let poly = PolynomialSpec::from_coefficients(floats("coefficients")?, scalar("coeff_seed")?)?;
    let (l, order) = get("order")?;
    if parse::<usize>(l, "order", order, origin)? != poly.order {
        return Err(corrupt(l, "order disagrees with coefficient count".into()));
    }
    let family: NoiseFamily = get("noise_family")?.1.parse()?;
    let target_snr: Snr = get("target_snr")?.1.parse()?;
    let scale = match get("noise_scale")? {
        (_, "none") => None,
        (l, v) => Some(parse(l, "noise_scale", v, origin)?),
    };
    let noise = NoiseSpec {
        family,
        target_snr,
        scale,
        noise_seed: scalar("noise_seed")?,
    };
    let ood_domain = if meta.contains_key("ood_domain") {
        Some(interval("ood_domain")?)
    } else {
        None
    };
    let split = Split {
        train: scalar("train_count")? as usize,
        test: scalar("test_count")? as usize,
        ood: scalar("ood_count")? as usize,
    };

    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "clean", "noise", "noisy"] {
        return Err(corrupt(body_start, format!("unexpected columns {headers:?}")));
    }
    let mut cols: [Vec<f64>; 4] = Default::default();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = body_start + row + 1;
        if rec.len() != 4 {
            return Err(corrupt(line, format!("expected 4 columns, got {}", rec.len())));
        }
        for (c, field) in rec.iter().enumerate() {
            cols[c].push(parse(line, "value", field, origin)?);
        }
    }
    let [inputs, clean_targets, noise_samples, noisy_targets] = cols;
    if inputs.len() != split.total() {
        return Err(corrupt(
            0,
            format!("row count {} does not match split total {}", inputs.len(), split.total()),
        ));
    }
    for i in 0..inputs.len() {
        if clean_targets[i] + noise_samples[i] != noisy_targets[i] {
            return Err(corrupt(body_start + i + 1, "noisy != clean + noise".into()));
        }
    }

    Ok(Dataset {
        inputs,
        clean_targets,
        noise_samples,
        noisy_targets,
        split,
        domain: interval("domain")?,
        ood_domain,
        poly,
        noise,
        seed: scalar("seed")?,
    })
}
