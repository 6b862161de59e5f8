//! End-to-end commands: load, seriate, encode, quantize, and write results.
//!
//! Every command takes a [`PipelineConfig`] and writes plain CSV or JSON
//! files into its output directory. Identical configurations produce
//! byte-identical files.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::baire::{build_hierarchy, cluster_members, max_depth, partition_table, BaireHierarchy};
use crate::encoding::{
    encode_with_chain, histogram_report, EncodedSeriation, Histogram, Provenance, TransformStep,
    DEFAULT_CHAIN,
};
use crate::ingest::{
    load_matrix, marginals, normality_diagnostic, summary_stats, DataMatrix, LoadOptions,
    Marginals, NormalityReport, SummaryStats, Verdict,
};
use crate::numeric::clamp_unit;
use crate::projection::{
    raw_projection, rescale_unit, AxisStream, CorrelationCurve, Correlator, Seriation,
    SeriationKind, StreamingConsensus,
};
use crate::validate::{
    cluster_summaries, run_iris_experiment, run_uniform_experiment, separation_report,
    ExperimentOptions,
};
use crate::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BAIRECLUST_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SeriationSource {
    RowMass,
    RowSum,
    /// Mean of `projections` uniform random projections.
    Consensus {
        projections: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub load: LoadOptions,
    pub source: SeriationSource,
    /// Average raw projections instead of projections rescaled to `[0, 1)`.
    pub consensus_raw: bool,
    pub encode: bool,
    pub chain: Vec<TransformStep>,
    pub base: u32,
    pub depth: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Significance level of the normality diagnostics.
    pub alpha: f64,
    pub bins: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            load: LoadOptions::default(),
            source: SeriationSource::RowMass,
            consensus_raw: false,
            encode: true,
            chain: DEFAULT_CHAIN.to_vec(),
            base: 10,
            depth: 3,
            seed: 0,
            out_dir: PathBuf::from("."),
            alpha: 0.05,
            bins: 50,
        }
    }
}

/// Keys accepted by [`PipelineConfig::set`] and in config files.
pub const CONFIG_KEYS: &[&str] = &[
    "input",
    "format",
    "header",
    "id_column",
    "source",
    "projections",
    "consensus_raw",
    "encode",
    "chain",
    "base",
    "depth",
    "seed",
    "out_dir",
    "alpha",
    "bins",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidArgument(format!(
            "invalid value `{value}` for `{key}`, expected true or false"
        ))),
    }
}

impl PipelineConfig {
    /// Sets one option from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "input" => self.input = Some(PathBuf::from(value)),
            "format" => self.load.format = value.parse()?,
            "header" => self.load.has_header = parse_bool(key, value)?,
            "id_column" => self.load.id_column = parse_bool(key, value)?,
            "source" => {
                self.source = match value {
                    "row_mass" => SeriationSource::RowMass,
                    "row_sum" => SeriationSource::RowSum,
                    "consensus" => SeriationSource::Consensus {
                        projections: self.projections().unwrap_or(100),
                    },
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "unknown seriation source `{other}` (row_mass, row_sum, consensus)"
                        )))
                    }
                }
            }
            "projections" => {
                let k: usize = parse_value(key, value)?;
                if k == 0 {
                    return Err(Error::InvalidArgument(
                        "projections must be at least 1".into(),
                    ));
                }
                self.source = SeriationSource::Consensus { projections: k };
            }
            "consensus_raw" => self.consensus_raw = parse_bool(key, value)?,
            "encode" => self.encode = parse_bool(key, value)?,
            "chain" => {
                self.chain = value
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<Vec<TransformStep>>>()?
            }
            "base" => self.base = parse_value(key, value)?,
            "depth" => self.depth = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "alpha" => self.alpha = parse_value(key, value)?,
            "bins" => self.bins = parse_value(key, value)?,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown option `{other}`; known options: {}",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and lines starting with `#`
    /// are ignored.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("config line {}: expected key=value", k + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_str(&text)
    }

    fn projections(&self) -> Option<usize> {
        match self.source {
            SeriationSource::Consensus { projections } => Some(projections),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base < 2 {
            return Err(Error::InvalidArgument(format!(
                "base must be >= 2, got {}",
                self.base
            )));
        }
        let max = max_depth(self.base);
        if self.depth == 0 || self.depth > max {
            return Err(Error::DepthTooLarge {
                depth: self.depth,
                max,
                base: self.base,
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.bins == 0 {
            return Err(Error::InvalidArgument("bins must be at least 1".into()));
        }
        if self.projections() == Some(0) {
            return Err(Error::InvalidArgument(
                "projections must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("no input file given".into()))
    }

    fn load(&self) -> Result<DataMatrix> {
        self.validate()?;
        load_matrix(self.input()?, self.load)
    }
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::with_capacity(1 << 20, file);
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_with(name, |w| w.write_all(text.as_bytes()))
    }

    fn histogram(&mut self, name: &str, h: &Histogram) -> Result<()> {
        self.write_with(name, |w| {
            writeln!(w, "bin_low,bin_high,count")?;
            for (b, c) in h.counts.iter().enumerate() {
                writeln!(w, "{},{},{}", h.edges[b], h.edges[b + 1], c)?;
            }
            Ok(())
        })
    }
}

fn write_id_values(
    w: &mut impl Write,
    header: &str,
    ids: &[String],
    v: &[f64],
) -> std::io::Result<()> {
    writeln!(w, "{header}")?;
    for (id, x) in ids.iter().zip(v) {
        writeln!(w, "{id},{x}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremes {
    pub min: f64,
    pub max: f64,
}

impl Extremes {
    fn of(v: &[f64]) -> Self {
        Extremes {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalitySection {
    pub alpha: f64,
    /// `None` with fewer than eight values.
    pub column_sums: Option<NormalityReport>,
    /// `None` with fewer than eight rows or a zero row.
    pub log_row_masses: Option<NormalityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub n: usize,
    pub m: usize,
    pub summary: SummaryStats,
    pub total: f64,
    pub row_mass: Extremes,
    pub col_mass: Extremes,
    pub normality: NormalitySection,
}

fn optional_normality(v: &[f64], alpha: f64) -> Result<Option<NormalityReport>> {
    if v.len() < 8 || v.iter().any(|x| !x.is_finite()) {
        return Ok(None);
    }
    match normality_diagnostic(v, alpha) {
        Ok(r) => Ok(Some(r)),
        Err(Error::ZeroVariance(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn stats_report(d: &DataMatrix, m: &Marginals, alpha: f64) -> Result<StatsReport> {
    let log_masses: Vec<f64> = m.row_masses.iter().map(|x| x.ln()).collect();
    Ok(StatsReport {
        n: d.n(),
        m: d.m(),
        summary: summary_stats(d),
        total: m.total,
        row_mass: Extremes::of(&m.row_masses),
        col_mass: Extremes::of(&m.col_masses),
        normality: NormalitySection {
            alpha,
            column_sums: optional_normality(&m.col_sums, alpha)?,
            log_row_masses: optional_normality(&log_masses, alpha)?,
        },
    })
}

/// Writes `stats.json` and `marginals.csv`.
pub fn cmd_stats(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let d = cfg.load()?;
    let m = marginals(&d)?;
    let report = stats_report(&d, &m, cfg.alpha)?;
    let mut out = Output::new(&cfg.out_dir)?;
    out.json("stats.json", &report)?;
    out.write_with("marginals.csv", |w| {
        writeln!(w, "id,row_sum,row_mass")?;
        for ((id, s), f) in d.row_ids().iter().zip(&m.row_sums).zip(&m.row_masses) {
            writeln!(w, "{id},{s},{f}")?;
        }
        Ok(())
    })?;
    Ok(out.written)
}

/// Mean of `k` projections drawn one axis at a time, so memory stays
/// `O(n)`. With a `reference`, also returns its correlation with the running
/// mean after each projection.
pub fn streaming_consensus(
    d: &DataMatrix,
    k: usize,
    seed: u64,
    rescale: bool,
    reference: Option<&[f64]>,
) -> Result<(Seriation, Option<CorrelationCurve>)> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "projections must be at least 1".into(),
        ));
    }
    let correlator = reference.map(Correlator::new).transpose()?;
    let mut curve = correlator.as_ref().map(|_| CorrelationCurve {
        t: Vec::with_capacity(k),
        corr: Vec::with_capacity(k),
    });
    let mut acc = StreamingConsensus::new(d.n());
    for (t, axis) in AxisStream::new(d.m(), seed).take(k).enumerate() {
        let mut p = raw_projection(d, &axis)?;
        if rescale {
            rescale_unit(&mut p);
        }
        acc.push(&p);
        if let (Some(c), Some(curve)) = (&correlator, &mut curve) {
            curve.t.push(t + 1);
            curve.corr.push(c.corr(&acc.mean())?);
        }
    }
    let mut values = acc.mean();
    if rescale {
        values.iter_mut().for_each(|v| *v = clamp_unit(*v));
    }
    Ok((
        Seriation {
            ids: d.row_ids().clone(),
            values,
            kind: SeriationKind::ConsensusProjection,
        },
        curve,
    ))
}

/// Seriation chosen by `cfg.source`, plus the correlation curve against
/// the row sums when `with_curve` is set and the source is a consensus.
pub fn seriate(
    d: &DataMatrix,
    m: &Marginals,
    cfg: &PipelineConfig,
    with_curve: bool,
) -> Result<(Seriation, Option<CorrelationCurve>)> {
    match cfg.source {
        SeriationSource::RowMass => Ok((Seriation::row_mass(d, m), None)),
        SeriationSource::RowSum => Ok((Seriation::row_sum(d, m), None)),
        SeriationSource::Consensus { projections } => streaming_consensus(
            d,
            projections,
            cfg.seed,
            !cfg.consensus_raw,
            with_curve.then_some(m.row_sums.as_slice()),
        ),
    }
}

/// Writes `seriation.csv`, and `correlation_curve.csv` for a consensus
/// source.
pub fn cmd_seriate(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let d = cfg.load()?;
    let m = marginals(&d)?;
    let (s, curve) = seriate(&d, &m, cfg, true)?;
    let mut out = Output::new(&cfg.out_dir)?;
    out.write_with("seriation.csv", |w| {
        write_id_values(w, "id,value", &s.ids, &s.values)
    })?;
    if let Some(curve) = curve {
        out.write_with("correlation_curve.csv", |w| {
            writeln!(w, "t,corr")?;
            for (t, c) in curve.t.iter().zip(&curve.corr) {
                writeln!(w, "{t},{c}")?;
            }
            Ok(())
        })?;
    }
    Ok(out.written)
}

fn encode(s: &Seriation, cfg: &PipelineConfig) -> Result<EncodedSeriation> {
    if cfg.encode {
        encode_with_chain(s, &cfg.chain)
    } else {
        EncodedSeriation::from_unit_values(s.ids.clone(), s.values.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodeReport {
    pub n: usize,
    pub seriation: SeriationKind,
    pub provenance: Provenance,
    /// Normality of the standardized log values.
    pub normality: Option<NormalityReport>,
    pub warning: Option<String>,
}

/// Writes `encoded.csv`, histograms of the seriation, the standardized log
/// values and the encoded values, and `encode_report.json`.
pub fn cmd_encode(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let d = cfg.load()?;
    let m = marginals(&d)?;
    let (s, _) = seriate(&d, &m, cfg, false)?;
    drop(d);
    let e = encode_with_chain(&s, &cfg.chain)?;
    let z: Vec<f64> = s
        .values
        .iter()
        .map(|v| (v.ln() - e.provenance.mean) / e.provenance.sd)
        .collect();
    let normality = optional_normality(&z, cfg.alpha)?;
    let warning = match &normality {
        Some(r) if r.verdict == Verdict::NotNormal => Some(format!(
            "log seriation departs from normality (p = {:e}); encoded values will not be uniform",
            r.p_value
        )),
        _ => None,
    };
    let mut out = Output::new(&cfg.out_dir)?;
    out.write_with("encoded.csv", |w| {
        write_id_values(w, "id,encoded_value", &e.ids, &e.values)
    })?;
    out.histogram(
        "histogram_seriation.csv",
        &histogram_report(&s.values, cfg.bins, None)?,
    )?;
    out.histogram(
        "histogram_standardized.csv",
        &histogram_report(&z, cfg.bins, None)?,
    )?;
    out.histogram(
        "histogram_encoded.csv",
        &histogram_report(&e.values, cfg.bins, Some((0.0, 1.0)))?,
    )?;
    out.json(
        "encode_report.json",
        &EncodeReport {
            n: e.len(),
            seriation: s.kind,
            provenance: e.provenance.clone(),
            normality,
            warning,
        },
    )?;
    Ok(out.written)
}

/// Seriation, encoding and labels for every level.
pub fn hierarchy_for(
    d: &DataMatrix,
    cfg: &PipelineConfig,
) -> Result<(EncodedSeriation, BaireHierarchy)> {
    let m = marginals(d)?;
    let (s, _) = seriate(d, &m, cfg, false)?;
    drop(m);
    let e = encode(&s, cfg)?;
    drop(s);
    let h = build_hierarchy(&e, cfg.base, cfg.depth)?;
    Ok((e, h))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub n: usize,
    pub base: u32,
    pub depth: usize,
    pub source: SeriationSource,
    pub consensus_raw: bool,
    pub seed: u64,
    pub provenance: Provenance,
    /// Non-empty clusters at levels `1..=depth`.
    pub nonempty: Vec<usize>,
}

/// Writes `labels.csv`, `partitions.csv`, `clusters_level1.csv`,
/// `separation.json` and `cluster_report.json`.
pub fn cmd_cluster(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let d = cfg.load()?;
    let (e, h) = hierarchy_for(&d, cfg)?;
    let mut out = Output::new(&cfg.out_dir)?;

    out.write_with("labels.csv", |w| {
        let mut line = String::from("id");
        for l in 1..=h.depth() {
            let _ = write!(line, ",label_level{l}");
        }
        writeln!(w, "{line}")?;
        for (i, id) in h.ids().iter().enumerate() {
            line.clear();
            line.push_str(id);
            for l in 1..=h.depth() {
                let _ = write!(line, ",{}", h.level(l)[i]);
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    })?;

    let tables = (1..=h.depth())
        .map(|l| partition_table(&h, l))
        .collect::<Result<Vec<_>>>()?;
    out.write_with("partitions.csv", |w| {
        writeln!(w, "level,label,count")?;
        for t in &tables {
            for (label, count) in &t.cardinalities {
                writeln!(w, "{},{label},{count}", t.level)?;
            }
        }
        Ok(())
    })?;

    let summaries = cluster_summaries(&d, h.level(1))?;
    out.write_with("clusters_level1.csv", |w| {
        writeln!(w, "label,three_sigma,nn_label,nn_distance")?;
        for s in &summaries {
            let nn_label = s.nn_label.map(|l| l.to_string()).unwrap_or_default();
            let nn_distance = s.nn_distance.map(|x| x.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{nn_label},{nn_distance}", s.label, s.three_sigma)?;
        }
        Ok(())
    })?;
    if summaries.len() >= 2 {
        out.json("separation.json", &separation_report(&summaries)?)?;
    }
    out.json(
        "cluster_report.json",
        &ClusterReport {
            n: h.n(),
            base: cfg.base,
            depth: cfg.depth,
            source: cfg.source,
            consensus_raw: cfg.consensus_raw,
            seed: cfg.seed,
            provenance: e.provenance,
            nonempty: tables.iter().map(|t| t.nonempty_count).collect(),
        },
    )?;
    Ok(out.written)
}

/// Identifiers in the cluster named by `prefix`, in input order. The
/// hierarchy is recomputed from the input, deep enough for the prefix.
pub fn cmd_members(cfg: &PipelineConfig, prefix: &[u32]) -> Result<Vec<String>> {
    let mut cfg = cfg.clone();
    cfg.depth = cfg.depth.max(prefix.len());
    let d = cfg.load()?;
    let (_, h) = hierarchy_for(&d, &cfg)?;
    Ok(cluster_members(&h, prefix)?
        .into_iter()
        .map(str::to_owned)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Iris,
    Uniform,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iris" => Ok(Experiment::Iris),
            "uniform" => Ok(Experiment::Uniform),
            other => Err(Error::UnknownExperiment(other.to_string())),
        }
    }
}

/// Runs a canned experiment, writes `experiment_<name>.json` and returns
/// the JSON text.
pub fn cmd_experiments(
    name: &str,
    seed: u64,
    opts: &ExperimentOptions,
    out_dir: &Path,
) -> Result<String> {
    let (file, mut text) = match name.parse()? {
        Experiment::Iris => (
            "experiment_iris.json",
            serde_json::to_string_pretty(&run_iris_experiment(seed, opts)?)?,
        ),
        Experiment::Uniform => (
            "experiment_uniform.json",
            serde_json::to_string_pretty(&run_uniform_experiment(seed, opts)?)?,
        ),
    };
    text.push('\n');
    let mut out = Output::new(out_dir)?;
    out.write_with(file, |w| w.write_all(text.as_bytes()))?;
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_and_overrides() {
        let mut c = PipelineConfig::default();
        c.apply_str("# comment\nbase = 2\n\ndepth=8\nprojections=7\nencode=false\n")
            .unwrap();
        assert_eq!((c.base, c.depth, c.encode), (2, 8, false));
        assert_eq!(c.source, SeriationSource::Consensus { projections: 7 });
        c.set("depth", "4").unwrap();
        assert_eq!(c.depth, 4);
        c.set("source", "row_sum").unwrap();
        assert_eq!(c.source, SeriationSource::RowSum);
        assert!(c.set("colour", "blue").is_err());
        assert!(c.apply_str("base").is_err());
        assert!(c.set("encode", "maybe").is_err());
    }

    #[test]
    fn validation_bounds() {
        let mut c = PipelineConfig::default();
        c.validate().unwrap();
        c.depth = 16;
        assert!(matches!(
            c.validate(),
            Err(Error::DepthTooLarge { max: 15, .. })
        ));
        c.depth = 3;
        c.base = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_experiment() {
        let e = "petals".parse::<Experiment>().unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn streaming_matches_projection_set() {
        use crate::projection::{consensus, generate_axes, project, project_raw};
        let d = DataMatrix::from_rows(
            (0..30).map(|i| format!("r{i}")).collect(),
            (0..30)
                .map(|i| {
                    (0..5)
                        .map(|j| ((i * 7 + j * 3) % 11) as f64 + 0.5)
                        .collect()
                })
                .collect(),
        )
        .unwrap();
        let axes = generate_axes(5, 12, 9).unwrap();
        let (s, _) = streaming_consensus(&d, 12, 9, true, None).unwrap();
        assert_eq!(
            s.values,
            consensus(&project(&d, &axes).unwrap(), 12).unwrap().values
        );
        let (s, _) = streaming_consensus(&d, 12, 9, false, None).unwrap();
        assert_eq!(
            s.values,
            consensus(&project_raw(&d, &axes).unwrap(), 12)
                .unwrap()
                .values
        );
    }
}
