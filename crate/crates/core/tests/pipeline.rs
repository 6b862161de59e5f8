mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use baireclust::ingest::{load_matrix, marginals, DataMatrix, LoadOptions};
use baireclust::pipeline::{
    cmd_cluster, cmd_encode, cmd_experiments, cmd_members, cmd_seriate, cmd_stats, PipelineConfig,
    SeriationSource,
};
use baireclust::validate::ExperimentOptions;
use baireclust::Error;
use serde_json::Value;

fn config(input: &Path, out: &Path) -> PipelineConfig {
    PipelineConfig {
        input: Some(input.to_path_buf()),
        out_dir: out.to_path_buf(),
        ..PipelineConfig::default()
    }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn read_csv_column(path: &Path, col: usize) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().to_string())
        .collect()
}

#[test]
fn stats_of_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "one.tsv", "id\tx\nonly\t5\n");
    let files = cmd_stats(&config(&input, dir.path())).unwrap();
    assert_eq!(files.len(), 2);
    let v: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    for k in ["max", "min", "mean", "median"] {
        assert_eq!(v["summary"][k], 5.0);
    }
    assert!(v["normality"]["column_sums"].is_null());
    assert_eq!(
        fs::read_to_string(dir.path().join("marginals.csv")).unwrap(),
        "id,row_sum,row_mass\nonly,5,1\n"
    );
}

#[test]
fn stats_report_normality_sections() {
    let dir = tempfile::tempdir().unwrap();
    let d = common::gene_like_matrix(4, 500, 12);
    let input = dir.path().join("g.tsv");
    d.write_tsv(&input).unwrap();
    cmd_stats(&config(&input, dir.path())).unwrap();
    let v: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(v["n"], 500);
    let log_masses = &v["normality"]["log_row_masses"];
    assert_eq!(log_masses["verdict"], "consistent_with_normal");
    assert!(v["normality"]["column_sums"]["p_value"].is_number());
    let m = marginals(&d).unwrap();
    let min = m.row_masses.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(v["row_mass"]["min"], min);
}

#[test]
fn missing_file_is_an_io_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.tsv");
    let e = cmd_stats(&config(&missing, dir.path())).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    assert!(e.to_string().contains("absent.tsv"), "{e}");
}

#[test]
fn loading_reports_bad_cells_and_minimal_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.tsv", "id a b\nr1 1 2\nr2 3 abc\n");
    match load_matrix(&bad, LoadOptions::default()) {
        Err(Error::Parse { line, field, text }) => {
            assert_eq!((line, field, text.as_str()), (3, 3, "abc"));
        }
        other => panic!("unexpected {other:?}"),
    }
    let one = write(dir.path(), "one.tsv", "a 1.0 2.0\n");
    let opts = LoadOptions {
        has_header: false,
        ..LoadOptions::default()
    };
    let d = load_matrix(&one, opts).unwrap();
    assert_eq!((d.n(), d.m()), (1, 2));
    assert_eq!(&d.row_ids()[..], &["a".to_string()]);

    let neg = write(dir.path(), "neg.csv", "id,a\nr1,1\nr2,-1\n");
    let opts = LoadOptions {
        format: baireclust::ingest::Format::Csv,
        ..LoadOptions::default()
    };
    match load_matrix(&neg, opts) {
        Err(Error::NegativeValue { id, .. }) => assert_eq!(id, "r2"),
        other => panic!("unexpected {other:?}"),
    }
    let zero = write(dir.path(), "zero.tsv", "id a b\nr1 1 2\nz 0 0\n");
    assert!(
        matches!(load_matrix(&zero, LoadOptions::default()), Err(Error::ZeroRow(id)) if id == "z")
    );
}

#[test]
fn row_mass_seriation_equals_marginals() {
    let dir = tempfile::tempdir().unwrap();
    let d = common::uniform_matrix(1, 40, 3);
    let input = dir.path().join("u.tsv");
    d.write_tsv(&input).unwrap();
    cmd_seriate(&config(&input, dir.path())).unwrap();
    let got: Vec<f64> = read_csv_column(&dir.path().join("seriation.csv"), 1)
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(got, marginals(&d).unwrap().row_masses);
    assert!(!dir.path().join("correlation_curve.csv").exists());
}

#[test]
fn consensus_curve_on_gene_like_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = common::gene_like_matrix(8, 5_000, 16);
    let input = dir.path().join("g.tsv");
    d.write_tsv(&input).unwrap();
    let mut cfg = config(&input, &dir.path().join("a"));
    cfg.source = SeriationSource::Consensus { projections: 500 };
    cfg.seed = 17;
    cmd_seriate(&cfg).unwrap();
    let curve = fs::read_to_string(dir.path().join("a/correlation_curve.csv")).unwrap();
    let corr: Vec<f64> = curve
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(corr.len(), 500);
    assert!(corr[0] >= 0.99, "{}", corr[0]);
    assert!(corr.iter().all(|c| (-1.0..=1.0).contains(c)));

    cfg.out_dir = dir.path().join("b");
    cmd_seriate(&cfg).unwrap();
    for f in ["seriation.csv", "correlation_curve.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
}

/// Standard normal quantiles at 0.05, 0.15, ..., 0.95.
const DECILE_MIDS: [f64; 10] = [
    -1.6448536269514729,
    -1.0364333894937898,
    -0.6744897501960817,
    -0.38532046640756773,
    -0.12566134685507402,
    0.12566134685507402,
    0.38532046640756773,
    0.6744897501960817,
    1.0364333894937898,
    1.6448536269514729,
];

#[test]
fn one_row_per_decade_gives_singletons() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<Vec<f64>> = DECILE_MIDS.iter().map(|q| vec![q.exp(), q.exp()]).collect();
    let d = DataMatrix::from_rows((0..10).map(|i| format!("g{i}")).collect(), rows).unwrap();
    let input = dir.path().join("ten.tsv");
    d.write_tsv(&input).unwrap();
    cmd_cluster(&config(&input, dir.path())).unwrap();
    let level1 = read_csv_column(&dir.path().join("labels.csv"), 1);
    assert_eq!(level1, (0..10).map(|i| i.to_string()).collect::<Vec<_>>());
    let parts = fs::read_to_string(dir.path().join("partitions.csv")).unwrap();
    let level1_counts: Vec<&str> = parts.lines().filter(|l| l.starts_with("1,")).collect();
    assert_eq!(level1_counts.len(), 10);
    assert!(level1_counts.iter().all(|l| l.ends_with(",1")));
    let table = fs::read_to_string(dir.path().join("clusters_level1.csv")).unwrap();
    assert!(table.starts_with("label,three_sigma,nn_label,nn_distance\n"));
    assert!(table
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("0")));
}

fn clustered_fixture(dir: &Path) -> PipelineConfig {
    let d = common::gene_like_matrix(12, 3_000, 8);
    let input = dir.join("g.tsv");
    d.write_tsv(&input).unwrap();
    config(&input, &dir.join("out"))
}

#[test]
fn cluster_outputs_are_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = clustered_fixture(dir.path());
    cfg.source = SeriationSource::Consensus { projections: 10 };
    cfg.seed = 3;
    // A row that is smallest on every axis has rescaled consensus 0.
    match cmd_cluster(&cfg) {
        Err(Error::NonPositive { id, value }) => assert!(id.starts_with("row_") && value == 0.0),
        other => panic!("unexpected {other:?}"),
    }
    cfg.consensus_raw = true;
    let first = cmd_cluster(&cfg).unwrap();
    let snapshot: Vec<Vec<u8>> = first.iter().map(|p| fs::read(p).unwrap()).collect();
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let files = pool.install(|| cmd_cluster(&cfg)).unwrap();
        assert_eq!(files, first);
        for (p, want) in files.iter().zip(&snapshot) {
            assert_eq!(&fs::read(p).unwrap(), want, "{}", p.display());
        }
    }
    let report: Value =
        serde_json::from_str(&fs::read_to_string(cfg.out_dir.join("cluster_report.json")).unwrap())
            .unwrap();
    let nonempty: Vec<u64> = report["nonempty"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(nonempty.len(), 3);
    assert!(nonempty[0] <= 10 && nonempty[1] <= 100 && nonempty[2] <= 1000);
    let parts = fs::read_to_string(cfg.out_dir.join("partitions.csv")).unwrap();
    for level in 1..=3 {
        let total: usize = parts
            .lines()
            .skip(1)
            .filter(|l| l.starts_with(&format!("{level},")))
            .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, 3_000);
    }
}

#[test]
fn members_by_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = clustered_fixture(dir.path());
    let all = cmd_members(&cfg, &[]).unwrap();
    assert_eq!(all.len(), 3_000);
    assert_eq!(all[0], "row_0");
    let three: BTreeSet<String> = cmd_members(&cfg, &[3]).unwrap().into_iter().collect();
    let seven: BTreeSet<String> = cmd_members(&cfg, &[7]).unwrap().into_iter().collect();
    assert!(!three.is_empty() && !seven.is_empty());
    assert!(three.is_disjoint(&seven));
    let union: usize = (0..10)
        .map(|d| cmd_members(&cfg, &[d]).unwrap().len())
        .sum();
    assert_eq!(union, 3_000);
    // Deeper than the configured depth.
    let deep = cmd_members(&cfg, &[3, 7, 1, 4]).unwrap();
    assert!(deep.iter().all(|id| three.contains(id)));
    assert!(matches!(
        cmd_members(&cfg, &[12]),
        Err(Error::InvalidDigit { .. })
    ));
}

#[test]
fn encode_writes_histograms_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = clustered_fixture(dir.path());
    cfg.bins = 10;
    let files = cmd_encode(&cfg).unwrap();
    assert_eq!(files.len(), 5);
    let h = fs::read_to_string(cfg.out_dir.join("histogram_encoded.csv")).unwrap();
    let lines: Vec<&str> = h.lines().collect();
    assert_eq!(lines[0], "bin_low,bin_high,count");
    assert_eq!(lines.len(), 11);
    assert!(lines[1].starts_with("0,0.1,"));
    let total: usize = lines[1..]
        .iter()
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 3_000);
    let enc = fs::read_to_string(cfg.out_dir.join("encoded.csv")).unwrap();
    assert!(enc.starts_with("id,encoded_value\n"));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(cfg.out_dir.join("encode_report.json")).unwrap())
            .unwrap();
    assert_eq!(
        report["provenance"]["steps"],
        serde_json::json!(["log", "standardize", "gaussian_cdf"])
    );
    assert!(report["warning"].is_null());
}

#[test]
fn encode_warns_when_log_seriation_is_not_normal() {
    let dir = tempfile::tempdir().unwrap();
    let d = common::uniform_matrix(5, 2_000, 1);
    let input = dir.path().join("u.tsv");
    d.write_tsv(&input).unwrap();
    let cfg = config(&input, dir.path());
    cmd_encode(&cfg).unwrap();
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("encode_report.json")).unwrap())
            .unwrap();
    assert!(report["warning"].is_string());
    assert_eq!(report["normality"]["verdict"], "not_normal");
}

#[test]
fn unencoded_clustering_requires_unit_values() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = clustered_fixture(dir.path());
    cfg.encode = false;
    cmd_cluster(&cfg).unwrap();
    cfg.source = SeriationSource::RowSum;
    let e = cmd_cluster(&cfg).unwrap_err();
    assert!(matches!(e, Error::OutOfUnitInterval(_)));
    assert_eq!(e.exit_code(), 1);
}

#[test]
fn experiments_dispatch() {
    let dir = tempfile::tempdir().unwrap();
    let e = cmd_experiments("nope", 1, &ExperimentOptions::default(), dir.path()).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let text = cmd_experiments("iris", 1, &ExperimentOptions::default(), dir.path()).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["n"], 150);
    assert_eq!(
        fs::read_to_string(dir.path().join("experiment_iris.json")).unwrap(),
        text
    );
}
