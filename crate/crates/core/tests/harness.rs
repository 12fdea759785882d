use std::process::Command;

use markov_order::gdl::OrderEstimate;
use markov_order::generator::{build_tensor, builtin_spec, simulate};
use markov_order::harness::{
    estimate_file, parse_csv, render, run_experiment, run_experiment_with_workers, EstimatorKind, ExperimentConfig,
    GeneratorRef, TableFormat,
};
use markov_order::{Error, GdlParams, Sample};

fn config(generator: &str, n: usize, reps: usize) -> ExperimentConfig {
    ExperimentConfig {
        replications: reps,
        bound: Some(3),
        master_seed: 42,
        ..ExperimentConfig::new(GeneratorRef::Named(generator.into()), n)
    }
}

#[test]
fn csv_roundtrip_reproduces_percentages() {
    let t = run_experiment(&config("q1-lag3", 600, 40)).unwrap();
    let parsed = parse_csv(&render(&t, TableFormat::Csv)).unwrap();
    assert_eq!(parsed.keys().copied().collect::<Vec<_>>(), t.estimators);
    for (&e, rows) in &parsed {
        assert_eq!(rows.keys().copied().collect::<Vec<_>>(), t.outcomes());
        for (&o, &p) in rows {
            assert!((p - t.percent(e, o)).abs() <= 0.05, "{e} {o}: {p}");
        }
    }
}

#[test]
fn csv_shape_for_one_estimator() {
    let c = ExperimentConfig {
        estimators: vec![EstimatorKind::Bic],
        bound: Some(1),
        ..config("q2-iid", 300, 10)
    };
    let csv = render(&run_experiment(&c).unwrap(), TableFormat::Csv);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "estimator,k,percent");
    assert_eq!(lines.len(), 3, "{csv}");
}

#[test]
fn percentages_use_one_decimal() {
    let t = run_experiment(&config("q1-lag3", 400, 200)).unwrap();
    let csv = render(&t, TableFormat::Csv);
    for line in csv.lines().skip(1) {
        let pct = line.rsplit(',').next().unwrap();
        let (_, frac) = pct.split_once('.').unwrap();
        assert_eq!(frac.len(), 1, "{line}");
    }
    let md = render(&t, TableFormat::Markdown);
    assert!(md.contains("| k | Aic | Bic | Edc | Gdl |"), "{md}");
    assert_eq!(md.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| k")).count(), t.outcomes().len());
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let c = config("q3-lag2", 1500, 30);
    let one = run_experiment_with_workers(&c, 1).unwrap();
    let four = run_experiment_with_workers(&c, 4).unwrap();
    assert_eq!(render(&one, TableFormat::Csv), render(&four, TableFormat::Csv));
    assert_eq!(one.counts, four.counts);
    assert_eq!(one.metadata.sample_checksums, four.metadata.sample_checksums);
}

#[test]
fn same_seed_same_table_and_adding_replications_keeps_prefix() {
    let a = run_experiment(&config("q1-lag2", 500, 20)).unwrap();
    let b = run_experiment(&config("q1-lag2", 500, 20)).unwrap();
    assert_eq!(a.counts, b.counts);
    let longer = run_experiment(&config("q1-lag2", 500, 30)).unwrap();
    assert_eq!(a.metadata.sample_checksums[..], longer.metadata.sample_checksums[..20]);
}

#[test]
fn every_estimator_sees_the_replication_sample() {
    // replication checksums are those of the sample simulate() produces for the derived seed
    let c = config("q1-lag2", 500, 5);
    let t = run_experiment(&c).unwrap();
    let tensor = build_tensor(&builtin_spec("q1-lag2").unwrap()).unwrap();
    for (r, &sum) in t.metadata.sample_checksums.iter().enumerate() {
        let seed = markov_order::generator::replication_seed(42, r as u64);
        let s = simulate(&tensor, 500, seed, t.metadata.burn_in).unwrap();
        assert_eq!(s.checksum(), sum);
    }
}

#[test]
fn estimate_file_reports_every_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q1.txt");
    let tensor = build_tensor(&builtin_spec("q1-lag2").unwrap()).unwrap();
    simulate(&tensor, 1000, 3, 60).unwrap().write(&path).unwrap();
    let report = estimate_file(&path, &GdlParams::default(), &EstimatorKind::ALL, 2.0).unwrap();
    assert_eq!(report.verdicts.len(), 4);
    let gdl = report.gdl.as_ref().unwrap();
    assert_eq!(gdl.sigma.len(), 5);
    let text = report.to_string();
    assert!(text.contains("gdl profile") && text.contains("sigma"), "{text}");
    assert!(report.verdicts.iter().all(|(_, v)| *v == OrderEstimate::Order(2)), "{text}");
}

#[test]
fn estimate_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "m=3\n1 2 3 5 1\n").unwrap();
    assert!(matches!(
        estimate_file(&bad, &GdlParams::default(), &EstimatorKind::ALL, 2.0),
        Err(Error::Parse { token: 4, .. })
    ));
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    assert!(matches!(
        estimate_file(&empty, &GdlParams::default(), &EstimatorKind::ALL, 2.0),
        Err(Error::Parse { .. })
    ));
    let short = dir.path().join("short.txt");
    Sample::from_labels(&[1, 2, 1, 2, 1], 2).unwrap().write(&short).unwrap();
    assert!(matches!(
        estimate_file(&short, &GdlParams::default(), &EstimatorKind::ALL, 2.0),
        Err(Error::SampleTooShort { required: 16, .. })
    ));
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_markov-order"))
}

#[test]
fn cli_generate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.txt");
    let status = cli()
        .args(["generate", "--spec", "q1-lag2", "--n", "1000", "--seed", "11", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let sample = Sample::read(&out).unwrap();
    assert_eq!(sample.len(), 1000);
    assert_eq!(sample.alphabet_size(), 3);

    let output = cli()
        .args(["estimate", "--in"])
        .arg(&out)
        .args(["--B", "4", "--lambda", "1", "--delta2-denominator", "expected", "--estimators", "gdl,bic"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("gdl:") && text.contains("bic:") && !text.contains("aic:"), "{text}");

    let output = cli().args(["estimate", "--json", "--no-df-normalize", "--in"]).arg(&out).output().unwrap();
    assert!(output.status.success());
    let json: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(json["sample_len"], 1000);
}

#[test]
fn cli_generate_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"name": "two-state", "m": 2, "kappa": 1, "R": [[0.9, 0.2], [0.1, 0.8]], "lags": [1.0]}"#,
    )
    .unwrap();
    let out = dir.path().join("s.txt");
    let status = cli()
        .args(["generate", "--spec"])
        .arg(&spec)
        .args(["--n", "200", "--seed", "1", "--burn-in", "0", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(Sample::read(&out).unwrap().len(), 200);
}

#[test]
fn cli_experiment_formats_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    let table = dir.path().join("table.csv");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"generator": "q2-iid", "n": 500, "replications": 12, "B": 2, "master_seed": 3, "output_path": {:?}}}"#,
            table.to_str().unwrap()
        ),
    )
    .unwrap();
    let run = |workers: &str| {
        let out = cli()
            .args(["experiment", "--format", "csv", "--workers", workers, "--config"])
            .arg(&cfg)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let a = run("1");
    let b = run("3");
    assert_eq!(a, b);
    assert!(a.starts_with("estimator,k,percent"));
    assert_eq!(std::fs::read_to_string(&table).unwrap(), a);
    assert!(table.with_extension("meta.json").exists());

    let md = cli().args(["experiment", "--config"]).arg(&cfg).output().unwrap();
    assert!(String::from_utf8(md.stdout).unwrap().contains("| k |"));
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "m=3\n1 2 7\n").unwrap();
    let st = cli().args(["estimate", "--in"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(1));

    let st = cli().args(["estimate", "--bogus-flag"]).status().unwrap();
    assert_eq!(st.code(), Some(1));

    let st = cli().args(["generate", "--spec", "q9", "--n", "10", "--seed", "1", "--out"]).arg(dir.path().join("x")).status().unwrap();
    assert_eq!(st.code(), Some(1));

    let st = cli().args(["estimate", "--in"]).arg(dir.path().join("missing.txt")).status().unwrap();
    assert_eq!(st.code(), Some(2));

    let st = cli().arg("--help").status().unwrap();
    assert_eq!(st.code(), Some(0));
}
