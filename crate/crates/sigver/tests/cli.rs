//! End-to-end tests driving the compiled binary: exit codes, command
//! pipelines, and byte-level report determinism.

use std::path::Path;
use std::process::{Command, Output};

fn sigver(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigver"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn assert_code(output: &Output, expected: i32, context: &str) {
    assert_eq!(
        output.status.code(),
        Some(expected),
        "{context}: stdout={:?} stderr={:?}",
        stdout_of(output),
        String::from_utf8_lossy(&output.stderr),
    );
}

/// Generates a small, well-separated dataset and returns its manifest path.
fn make_dataset(dir: &Path, seed: &str) -> String {
    let out = dir.to_str().unwrap();
    let output = sigver(&[
        "synth", "--writers", "4", "--genuine", "12", "--forged", "8", "--dim", "16",
        "--spread", "0.02", "--offset", "1.0", "--out", out, "--seed", seed,
    ]);
    assert_code(&output, 0, "synth");
    let manifest = dir.join("manifest.json");
    assert!(manifest.is_file(), "synth writes a manifest");
    manifest.to_str().unwrap().to_string()
}

#[test]
fn enroll_verify_round_trip_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_dataset(dir.path(), "11");
    let model = dir.path().join("w001.model.json");
    let model_arg = model.to_str().unwrap();

    let output = sigver(&[
        "enroll", "--dataset", &manifest, "--writer", "w001", "--split", "5,3,4",
        "--out", model_arg, "--seed", "11",
    ]);
    assert_code(&output, 0, "enroll");
    let report = stdout_of(&output);
    assert!(report.contains("writer\tw001"), "report: {report}");
    assert!(report.contains("strategy\tconsensus"), "report: {report}");
    assert!(report.contains("tau_c\t"), "report: {report}");
    assert!(report.contains("gallery_refs\t8"), "report: {report}");

    // A genuine sample from the writer's own file must be accepted.
    let feat = std::fs::read_to_string(dir.path().join("w001.feat")).unwrap();
    let genuine_row = feat.lines().find(|l| l.contains(",G,")).unwrap();
    let forged_row = feat.lines().find(|l| l.contains(",F,")).unwrap();
    let genuine_probe = dir.path().join("genuine.txt");
    let forged_probe = dir.path().join("forged.txt");
    std::fs::write(&genuine_probe, format!("{genuine_row}\n")).unwrap();
    std::fs::write(&forged_probe, format!("{forged_row}\n")).unwrap();

    let accept = sigver(&[
        "verify", "--model", model_arg, "--probe", genuine_probe.to_str().unwrap(),
    ]);
    assert_code(&accept, 0, "verify genuine");
    let text = stdout_of(&accept);
    assert!(text.contains("decision\tGENUINE"), "got: {text}");
    assert!(text.contains("score\t"), "got: {text}");
    assert!(text.contains("tau_c\t"), "got: {text}");

    let reject = sigver(&[
        "verify", "--model", model_arg, "--probe", forged_probe.to_str().unwrap(),
    ]);
    assert_code(&reject, 3, "verify forged");
    assert!(stdout_of(&reject).contains("decision\tFORGE"));

    // Bare numeric probes parse too (comma or whitespace separated).
    let values: Vec<&str> = genuine_row.splitn(4, ',').collect();
    let bare = dir.path().join("bare.txt");
    std::fs::write(&bare, format!("{}\n", values[3].replace(',', " "))).unwrap();
    let bare_accept = sigver(&["verify", "--model", model_arg, "--probe", bare.to_str().unwrap()]);
    assert_code(&bare_accept, 0, "verify bare numeric probe");
}

#[test]
fn insufficient_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_dataset(dir.path(), "12");
    let model = dir.path().join("m.json");

    let missing = sigver(&[
        "enroll", "--dataset", &manifest, "--writer", "nobody", "--split", "5,3,4",
        "--out", model.to_str().unwrap(),
    ]);
    assert_code(&missing, 2, "unknown writer");

    let shortfall = sigver(&[
        "enroll", "--dataset", &manifest, "--writer", "w001", "--split", "20,10,5",
        "--out", model.to_str().unwrap(),
    ]);
    assert_code(&shortfall, 2, "too few genuine samples");
    assert!(
        String::from_utf8_lossy(&shortfall.stderr).contains("insufficient samples"),
        "stderr names the problem"
    );
}

#[test]
fn usage_and_io_errors_exit_1_help_exits_0() {
    let help = sigver(&["--help"]);
    assert_code(&help, 0, "help");
    assert!(stdout_of(&help).contains("enroll"));

    let version = sigver(&["--version"]);
    assert_code(&version, 0, "version");

    let unknown = sigver(&["frobnicate"]);
    assert_code(&unknown, 1, "unknown subcommand");

    let bad_split = sigver(&[
        "enroll", "--dataset", "x.json", "--writer", "w", "--split", "1,2,3",
        "--out", "m.json",
    ]);
    assert_code(&bad_split, 1, "split with a < b is a usage error");

    let missing_manifest = sigver(&["stats", "--dataset", "/definitely/not/here.json"]);
    assert_code(&missing_manifest, 1, "missing manifest is an IO error");
}

#[test]
fn evaluate_emits_rate_table() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_dataset(dir.path(), "13");
    let per_writer = dir.path().join("per_writer.tsv");

    let output = sigver(&[
        "evaluate", "--dataset", &manifest, "--split", "5,3,4,8", "--trials", "3",
        "--seed", "13", "--macro-average", "--per-writer", per_writer.to_str().unwrap(),
    ]);
    assert_code(&output, 0, "evaluate");
    let report = stdout_of(&output);
    let mut lines = report.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "Dataset\tFeature\tStrategy\tAccuracy\tFAR\tFRR\tAER\t\
         AccuracyStd\tFARStd\tFRRStd\tAERStd\t\
         MacroAccuracy\tMacroFAR\tMacroFRR\tMacroAER"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("synthetic\tsynthetic\tconsensus\t"), "row: {row}");
    assert_eq!(lines.next(), None, "single strategy emits a single row");

    let breakdown = std::fs::read_to_string(&per_writer).unwrap();
    let mut writers = breakdown.lines().skip(1);
    assert_eq!(breakdown.lines().count(), 5, "header plus one row per writer");
    assert!(writers.all(|l| l.contains("\tw0")), "rows name each writer");
}

#[test]
fn compare_reports_are_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_dataset(dir.path(), "14");
    let args = [
        "compare", "--dataset", &manifest, "--split", "5,3,4,8", "--trials", "2",
        "--seed", "14",
    ];
    let first = sigver(&args);
    let second = sigver(&args);
    assert_code(&first, 0, "first compare");
    assert_code(&second, 0, "second compare");
    assert_eq!(first.stdout, second.stdout, "same seed, same bytes");

    let report = stdout_of(&first);
    assert_eq!(report.lines().count(), 6, "header plus all five strategies");
    for name in ["max", "min", "mean", "ci", "consensus"] {
        assert!(
            report.lines().any(|l| l.contains(&format!("\t{name}\t"))),
            "strategy {name} present"
        );
    }
}

#[test]
fn sweep_single_alpha_matches_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_dataset(dir.path(), "15");

    let evaluate = sigver(&[
        "evaluate", "--dataset", &manifest, "--split", "5,3,4,8", "--trials", "2",
        "--seed", "15", "--alpha", "0.5",
    ]);
    let sweep = sigver(&[
        "sweep", "--dataset", &manifest, "--split", "5,3,4,8", "--trials", "2",
        "--seed", "15", "--alphas", "0.5",
    ]);
    assert_code(&evaluate, 0, "evaluate");
    assert_code(&sweep, 0, "sweep");

    // The sweep table inserts an Alpha column at index 3; dropping it must
    // reproduce the evaluate table exactly.
    let strip_alpha = |report: &str| -> Vec<String> {
        report
            .lines()
            .map(|line| {
                let mut cols: Vec<&str> = line.split('\t').collect();
                cols.remove(3);
                cols.join("\t")
            })
            .collect()
    };
    let evaluate_lines: Vec<String> =
        stdout_of(&evaluate).lines().map(str::to_string).collect();
    assert_eq!(strip_alpha(&stdout_of(&sweep)), evaluate_lines);
}

#[test]
fn stats_and_convert_commands_work() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_dataset(dir.path(), "16");

    let pooled = sigver(&["stats", "--dataset", &manifest]);
    assert_code(&pooled, 0, "pooled stats");
    let report = stdout_of(&pooled);
    assert_eq!(
        report.lines().next().unwrap(),
        "Dataset\tFeature\tMeasure\tGenuine\tForge\tDifference"
    );
    assert_eq!(report.lines().count(), 3, "header, mean row, std row");
    assert!(report.contains("\tmean\t") && report.contains("\tstd\t"));

    let single = sigver(&["stats", "--dataset", &manifest, "--writer", "w002"]);
    assert_code(&single, 0, "single-writer stats");
    assert_ne!(stdout_of(&single), report, "restriction changes the numbers");

    // Convert a directory of .npy exports and load the result back.
    let npy_dir = dir.path().join("npy");
    std::fs::create_dir(&npy_dir).unwrap();
    write_npy(&npy_dir.join("alice_genuine.npy"), 3, 4, 0.25);
    write_npy(&npy_dir.join("alice_forgery.npy"), 2, 4, -0.5);
    write_npy(&npy_dir.join("bob_mystery.npy"), 2, 4, 1.0);
    let converted = dir.path().join("converted");
    let convert = sigver(&[
        "convert", "--input", npy_dir.to_str().unwrap(), "--out",
        converted.to_str().unwrap(), "--name", "conv", "--format", "binary",
    ]);
    assert_code(&convert, 0, "convert");
    let summary = stdout_of(&convert);
    assert!(summary.contains("writers\t1"), "summary: {summary}");
    assert!(summary.contains("samples\t5"), "summary: {summary}");
    assert!(
        String::from_utf8_lossy(&convert.stderr).contains("bob_mystery"),
        "unrecognized class suffix is warned about"
    );

    let converted_manifest = converted.join("manifest.json");
    let reread = sigver(&["stats", "--dataset", converted_manifest.to_str().unwrap()]);
    assert_code(&reread, 0, "converted dataset loads");
    assert!(stdout_of(&reread).starts_with("Dataset\tFeature\tMeasure"));
}

/// Writes a minimal v1 .npy file of `rows x cols` little-endian f64 values.
fn write_npy(path: &Path, rows: usize, cols: usize, base: f64) {
    let dict = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': ({rows}, {cols}), }}");
    let unpadded = 10 + dict.len() + 1;
    let padding = (16 - unpadded % 16) % 16;
    let mut bytes = Vec::new();
    bytes.extend_from_slice(b"\x93NUMPY\x01\x00");
    bytes.extend_from_slice(&u16::try_from(dict.len() + padding + 1).unwrap().to_le_bytes());
    bytes.extend_from_slice(dict.as_bytes());
    bytes.extend(std::iter::repeat_n(b' ', padding));
    bytes.push(b'\n');
    for i in 0..rows * cols {
        bytes.extend_from_slice(&(base + i as f64 * 0.125).to_le_bytes());
    }
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn precision_flag_widens_output() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_dataset(dir.path(), "17");
    let model = dir.path().join("m.json");
    let output = sigver(&[
        "--precision", "12", "enroll", "--dataset", &manifest, "--writer", "w001",
        "--split", "5,3,4", "--out", model.to_str().unwrap(),
    ]);
    assert_code(&output, 0, "enroll with precision");
    let report = stdout_of(&output);
    let tau_line = report.lines().find(|l| l.starts_with("tau_c\t")).unwrap();
    let digits = tau_line.split('\t').nth(1).unwrap();
    let decimals = digits.split('.').nth(1).unwrap();
    assert_eq!(decimals.len(), 12, "tau printed at requested precision");
}
