//! Command-line front end: enrollment, single-probe verification, protocol
//! evaluation, strategy comparison, alpha sweeps, synthetic data,
//! per-class statistics, and feature-export conversion.
//!
//! Exit status contract: 0 success (or a genuine verdict), 3 forge verdict,
//! 2 insufficient data, 1 any other error.

use std::collections::BTreeSet;
use std::fmt::Write as FmtWrite;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use sigver::{
    class_feature_stats, classify, compare_strategies, convert_npy_dir, enroll_with_strategy,
    generate_synthetic, load_dataset, load_model_file, run_protocol, save_dataset,
    save_model_file, score_probe, sweep_alpha, Aggregation, Dataset, DatasetFormat, Decision,
    EnrollConfig, Error, FeatureVector, ModelFile, ProtocolResult, SplitSpec, Strategy,
    SyntheticConfig, FORMAT_VERSION,
};

#[derive(Parser)]
#[command(
    name = "sigver",
    version,
    about = "Writer-dependent offline signature verification over precomputed feature vectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed driving every randomized step
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Decimal places for all numeric output (default: 6 for scores and
    /// thresholds, 2 for percentage rates)
    #[arg(long, global = true)]
    precision: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one writer's threshold model and save it
    Enroll(EnrollCmd),
    /// Score a probe feature row against a saved model
    Verify(VerifyCmd),
    /// Run the repeated-trial protocol for one strategy
    Evaluate(EvaluateCmd),
    /// Run the protocol for several strategies over identical draws
    Compare(CompareCmd),
    /// Rerun the protocol across alpha values
    Sweep(SweepCmd),
    /// Generate a synthetic labeled dataset
    Synth(SynthCmd),
    /// Pooled per-class feature statistics
    Stats(StatsCmd),
    /// Convert .npy feature exports into the canonical dataset layout
    Convert(ConvertCmd),
}

/// Gallery and probe sizes, parsed from `a,b,genuine` or
/// `a,b,genuine,forge`.
#[derive(Debug, Clone, Copy)]
struct SplitArg(SplitSpec);

impl FromStr for SplitArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 && parts.len() != 4 {
            return Err(format!(
                "expected a,b,genuine or a,b,genuine,forge, got {} part(s)",
                parts.len()
            ));
        }
        let mut counts = [0usize; 4];
        for (i, part) in parts.iter().enumerate() {
            counts[i] = part
                .parse()
                .map_err(|_| format!("{part:?} is not a count"))?;
        }
        SplitSpec::new(counts[0], counts[1], counts[2], counts[3])
            .map(SplitArg)
            .map_err(|e| e.to_string())
    }
}

/// Feature-file encoding, `text` or `binary`.
#[derive(Debug, Clone, Copy)]
struct FormatArg(DatasetFormat);

impl FromStr for FormatArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(FormatArg(DatasetFormat::Text)),
            "binary" => Ok(FormatArg(DatasetFormat::Binary)),
            other => Err(format!("unknown format {other:?}, expected text or binary")),
        }
    }
}

/// Enrollment parameters shared by every fitting command.
#[derive(Args)]
struct ConfigFlags {
    /// Gallery/probe sizes as a,b,genuine[,forge]
    #[arg(long)]
    split: SplitArg,

    /// Confidence scaler for the threshold bound
    #[arg(long, default_value_t = sigver::DEFAULT_ALPHA)]
    alpha: f64,

    /// Consensus filter offset [default: exp(-4)]
    #[arg(long)]
    e_consensus: Option<f64>,

    /// Threshold offset [default: exp(-4.5)]
    #[arg(long)]
    e_threshold: Option<f64>,

    /// Probe score aggregation: mean, max, or min
    #[arg(long, default_value_t = Aggregation::Mean)]
    aggregation: Aggregation,
}

impl ConfigFlags {
    fn to_config(&self, seed: u64) -> Result<EnrollConfig, Error> {
        let mut config = EnrollConfig::new(self.split.0, seed);
        config.alpha = self.alpha;
        if let Some(e) = self.e_consensus {
            config.e_consensus = e;
        }
        if let Some(e) = self.e_threshold {
            config.e_threshold = e;
        }
        config.aggregation = self.aggregation;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct EnrollCmd {
    /// Dataset manifest path
    #[arg(long)]
    dataset: PathBuf,

    /// Writer to enroll
    #[arg(long)]
    writer: String,

    #[command(flatten)]
    config: ConfigFlags,

    /// Threshold strategy to fit
    #[arg(long, default_value_t = Strategy::Consensus)]
    strategy: Strategy,

    /// Where to write the model file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyCmd {
    /// Saved model file
    #[arg(long)]
    model: PathBuf,

    /// File holding one probe feature row: either bare numbers (comma or
    /// whitespace separated) or a canonical dataset row
    #[arg(long)]
    probe: PathBuf,
}

#[derive(Args)]
struct EvaluateCmd {
    /// Dataset manifest path
    #[arg(long)]
    dataset: PathBuf,

    #[command(flatten)]
    config: ConfigFlags,

    /// Threshold strategy to evaluate
    #[arg(long, default_value_t = Strategy::Consensus)]
    strategy: Strategy,

    /// Independent repetitions per writer
    #[arg(long, default_value_t = 10)]
    trials: usize,

    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write a per-writer breakdown table to this path
    #[arg(long)]
    per_writer: Option<PathBuf>,

    /// Append macro-averaged (unweighted per-writer mean) rate columns
    #[arg(long)]
    macro_average: bool,
}

#[derive(Args)]
struct CompareCmd {
    /// Dataset manifest path
    #[arg(long)]
    dataset: PathBuf,

    #[command(flatten)]
    config: ConfigFlags,

    /// Strategies to compare
    #[arg(long, value_delimiter = ',', default_values_t = Strategy::ALL)]
    strategies: Vec<Strategy>,

    /// Independent repetitions per writer
    #[arg(long, default_value_t = 10)]
    trials: usize,

    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write a per-writer breakdown table to this path
    #[arg(long)]
    per_writer: Option<PathBuf>,

    /// Append macro-averaged rate columns
    #[arg(long)]
    macro_average: bool,
}

#[derive(Args)]
struct SweepCmd {
    /// Dataset manifest path
    #[arg(long)]
    dataset: PathBuf,

    #[command(flatten)]
    config: ConfigFlags,

    /// Alpha values to sweep, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,

    /// Threshold strategy to sweep
    #[arg(long, default_value_t = Strategy::Consensus)]
    strategy: Strategy,

    /// Independent repetitions per writer
    #[arg(long, default_value_t = 10)]
    trials: usize,

    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write a per-writer breakdown table to this path
    #[arg(long)]
    per_writer: Option<PathBuf>,

    /// Append macro-averaged rate columns
    #[arg(long)]
    macro_average: bool,
}

#[derive(Args)]
struct SynthCmd {
    /// Number of writers
    #[arg(long, default_value_t = 10)]
    writers: usize,

    /// Genuine samples per writer
    #[arg(long, default_value_t = 24)]
    genuine: usize,

    /// Forged samples per writer
    #[arg(long, default_value_t = 24)]
    forged: usize,

    /// Feature dimension
    #[arg(long, default_value_t = 64)]
    dim: usize,

    /// Noise scale around each class center
    #[arg(long, default_value_t = 0.05)]
    spread: f64,

    /// Distance between the genuine prototype and the forgery center
    #[arg(long, default_value_t = 0.7)]
    offset: f64,

    /// Directory for the manifest and feature files
    #[arg(long)]
    out: PathBuf,

    /// Feature-file encoding: text or binary
    #[arg(long, default_value = "text")]
    format: FormatArg,
}

#[derive(Args)]
struct StatsCmd {
    /// Dataset manifest path
    #[arg(long)]
    dataset: PathBuf,

    /// Restrict to one writer (default: pool over the whole dataset)
    #[arg(long)]
    writer: Option<String>,

    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertCmd {
    /// Directory of {writer}_{class}.npy files
    #[arg(long)]
    input: PathBuf,

    /// Directory for the converted dataset
    #[arg(long)]
    out: PathBuf,

    /// Dataset name recorded in the manifest
    #[arg(long, default_value = "converted")]
    name: String,

    /// Feature model name recorded in the manifest
    #[arg(long, default_value = "signet")]
    feature_model: String,

    /// Feature-file encoding: text or binary
    #[arg(long, default_value = "text")]
    format: FormatArg,
}

/// Decimal places used for output: scores/thresholds and percentage rates.
#[derive(Clone, Copy)]
struct Precision {
    score: usize,
    rate: usize,
}

impl Precision {
    fn new(flag: Option<usize>) -> Self {
        match flag {
            Some(p) => Precision { score: p, rate: p },
            None => Precision { score: 6, rate: 2 },
        }
    }

    fn score(&self, v: f64) -> String {
        format!("{:.*}", self.score, v)
    }

    fn rate(&self, v: f64) -> String {
        format!("{:.*}", self.rate, v)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let precision = Precision::new(cli.precision);
    let seed = cli.seed;
    let outcome = match cli.command {
        Command::Enroll(cmd) => cmd_enroll(cmd, seed, precision),
        Command::Verify(cmd) => cmd_verify(cmd, precision),
        Command::Evaluate(cmd) => cmd_evaluate(cmd, seed, precision),
        Command::Compare(cmd) => cmd_compare(cmd, seed, precision),
        Command::Sweep(cmd) => cmd_sweep(cmd, seed, precision),
        Command::Synth(cmd) => cmd_synth(cmd, seed),
        Command::Stats(cmd) => cmd_stats(cmd, precision),
        Command::Convert(cmd) => cmd_convert(cmd),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::InsufficientSamples { .. } | Error::WriterNotFound(_) => 2,
        Error::MatrixEntry { source, .. } | Error::Sample { source, .. } => {
            exit_code_for(source)
        }
        _ => 1,
    }
}

fn emit(report: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, report).map_err(|e| Error::Io {
            path: path.to_owned(),
            source: e,
        }),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn cmd_enroll(cmd: EnrollCmd, seed: u64, precision: Precision) -> Result<u8, Error> {
    let dataset = load_dataset(&cmd.dataset)?;
    let writer = dataset
        .writer(&cmd.writer)
        .ok_or_else(|| Error::WriterNotFound(cmd.writer.clone()))?;
    let config = cmd.config.to_config(seed)?;
    let (model, _probes) = enroll_with_strategy(&writer.genuine, cmd.strategy, &config)?;
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        writer_id: writer.writer_id.clone(),
        dataset: dataset.name.clone(),
        feature_model: dataset.feature_model.clone(),
        model,
    };
    save_model_file(&file, &cmd.out)?;
    let mut report = String::new();
    let _ = writeln!(report, "writer\t{}", file.writer_id);
    let _ = writeln!(report, "strategy\t{}", file.model.strategy);
    let _ = writeln!(report, "tau_c\t{}", precision.score(file.model.tau_c));
    let _ = writeln!(report, "consensus_size\t{}", file.model.consensus_size());
    let _ = writeln!(report, "gallery_refs\t{}", file.model.gallery_refs.len());
    let _ = writeln!(report, "model\t{}", cmd.out.display());
    print!("{report}");
    Ok(0)
}

/// Reads one probe feature row: either bare numbers, or a canonical
/// `writer,sample,label,values...` row whose leading fields are skipped.
fn parse_probe_row(path: &Path) -> Result<FeatureVector, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let parse_err = |line: usize, message: String| Error::Parse {
        file: path.to_owned(),
        line,
        message,
    };
    let (line_no, line) = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').trim()))
        .find(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| parse_err(0, "no probe row found".to_string()))?;
    let tokens: Vec<&str> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect();
    let numeric: Option<Vec<f64>> = tokens.iter().map(|t| t.parse().ok()).collect();
    let values = match numeric {
        Some(values) => values,
        None if tokens.len() > 3 && matches!(tokens[2], "G" | "F") => tokens[3..]
            .iter()
            .map(|t| {
                t.parse()
                    .map_err(|_| parse_err(line_no, format!("{t:?} is not a number")))
            })
            .collect::<Result<_, _>>()?,
        None => {
            return Err(parse_err(
                line_no,
                "expected numbers or a writer,sample,label,values row".to_string(),
            ))
        }
    };
    FeatureVector::new(values)
}

fn cmd_verify(cmd: VerifyCmd, precision: Precision) -> Result<u8, Error> {
    let file = load_model_file(&cmd.model)?;
    let probe = parse_probe_row(&cmd.probe)?;
    let score = score_probe(&probe, &file.model)?;
    let decision = classify(score, file.model.tau_c);
    println!("score\t{}", precision.score(score));
    println!("tau_c\t{}", precision.score(file.model.tau_c));
    println!(
        "decision\t{}",
        match decision {
            Decision::Genuine => "GENUINE",
            Decision::Forge => "FORGE",
        }
    );
    Ok(match decision {
        Decision::Genuine => 0,
        Decision::Forge => 3,
    })
}

/// One emitted result row: strategy, optional swept alpha, and the run.
type ResultRow<'a> = (Strategy, Option<f64>, &'a ProtocolResult);

fn strategy_report(
    dataset: &Dataset,
    rows: &[ResultRow<'_>],
    with_macro: bool,
    precision: Precision,
) -> String {
    let with_alpha = rows.iter().any(|(_, alpha, _)| alpha.is_some());
    let mut out = String::from("Dataset\tFeature\tStrategy");
    if with_alpha {
        out.push_str("\tAlpha");
    }
    out.push_str("\tAccuracy\tFAR\tFRR\tAER\tAccuracyStd\tFARStd\tFRRStd\tAERStd");
    if with_macro {
        out.push_str("\tMacroAccuracy\tMacroFAR\tMacroFRR\tMacroAER");
    }
    out.push('\n');
    for (strategy, alpha, result) in rows {
        let _ = write!(out, "{}\t{}\t{}", dataset.name, dataset.feature_model, strategy);
        if with_alpha {
            let _ = write!(out, "\t{}", precision.score(alpha.unwrap_or(f64::NAN)));
        }
        let aggregate = &result.aggregate;
        let std = result.trial_std();
        let _ = write!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            precision.rate(aggregate.accuracy),
            precision.rate(aggregate.far),
            precision.rate(aggregate.frr),
            precision.rate(aggregate.aer),
            precision.rate(std.accuracy),
            precision.rate(std.far),
            precision.rate(std.frr),
            precision.rate(std.aer),
        );
        if with_macro {
            let m = &result.macro_average;
            let _ = write!(
                out,
                "\t{}\t{}\t{}\t{}",
                precision.rate(m.accuracy),
                precision.rate(m.far),
                precision.rate(m.frr),
                precision.rate(m.aer),
            );
        }
        out.push('\n');
    }
    out
}

fn per_writer_report(dataset: &Dataset, rows: &[ResultRow<'_>], precision: Precision) -> String {
    let with_alpha = rows.iter().any(|(_, alpha, _)| alpha.is_some());
    let mut out = String::from("Dataset\tFeature\tStrategy");
    if with_alpha {
        out.push_str("\tAlpha");
    }
    out.push_str("\tWriter\tAccuracy\tFAR\tFRR\tAER\tTP\tTN\tFP\tFN\n");
    for (strategy, alpha, result) in rows {
        for (writer_id, report) in &result.per_writer {
            let _ = write!(out, "{}\t{}\t{}", dataset.name, dataset.feature_model, strategy);
            if with_alpha {
                let _ = write!(out, "\t{}", precision.score(alpha.unwrap_or(f64::NAN)));
            }
            let c = &report.counts;
            let _ = writeln!(
                out,
                "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                writer_id,
                precision.rate(report.accuracy),
                precision.rate(report.far),
                precision.rate(report.frr),
                precision.rate(report.aer),
                c.true_positives,
                c.true_negatives,
                c.false_positives,
                c.false_negatives,
            );
        }
    }
    out
}

fn warn_skipped(rows: &[ResultRow<'_>]) {
    let mut seen = BTreeSet::new();
    for (_, _, result) in rows {
        for skip in &result.skipped {
            if seen.insert((skip.writer_id.clone(), skip.reason.clone())) {
                eprintln!("warning: writer {} skipped: {}", skip.writer_id, skip.reason);
            }
        }
    }
}

fn emit_protocol_reports(
    dataset: &Dataset,
    rows: &[ResultRow<'_>],
    with_macro: bool,
    out: Option<&Path>,
    per_writer: Option<&Path>,
    precision: Precision,
) -> Result<(), Error> {
    warn_skipped(rows);
    emit(&strategy_report(dataset, rows, with_macro, precision), out)?;
    if let Some(path) = per_writer {
        emit(&per_writer_report(dataset, rows, precision), Some(path))?;
    }
    Ok(())
}

fn cmd_evaluate(cmd: EvaluateCmd, seed: u64, precision: Precision) -> Result<u8, Error> {
    let dataset = load_dataset(&cmd.dataset)?;
    let config = cmd.config.to_config(seed)?;
    let result = run_protocol(&dataset, &config, cmd.strategy, cmd.trials)?;
    let rows = [(cmd.strategy, None, &result)];
    emit_protocol_reports(
        &dataset,
        &rows,
        cmd.macro_average,
        cmd.out.as_deref(),
        cmd.per_writer.as_deref(),
        precision,
    )?;
    Ok(0)
}

fn cmd_compare(cmd: CompareCmd, seed: u64, precision: Precision) -> Result<u8, Error> {
    let dataset = load_dataset(&cmd.dataset)?;
    let config = cmd.config.to_config(seed)?;
    let results = compare_strategies(&dataset, &config, &cmd.strategies, cmd.trials)?;
    let rows: Vec<ResultRow<'_>> = results
        .iter()
        .map(|(strategy, result)| (*strategy, None, result))
        .collect();
    emit_protocol_reports(
        &dataset,
        &rows,
        cmd.macro_average,
        cmd.out.as_deref(),
        cmd.per_writer.as_deref(),
        precision,
    )?;
    Ok(0)
}

fn cmd_sweep(cmd: SweepCmd, seed: u64, precision: Precision) -> Result<u8, Error> {
    let dataset = load_dataset(&cmd.dataset)?;
    let config = cmd.config.to_config(seed)?;
    let sweep = sweep_alpha(&dataset, &config, &cmd.alphas, cmd.strategy, cmd.trials)?;
    let rows: Vec<ResultRow<'_>> = sweep
        .iter()
        .map(|row| (cmd.strategy, Some(row.alpha), &row.result))
        .collect();
    emit_protocol_reports(
        &dataset,
        &rows,
        cmd.macro_average,
        cmd.out.as_deref(),
        cmd.per_writer.as_deref(),
        precision,
    )?;
    Ok(0)
}

fn cmd_synth(cmd: SynthCmd, seed: u64) -> Result<u8, Error> {
    let config = SyntheticConfig {
        num_writers: cmd.writers,
        n_genuine: cmd.genuine,
        n_forge: cmd.forged,
        dim: cmd.dim,
        genuine_spread: cmd.spread,
        forge_offset: cmd.offset,
        seed,
    };
    let dataset = generate_synthetic(&config)?;
    let manifest = save_dataset(&dataset, &cmd.out, cmd.format.0)?;
    println!("manifest\t{}", manifest.display());
    println!("writers\t{}", dataset.writers.len());
    println!("samples\t{}", dataset.num_samples());
    Ok(0)
}

fn cmd_stats(cmd: StatsCmd, precision: Precision) -> Result<u8, Error> {
    let dataset = load_dataset(&cmd.dataset)?;
    let stats = match &cmd.writer {
        Some(id) => {
            let writer = dataset
                .writer(id)
                .ok_or_else(|| Error::WriterNotFound(id.clone()))?;
            class_feature_stats(writer.all())?
        }
        None => class_feature_stats(dataset.writers.iter().flat_map(|w| w.all()))?,
    };
    let mut report = String::from("Dataset\tFeature\tMeasure\tGenuine\tForge\tDifference\n");
    let _ = writeln!(
        report,
        "{}\t{}\tmean\t{}\t{}\t{}",
        dataset.name,
        dataset.feature_model,
        precision.score(stats.genuine.mean),
        precision.score(stats.forged.mean),
        precision.score(stats.mean_difference()),
    );
    let _ = writeln!(
        report,
        "{}\t{}\tstd\t{}\t{}\t{}",
        dataset.name,
        dataset.feature_model,
        precision.score(stats.genuine.std),
        precision.score(stats.forged.std),
        precision.score(stats.std_difference()),
    );
    emit(&report, cmd.out.as_deref())?;
    Ok(0)
}

fn cmd_convert(cmd: ConvertCmd) -> Result<u8, Error> {
    let report = convert_npy_dir(
        &cmd.input,
        &cmd.out,
        &cmd.name,
        &cmd.feature_model,
        cmd.format.0,
    )?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    println!("manifest\t{}", report.manifest.display());
    println!("writers\t{}", report.writers);
    println!("samples\t{}", report.samples);
    Ok(0)
}
