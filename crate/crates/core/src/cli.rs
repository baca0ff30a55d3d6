//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 bad input data, 4 empty or unknown
//! selection, 70 internal error. Output files are written atomically, so a
//! failed run leaves nothing behind.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fixtures;
use crate::geo_zone::RegionCode;
use crate::mud_kit::{
    compare_sweep, ecs_collapse, generate_mud, groups_to_toml, load_groups, parse_mud,
    serialize_mud, suggest_groups, sweep_csv, unify, AceTemplate, Direction, MudError, MudFile,
    Port, Protocol, DEFAULT_REGION_ALIASES,
};
use crate::resolver_sim::{Scenario, SimError};
use crate::traffic_analysis::{
    ingest_log, matrix_csv, ratio_to_decimal, series_csv, AnalysisError, Analyzer, CaptureLog,
    Similarity, DEFAULT_POOL_THRESHOLD,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_SELECTION: i32 = 4;
pub const EXIT_INTERNAL: i32 = 70;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Selection(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Selection(_) => EXIT_SELECTION,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::UnknownDevice(_) | AnalysisError::EmptySelection { .. } => {
                CliError::Selection(e.to_string())
            }
            AnalysisError::InvalidArgument(_) => CliError::Usage(e.to_string()),
            AnalysisError::Parse { .. } | AnalysisError::Io(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<MudError> for CliError {
    fn from(e: MudError) -> Self {
        match e {
            MudError::EmptyDomainSet => CliError::Selection(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "geoecs", version, about = "Client-subnet resolution scenarios, IoT DNS log metrics and MUD tooling")]
pub struct Cli {
    /// Seed for generated fixtures.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write a JSON run report (command, input and output digests, summary).
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resolution scenarios.
    #[command(subcommand)]
    Scenario(ScenarioCmd),
    /// Metrics over a capture log.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// MUD file workflows.
    #[command(subcommand)]
    Mud(MudCmd),
    /// Write a synthetic input file.
    Fixture(FixtureArgs),
}

#[derive(Debug, Subcommand)]
enum ScenarioCmd {
    /// Run one scenario file and write its hop transcript as CSV.
    Run {
        file: PathBuf,
        /// Zone file to use instead of the one the scenario names.
        #[arg(long)]
        zone: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct LogArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    device: String,
    #[arg(long, default_value_t = DEFAULT_POOL_THRESHOLD)]
    pool_threshold: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum AnalyzeCmd {
    /// Similarity with the IP location fixed and two user-defined locations.
    Uds {
        #[command(flatten)]
        common: LogArgs,
        #[arg(long)]
        ip_location: RegionCode,
        #[arg(long, value_delimiter = ',', required = true)]
        user_locations: Vec<RegionCode>,
    },
    /// Similarity with the user-defined location fixed and two IP locations.
    Ipbs {
        #[command(flatten)]
        common: LogArgs,
        #[arg(long)]
        user_location: RegionCode,
        #[arg(long, value_delimiter = ',', required = true)]
        ip_locations: Vec<RegionCode>,
    },
    /// Time at which the selection's domain set stops growing.
    Stabilize {
        #[command(flatten)]
        common: LogArgs,
        #[arg(long)]
        ip_location: RegionCode,
        #[arg(long)]
        user_location: RegionCode,
    },
    /// Cumulative distinct domains and addresses per bucket.
    Cumulative {
        #[command(flatten)]
        common: LogArgs,
        #[arg(long)]
        ip_location: RegionCode,
        #[arg(long)]
        user_location: RegionCode,
        #[arg(long, default_value_t = fixtures::DAY)]
        bucket_seconds: u64,
    },
    /// User-defined similarity between every pair of regions.
    Matrix {
        #[command(flatten)]
        common: LogArgs,
        #[arg(long)]
        ip_location: RegionCode,
        #[arg(long, value_delimiter = ',', required = true)]
        regions: Vec<RegionCode>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    ToDevice,
    FromDevice,
}

#[derive(Debug, Subcommand)]
enum MudCmd {
    /// Build a MUD file from the domains of one log selection.
    Generate {
        #[command(flatten)]
        common: LogArgs,
        #[arg(long)]
        ip_location: RegionCode,
        #[arg(long)]
        user_location: RegionCode,
        #[arg(long, default_value = "tcp")]
        protocol: String,
        #[arg(long, default_value = "any")]
        source_port: String,
        #[arg(long, default_value = "443")]
        destination_port: String,
        #[arg(long, value_enum, default_value_t = DirectionArg::FromDevice)]
        direction: DirectionArg,
    },
    /// Union of several MUD files of one device.
    Unify {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace regional domain variants by their canonical name.
    Collapse {
        file: PathBuf,
        #[arg(long)]
        groups: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unified versus collapsed domain counts as locations are added, in argument order.
    Compare {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        groups: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propose region groups for a MUD file's domains (review before use).
    Suggest {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        regions: Vec<RegionCode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FixtureKind {
    /// Camera whose domain follows the user-defined location.
    YiLog,
    /// One domain, a fresh address every day.
    GrowingLog,
    /// Per-region MUD files plus a group file (`--out` is a directory).
    MiMuds,
}

#[derive(Debug, Args)]
struct FixtureArgs {
    #[arg(value_enum)]
    kind: FixtureKind,
    #[arg(long)]
    out: PathBuf,
    /// Days for growing-log, regions for mi-muds.
    #[arg(long)]
    size: Option<u32>,
    /// Shared domains for mi-muds.
    #[arg(long, default_value_t = 2)]
    shared: usize,
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunReport {
    command: Vec<String>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    summary: serde_json::Map<String, serde_json::Value>,
    unix_time: u64,
}

/// Inputs read and outputs produced, for the run report.
#[derive(Default)]
struct Run {
    inputs: Vec<(PathBuf, Vec<u8>)>,
    outputs: Vec<(PathBuf, Vec<u8>)>,
    summary: serde_json::Map<String, serde_json::Value>,
    stdout: Vec<u8>,
}

impl Run {
    fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        self.inputs.push((path.to_path_buf(), bytes.clone()));
        Ok(bytes)
    }

    fn note_input(&mut self, path: &Path) -> Result<(), CliError> {
        self.read(path).map(|_| ())
    }

    fn log(&mut self, path: &Path) -> Result<CaptureLog, CliError> {
        self.note_input(path)?;
        let log = ingest_log(path)?;
        if log.was_resorted() {
            eprintln!("warning: {} was not in time order; records were sorted", path.display());
            self.summary.insert("log_resorted".into(), true.into());
        }
        Ok(log)
    }

    fn mud(&mut self, path: &Path) -> Result<MudFile, CliError> {
        let bytes = self.read(path)?;
        parse_mud(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    /// Stage output for `path`, or stdout when absent.
    fn emit(&mut self, path: Option<&Path>, bytes: Vec<u8>) {
        match path {
            Some(p) => self.outputs.push((p.to_path_buf(), bytes)),
            None => self.stdout.extend(bytes),
        }
    }

    fn set(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.summary.insert(key.into(), value.into());
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write via a temporary file in the target directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn similarity_csv(name: &str, value: &Similarity) -> Vec<u8> {
    format!("metric,value,exact\n{name},{},{value}\n", ratio_to_decimal(value, 6)).into_bytes()
}

fn template(
    protocol: &str,
    source_port: &str,
    destination_port: &str,
    direction: DirectionArg,
) -> Result<AceTemplate, CliError> {
    let usage = |e: MudError| CliError::Usage(e.to_string());
    Ok(AceTemplate {
        protocol: protocol.parse::<Protocol>().map_err(usage)?,
        source_port: source_port.parse::<Port>().map_err(usage)?,
        destination_port: destination_port.parse::<Port>().map_err(usage)?,
        direction: match direction {
            DirectionArg::ToDevice => Direction::ToDevice,
            DirectionArg::FromDevice => Direction::FromDevice,
        },
    })
}

fn execute(cli: &Cli, run: &mut Run) -> Result<(), CliError> {
    match &cli.command {
        Command::Scenario(ScenarioCmd::Run { file, zone, out }) => {
            run.note_input(file)?;
            if let Some(z) = zone {
                run.note_input(z)?;
            }
            let scenario = Scenario::load_with_zone(file, zone.as_deref())?;
            if zone.is_none() {
                run.note_input(&scenario.zone_path)?;
            }
            let transcript = scenario.run()?;
            let answers: Vec<String> =
                transcript.final_answers().iter().map(|a| a.to_string()).collect();
            run.set("architecture", scenario.architecture.to_string());
            run.set("final_answers", answers);
            run.emit(out.as_deref(), transcript.to_csv().into_bytes());
        }
        Command::Analyze(cmd) => analyze(cmd, run)?,
        Command::Mud(cmd) => mud(cmd, run)?,
        Command::Fixture(args) => fixture(args, cli.seed, run)?,
    }
    Ok(())
}

fn analyze(cmd: &AnalyzeCmd, run: &mut Run) -> Result<(), CliError> {
    let common = match cmd {
        AnalyzeCmd::Uds { common, .. }
        | AnalyzeCmd::Ipbs { common, .. }
        | AnalyzeCmd::Stabilize { common, .. }
        | AnalyzeCmd::Cumulative { common, .. }
        | AnalyzeCmd::Matrix { common, .. } => common,
    };
    let pair = |flag: &str, v: &[RegionCode]| -> Result<(RegionCode, RegionCode), CliError> {
        match v {
            [a, b] => Ok((*a, *b)),
            _ => Err(CliError::Usage(format!("{flag} takes exactly two regions"))),
        }
    };
    let log = run.log(&common.log)?;
    let a = Analyzer::new(&log).with_pool_threshold(common.pool_threshold);
    let dev = common.device.as_str();
    let out = common.out.as_deref();
    match cmd {
        AnalyzeCmd::Uds {
            ip_location,
            user_locations,
            ..
        } => {
            let (x, y) = pair("--user-locations", user_locations)?;
            let v = a.uds(dev, *ip_location, x, y)?;
            run.set("uds", v.to_string());
            run.emit(out, similarity_csv("uds", &v));
        }
        AnalyzeCmd::Ipbs {
            user_location,
            ip_locations,
            ..
        } => {
            let (x, y) = pair("--ip-locations", ip_locations)?;
            let v = a.ipbs(dev, *user_location, x, y)?;
            run.set("ipbs", v.to_string());
            run.emit(out, similarity_csv("ipbs", &v));
        }
        AnalyzeCmd::Stabilize {
            ip_location,
            user_location,
            ..
        } => {
            let t = a.stabilization_time(dev, *ip_location, *user_location)?;
            run.set("stabilization_time", t);
            let cell = t.map(|t| t.to_string()).unwrap_or_default();
            run.emit(out, format!("stabilization_time\n{cell}\n").into_bytes());
        }
        AnalyzeCmd::Cumulative {
            ip_location,
            user_location,
            bucket_seconds,
            ..
        } => {
            let pts = a.cumulative_counts(dev, *ip_location, *user_location, *bucket_seconds)?;
            run.set("buckets", pts.len());
            run.emit(out, series_csv(&pts).into_bytes());
        }
        AnalyzeCmd::Matrix {
            ip_location,
            regions,
            ..
        } => {
            let m = a.similarity_matrix(dev, *ip_location, regions)?;
            run.set("regions", regions.len());
            run.emit(out, matrix_csv(regions, &m).into_bytes());
        }
    }
    Ok(())
}

fn mud(cmd: &MudCmd, run: &mut Run) -> Result<(), CliError> {
    match cmd {
        MudCmd::Generate {
            common,
            ip_location,
            user_location,
            protocol,
            source_port,
            destination_port,
            direction,
        } => {
            let t = template(protocol, source_port, destination_port, *direction)?;
            let log = run.log(&common.log)?;
            let ds = Analyzer::new(&log)
                .with_pool_threshold(common.pool_threshold)
                .domain_set(&common.device, *ip_location, *user_location, None)?;
            let m = generate_mud(&ds, &common.device, &t)?;
            run.set("aces", m.acl().len());
            run.emit(common.out.as_deref(), serialize_mud(&m));
        }
        MudCmd::Unify { files, out } => {
            let muds = files.iter().map(|f| run.mud(f)).collect::<Result<Vec<_>, _>>()?;
            let u = unify(&muds)?;
            run.set("domains", u.domains().len());
            run.emit(out.as_deref(), serialize_mud(&u));
        }
        MudCmd::Collapse { file, groups, out } => {
            let m = run.mud(file)?;
            run.note_input(groups)?;
            let g = load_groups(groups)?;
            let (c, report) = ecs_collapse(&m, &g)?;
            for (canonical, region, variant) in &report.unmatched {
                eprintln!("warning: {canonical}: variant {variant} ({region}) not in input");
            }
            for (canonical, n) in &report.splits {
                eprintln!("warning: {canonical}: variants disagree, kept {n} entries");
            }
            run.set("unmatched_variants", report.unmatched.len());
            run.set("tuple_splits", report.splits.len());
            run.set("domains_before", m.domains().len());
            run.set("domains_after", c.domains().len());
            run.emit(out.as_deref(), serialize_mud(&c));
        }
        MudCmd::Compare { files, groups, out } => {
            let muds = files.iter().map(|f| run.mud(f)).collect::<Result<Vec<_>, _>>()?;
            run.note_input(groups)?;
            let g = load_groups(groups)?;
            let rows = compare_sweep(&muds, &g)?;
            if let Some(last) = rows.last() {
                run.set("final_ratio", last.ratio.to_string());
            }
            run.emit(out.as_deref(), sweep_csv(&rows).into_bytes());
        }
        MudCmd::Suggest { file, regions, out } => {
            let m = run.mud(file)?;
            let ds = crate::traffic_analysis::DomainSet::literal(m.domains().into_iter().cloned());
            let g = suggest_groups(&ds, regions, &DEFAULT_REGION_ALIASES);
            run.set("groups", g.len());
            run.emit(out.as_deref(), groups_to_toml(&g).into_bytes());
        }
    }
    Ok(())
}

fn fixture(args: &FixtureArgs, seed: u64, run: &mut Run) -> Result<(), CliError> {
    match args.kind {
        FixtureKind::YiLog => {
            run.emit(Some(&args.out), fixtures::yi_camera_log(seed).to_text().into_bytes());
        }
        FixtureKind::GrowingLog => {
            let days = args.size.unwrap_or(10);
            run.emit(Some(&args.out), fixtures::growing_ip_log(days, seed).to_text().into_bytes());
        }
        FixtureKind::MiMuds => {
            let regions = args.size.unwrap_or(fixtures::MI_REGIONS.len() as u32) as usize;
            if regions == 0 || regions > fixtures::MI_REGIONS.len() {
                return Err(CliError::Usage(format!(
                    "--size must be between 1 and {}",
                    fixtures::MI_REGIONS.len()
                )));
            }
            std::fs::create_dir_all(&args.out)
                .map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
            let (muds, groups) = fixtures::mi_mud_fixture(regions, args.shared);
            for (i, (m, r)) in muds.iter().zip(fixtures::MI_REGIONS).enumerate() {
                let name = format!("{:02}-{}.json", i + 1, r.to_ascii_lowercase());
                run.emit(Some(&args.out.join(name)), serialize_mud(m));
            }
            run.emit(Some(&args.out.join("groups.toml")), groups_to_toml(&groups).into_bytes());
        }
    }
    Ok(())
}

fn finish(cli: &Cli, argv: &[String], run: Run) -> Result<(), CliError> {
    for (path, bytes) in &run.outputs {
        write_atomic(path, bytes)?;
    }
    if !run.stdout.is_empty() {
        std::io::stdout()
            .write_all(&run.stdout)
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    if let Some(path) = &cli.report {
        let digest = |(p, b): &(PathBuf, Vec<u8>)| FileDigest {
            path: p.display().to_string(),
            sha256: sha256_hex(b),
        };
        let report = RunReport {
            command: argv.to_vec(),
            inputs: run.inputs.iter().map(digest).collect(),
            outputs: run.outputs.iter().map(digest).collect(),
            summary: run.summary,
            unix_time: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut bytes = serde_json::to_vec_pretty(&report)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)?;
    }
    Ok(())
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut state = Run::default();
    let result = execute(&cli, &mut state).and_then(|()| finish(&cli, &argv, state));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
