//! Argument handling and output formats for the `qtel` binary.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use qtel_core::attacks::{AdversaryModel, AttackKind};
use qtel_core::modified::ModifiedPairRecord;
use qtel_core::protocol::{CheckKind, Duplex, PairRecord, ProtocolKind, SimulationConfig};
use qtel_core::qcore::{ChshSettings, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// A fully resolved run: simulation parameters plus where and how to write the report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub config: SimulationConfig,
    pub format: Format,
    /// `None` writes to standard output.
    pub out: Option<PathBuf>,
}

/// A rejected command line. `Display` is a single line naming the offending flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UsageError {
    /// `--help` or `--version`; the text goes to stdout and the exit status is 0.
    Info(String),
    Invalid(String),
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UsageError::Info(s) | UsageError::Invalid(s) => f.write_str(s),
        }
    }
}

impl std::error::Error for UsageError {}

fn invalid(flag: &str, msg: impl fmt::Display) -> UsageError {
    UsageError::Invalid(format!("--{flag}: {msg}"))
}

/// Simulate the bidirectional Bell-pair key distribution protocol.
///
/// Every option may also be given in a key=value config file using the
/// option name without dashes; the command line takes precedence.
#[derive(Debug, Parser)]
#[command(name = "qtel", version, allow_negative_numbers = true)]
struct Args {
    /// Config file of key=value lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// base | modified [default: base]
    #[arg(long)]
    protocol: Option<String>,
    /// none | ir | qmm | qmm-swap [default: none]
    #[arg(long)]
    attack: Option<String>,
    /// Number of pairs to simulate [default: 10000]
    #[arg(long, value_name = "N")]
    pairs: Option<String>,
    /// Probability that a pair is a control round, in [0, 1) [default: 0.25]
    #[arg(long = "control-prob", value_name = "C")]
    control_prob: Option<String>,
    /// chsh | qber [default: chsh]
    #[arg(long)]
    check: Option<String>,
    /// separate | full [default: separate]
    #[arg(long)]
    duplex: Option<String>,
    /// Session seed [default: 0]
    #[arg(long, value_name = "S")]
    seed: Option<String>,
    /// CHSH angles a11,a12,a21,a22 in radians [default: 0,pi/2,3pi/4,pi/4]
    #[arg(long, value_name = "ANGLES", allow_hyphen_values = true)]
    settings: Option<String>,
    /// json | csv [default: json]
    #[arg(long)]
    format: Option<String>,
    /// Report path; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<String>,
}

const KEYS: [&str; 10] = [
    "protocol",
    "attack",
    "pairs",
    "control-prob",
    "check",
    "duplex",
    "seed",
    "settings",
    "format",
    "out",
];

/// Parses key=value lines. Blank lines and lines starting with `#` are skipped.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| invalid("config", format!("line {}: expected key=value", n + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(invalid(
                "config",
                format!("line {}: unknown key {key:?}", n + 1),
            ));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(invalid(
                "config",
                format!("line {}: {key} given twice", n + 1),
            ));
        }
    }
    Ok(out)
}

fn choice<T: Copy>(flag: &str, value: &str, options: &[(&str, T)]) -> Result<T, UsageError> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<_> = options.iter().map(|(n, _)| *n).collect();
            invalid(
                flag,
                format!("expected one of {}, got {value:?}", names.join("|")),
            )
        })
}

fn number<T: std::str::FromStr>(flag: &str, value: &str) -> Result<T, UsageError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| invalid(flag, format!("{value:?}: {e}")))
}

fn parse_settings(value: &str) -> Result<ChshSettings, UsageError> {
    let angles = value
        .split(',')
        .map(|a| number::<f64>("settings", a.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    match angles[..] {
        [a1, a2, b1, b2] if angles.iter().all(|a| a.is_finite()) => {
            Ok(ChshSettings::new([a1, a2], [b1, b2]))
        }
        [_, _, _, _] => Err(invalid("settings", "angles must be finite")),
        _ => Err(invalid(
            "settings",
            format!("expected 4 comma-separated angles, got {}", angles.len()),
        )),
    }
}

fn resolve(values: &BTreeMap<String, String>) -> Result<RunSpec, UsageError> {
    let get = |k: &str| values.get(k).map(String::as_str);
    let mut config = SimulationConfig::default();
    if let Some(v) = get("protocol") {
        config.protocol = choice(
            "protocol",
            v,
            &[
                ("base", ProtocolKind::Base),
                ("modified", ProtocolKind::Modified),
            ],
        )?;
    }
    if let Some(v) = get("attack") {
        let kind = choice(
            "attack",
            v,
            &[
                ("none", AttackKind::None),
                ("ir", AttackKind::InterceptResend),
                ("qmm", AttackKind::QmmSubstitute),
                ("qmm-swap", AttackKind::QmmSwap),
            ],
        )?;
        config.attack = AdversaryModel::new(kind);
    }
    if let Some(v) = get("pairs") {
        config.pairs = number("pairs", v)?;
        if config.pairs == 0 {
            return Err(invalid("pairs", "must be at least 1"));
        }
    }
    if let Some(v) = get("control-prob") {
        let c: f64 = number("control-prob", v)?;
        if !(0.0..1.0).contains(&c) {
            return Err(invalid("control-prob", format!("{c} is outside [0, 1)")));
        }
        config.control_probability = c;
    }
    if let Some(v) = get("check") {
        config.check = choice(
            "check",
            v,
            &[("chsh", CheckKind::Chsh), ("qber", CheckKind::Qber)],
        )?;
    }
    if let Some(v) = get("duplex") {
        config.duplex = choice(
            "duplex",
            v,
            &[("separate", Duplex::Separate), ("full", Duplex::Full)],
        )?;
    }
    if let Some(v) = get("seed") {
        config.seed = number("seed", v)?;
    }
    if let Some(v) = get("settings") {
        config.settings = parse_settings(v)?;
    }
    // range checks are done above, so what remains is the angle constraint
    config.validate().map_err(|e| invalid("settings", e))?;
    let format = match get("format") {
        Some(v) => choice("format", v, &[("json", Format::Json), ("csv", Format::Csv)])?,
        None => Format::Json,
    };
    let out = match get("out") {
        Some("") => return Err(invalid("out", "empty path")),
        Some(p) => Some(PathBuf::from(p)),
        None => None,
    };
    Ok(RunSpec {
        config,
        format,
        out,
    })
}

/// Parses a full argv (program name first), merging an optional config file.
pub fn parse_args<I, T>(argv: I) -> Result<RunSpec, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        let text = e.render().to_string();
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => UsageError::Info(text),
            _ => UsageError::Invalid(
                text.lines()
                    .next()
                    .unwrap_or("invalid arguments")
                    .trim_start_matches("error: ")
                    .to_string(),
            ),
        }
    })?;
    let mut values = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| invalid("config", format!("{}: {e}", path.display())))?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    let cli = [
        ("protocol", &args.protocol),
        ("attack", &args.attack),
        ("pairs", &args.pairs),
        ("control-prob", &args.control_prob),
        ("check", &args.check),
        ("duplex", &args.duplex),
        ("seed", &args.seed),
        ("settings", &args.settings),
        ("format", &args.format),
        ("out", &args.out),
    ];
    for (key, value) in cli {
        if let Some(v) = value {
            values.insert(key.to_string(), v.clone());
        }
    }
    resolve(&values)
}

/// One CSV row. Both protocol variants share the header; fields that do not
/// apply to a variant or mode are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub pair_index: u64,
    pub protocol: String,
    pub mode: String,
    pub encoder: Option<String>,
    pub bob_state: String,
    pub alice_basis: Option<String>,
    pub alice_angle: Option<f64>,
    pub bob_angle: Option<f64>,
    pub alice_outcomes: String,
    pub bob_outcome: Option<i8>,
    pub alice_decoded: Option<String>,
    pub bob_decoded: Option<String>,
    pub alice_pauli: Option<u8>,
    pub alice_target: Option<String>,
    pub check_error: Option<bool>,
    pub eve_substitute: Option<String>,
    pub eve_swap_outcome: Option<String>,
    pub eve_guess_alice: Option<u8>,
    pub eve_guess_bob: Option<u8>,
}

fn outcomes(list: &[Outcome]) -> String {
    list.iter()
        .map(|o| o.value().to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn debug_name<T: fmt::Debug>(v: T) -> String {
    format!("{v:?}")
}

impl From<&PairRecord> for CsvRow {
    fn from(r: &PairRecord) -> Self {
        let eve = r.eve_log.as_ref();
        CsvRow {
            pair_index: r.pair_index,
            protocol: "base".into(),
            mode: debug_name(r.mode),
            encoder: Some(debug_name(r.encoder)),
            bob_state: r.bob_state.to_string(),
            alice_basis: Some(debug_name(r.alice_basis)),
            alice_angle: Some(r.alice_angle),
            bob_angle: r.bob_angle,
            alice_outcomes: outcomes(&r.alice_outcomes),
            bob_outcome: r.bob_outcome.map(Outcome::value),
            alice_decoded: r.alice_decoded_state.map(|s| s.to_string()),
            bob_decoded: r.bob_decoded_basis.map(debug_name),
            alice_pauli: None,
            alice_target: None,
            check_error: r.check_error,
            eve_substitute: eve.and_then(|l| l.substitute_state).map(|s| s.to_string()),
            eve_swap_outcome: eve.and_then(|l| l.swap_outcome).map(|s| s.to_string()),
            eve_guess_alice: eve.and_then(|l| l.guessed_alice_bits),
            eve_guess_bob: eve.and_then(|l| l.guessed_bob_bits),
        }
    }
}

impl From<&ModifiedPairRecord> for CsvRow {
    fn from(r: &ModifiedPairRecord) -> Self {
        let eve = r.eve_log.as_ref();
        CsvRow {
            pair_index: r.pair_index,
            protocol: "modified".into(),
            mode: debug_name(r.mode),
            encoder: None,
            bob_state: r.bob_state.to_string(),
            alice_basis: r.control_basis.map(debug_name),
            alice_angle: r.control_basis.map(|b| b.observable().angle()),
            bob_angle: None,
            alice_outcomes: outcomes(&r.control_outcomes),
            bob_outcome: None,
            alice_decoded: r.alice_bell_outcome.map(|s| s.to_string()),
            bob_decoded: r.bob_decoded.map(|s| s.to_string()),
            alice_pauli: r.alice_pauli.map(|p| p.index()),
            alice_target: r.alice_target.map(|s| s.to_string()),
            check_error: r.control_passed.map(|p| !p),
            eve_substitute: eve.and_then(|l| l.substitute_state).map(|s| s.to_string()),
            eve_swap_outcome: eve.and_then(|l| l.swap_outcome).map(|s| s.to_string()),
            eve_guess_alice: eve.and_then(|l| l.guessed_alice_bits),
            eve_guess_bob: eve.and_then(|l| l.guessed_bob_bits),
        }
    }
}

pub fn csv_bytes<'a, R>(records: &'a [R]) -> csv::Result<Vec<u8>>
where
    &'a R: Into<CsvRow>,
{
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in records {
        writer.serialize(r.into())?;
    }
    writer.into_inner().map_err(|e| e.into_error().into())
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "not a file path"))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
