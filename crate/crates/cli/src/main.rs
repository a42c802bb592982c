use std::io::Write;
use std::process::ExitCode;

use anyhow::{Context, Result};
use qtel_cli::{parse_args, write_atomic, CsvRow, Format, RunSpec, UsageError};
use qtel_core::analysis::{evasion_probability, RoundSummary, SimulationReport, Tally};
use qtel_core::modified::run_modified_pair;
use qtel_core::protocol::{run_pair, ProtocolKind};

fn main() -> ExitCode {
    let spec = match parse_args(std::env::args_os()) {
        Ok(spec) => spec,
        Err(UsageError::Info(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("qtel: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&spec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qtel: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(spec: &RunSpec) -> Result<()> {
    let config = &spec.config;
    let mut adversary = config.attack.build(config.protocol);
    let mut tally = Tally::default();
    let mut csv = (spec.format == Format::Csv).then(|| csv::Writer::from_writer(Vec::new()));

    fn record<R: RoundSummary>(
        r: &R,
        tally: &mut Tally,
        csv: &mut Option<csv::Writer<Vec<u8>>>,
    ) -> Result<()>
    where
        for<'a> &'a R: Into<CsvRow>,
    {
        tally.add(r);
        if let Some(w) = csv {
            w.serialize(r.into())?;
        }
        Ok(())
    }

    for index in 0..config.pairs {
        match config.protocol {
            ProtocolKind::Base => {
                let r = run_pair(config, adversary.as_mut(), index)?;
                record(&r, &mut tally, &mut csv)?;
            }
            ProtocolKind::Modified => {
                let r = run_modified_pair(config, adversary.as_mut(), index)?;
                record(&r, &mut tally, &mut csv)?;
            }
        }
    }

    let report = SimulationReport {
        config: config.clone(),
        tally,
    };
    let bytes = match csv {
        Some(w) => w.into_inner().map_err(|e| e.into_error())?,
        None => {
            let mut out = serde_json::to_vec_pretty(&report.document())?;
            out.push(b'\n');
            out
        }
    };
    match &spec.out {
        Some(path) => {
            write_atomic(path, &bytes).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    summarize(&report);
    Ok(())
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn summarize(report: &SimulationReport) {
    let doc = report.document();
    let c = &doc.config_echo;
    eprintln!(
        "{:?} protocol, attack {:?}, {} pairs, seed {}",
        c.protocol, c.attack.kind, doc.pairs, doc.seed
    );
    eprintln!("  control fraction      {}", show(doc.control_fraction));
    eprintln!(
        "  decode accuracy       alice {}  bob {}",
        show(doc.decode_accuracy_alice),
        show(doc.decode_accuracy_bob)
    );
    eprintln!("  eve guess accuracy    {}", show(doc.eve_guess_accuracy));
    eprintln!(
        "  error checks          {} checks, {} errors, d_hat {}",
        doc.detection.checks,
        doc.detection.errors,
        show(doc.d_hat)
    );
    if let Some(d) = doc.d_hat {
        if let Ok(p) = evasion_probability(c.control_probability, d, 10) {
            eprintln!("  evasion over 10 msgs  {p:.4}");
        }
    }
    for (state, bin) in &doc.chsh.per_state {
        eprintln!(
            "  CHSH {state:<5}           S {} +/- {}",
            show(bin.s_hat),
            show(bin.stderr)
        );
    }
    let e = doc.efficiency;
    eprintln!(
        "  efficiency            base {} (avg {}), modified {} (avg {})",
        e.base, e.base_avg, e.modified, e.modified_avg
    );
}
