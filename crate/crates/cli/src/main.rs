use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hdcpf::oam_d4::{transcript_check, HdBeamSplitter, Transcript};
use hdcpf::runner::{
    csv_files, emit, execute, parse_any, tallies_csv, to_json, Diagnostics, Netlist, OutputFormat, RunError, RunKind,
    RunResult,
};

/// Default output directory when `--out` is not given.
const OUT_ENV: &str = "HDCPF_OUT_DIR";

#[derive(Parser)]
#[command(name = "hdcpf", version, about = "Linear-optics simulator for a heralded OAM controlled phase-flip gate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run any netlist.
    Simulate(RunArgs),
    /// Run a cpf_d4 netlist (built-in pipeline if none given) and report fidelities.
    Fidelity(RunArgs),
    /// Run a lock netlist (defaults if none given) and report the residual phase error.
    Lock(RunArgs),
    /// Check the splitter against step-by-step transcripts.
    Transcript(TranscriptArgs),
    /// Parse and validate a netlist without running it.
    Validate {
        #[arg(long)]
        netlist: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Netlist file (line-oriented text, or JSON when it starts with `{`).
    #[arg(long)]
    netlist: Option<PathBuf>,
    /// Override the number of sampled events.
    #[arg(long)]
    shots: Option<u64>,
    /// Override the seed (sampling and noise draws).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; falls back to $HDCPF_OUT_DIR, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Exact probabilities only, no sampling.
    #[arg(long)]
    analytic: bool,
}

#[derive(Args)]
struct TranscriptArgs {
    /// Transcript file to check instead of the bundled ones.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PortChoice::Both)]
    port: PortChoice,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PortChoice {
    A,
    B,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run(a, None),
        Command::Fidelity(a) => run(a, Some(RunKind::CpfD4)),
        Command::Lock(a) => run(a, Some(RunKind::Lock)),
        Command::Transcript(a) => transcript(a),
        Command::Validate { netlist } => load(&netlist).map(|_| eprintln!("{}: ok", netlist.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Netlist diagnostics were already printed with their file name.
            if !matches!(e, RunError::Diagnostics(_)) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(path: &Path) -> Result<Netlist, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_any(&text).map_err(|d| {
        for x in &d.0 {
            eprintln!("{}: {x}", path.display());
        }
        RunError::Diagnostics(d)
    })
}

fn run(a: RunArgs, kind: Option<RunKind>) -> Result<(), RunError> {
    let mut n = match (&a.netlist, kind) {
        (Some(p), _) => load(p)?,
        (None, Some(RunKind::CpfD4)) => Netlist::cpf_d4(),
        (None, Some(RunKind::Lock)) => Netlist::lock(),
        (None, _) => return Err(usage("`simulate` needs --netlist")),
    };
    if let Some(k) = kind {
        if n.run.kind != k {
            return Err(usage(&format!("netlist has kind `{}`, this subcommand runs `{k}`", n.run.kind)));
        }
    }
    if let Some(s) = a.shots {
        n.run.shots = s;
    }
    if let Some(s) = a.seed {
        n.run.seed = s;
        n.noise.seed = s;
    }
    n.run.analytic |= a.analytic;
    let r = execute(&n)?;
    summarize(&r);

    let format = match a.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    match a.out.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)) {
        Some(dir) => {
            for p in emit(&r, &dir, format)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => print!("{}", stdout_text(&r, format)?),
    }
    Ok(())
}

fn stdout_text(r: &RunResult, format: OutputFormat) -> Result<String, RunError> {
    match format {
        OutputFormat::Json => to_json(r),
        OutputFormat::Csv if r.lock_trace.is_some() => {
            Ok(csv_files(r)?.into_iter().find(|(n, _)| n == "lock_trace.csv").map(|(_, t)| t).unwrap_or_default())
        }
        OutputFormat::Csv => tallies_csv(r),
    }
}

fn summarize(r: &RunResult) {
    if let Some(h) = r.heralding_probability {
        eprintln!("heralding probability  {h:.6}");
    }
    if let Some(f) = &r.fidelity {
        eprintln!("F_ZX {:.6}  F_XZ {:.6}  bounds [{:.6}, {:.6}]", f.f_zx, f.f_xz, f.bounds[0], f.bounds[1]);
    }
    if let Some(p) = r.process_fidelity {
        eprintln!("process fidelity       {p:.6}");
    }
    if let Some(l) = &r.lock {
        eprintln!("rms open {:.4} rad  closed {:.4} rad{}", l.rms_open, l.rms_closed, if l.diverged { "  (diverged)" } else { "" });
    }
}

fn transcript(a: TranscriptArgs) -> Result<(), RunError> {
    let runtime = |e| RunError::Runtime { context: "transcript".into(), source: e };
    let mut list = Vec::new();
    match &a.file {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| RunError::Io { path: p.display().to_string(), message: e.to_string() })?;
            list.push((p.display().to_string(), Transcript::parse(&text).map_err(runtime)?));
        }
        None => {
            if a.port != PortChoice::B {
                list.push(("port A".into(), Transcript::port_a()));
            }
            if a.port != PortChoice::A {
                list.push(("port B".into(), Transcript::port_b()));
            }
        }
    }
    let bs = HdBeamSplitter::standard();
    let mut failed = false;
    for (name, t) in list {
        let rep = transcript_check(&bs, &t).map_err(runtime)?;
        match rep.first_divergence {
            None => println!("{name}: {} amplitudes match", rep.lines_checked),
            Some(d) => {
                failed = true;
                println!(
                    "{name}: step {} input {} mode {}: expected {:.6}{:+.6}i, found {:.6}{:+.6}i",
                    d.step, d.input, d.mode, d.expected.re, d.expected.im, d.found.re, d.found.im
                );
            }
        }
    }
    if failed {
        return Err(RunError::Runtime {
            context: "transcript".into(),
            source: hdcpf::Error::InvalidParameter("simulation diverges from the transcript".into()),
        });
    }
    Ok(())
}

fn usage(msg: &str) -> RunError {
    eprintln!("{msg}");
    RunError::Diagnostics(Diagnostics(vec![hdcpf::runner::Diagnostic { line: 0, col: 0, message: msg.into() }]))
}
