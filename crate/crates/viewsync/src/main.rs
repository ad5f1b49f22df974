//! CLI: run a scenario under one seed or a seed range, check the trace,
//! and print a report. Exit status: 0 all checks passed, 1 a check or
//! safety invariant failed, 2 bad usage or configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use viewsync::checker;
use viewsync::report::{summary_line, RunReport};
use viewsync::scenario::Scenario;
use viewsync::sim::{ProtocolKind, World};

#[derive(Parser, Debug)]
#[command(name = "viewsync", about = "Deterministic view-synchronizer and consensus simulator")]
struct Args {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,

    /// Single seed to run.
    #[arg(long, default_value_t = 0, conflicts_with = "seeds")]
    seed: u64,

    /// Inclusive seed range, e.g. 0..99.
    #[arg(long)]
    seeds: Option<String>,

    /// Override the scenario's protocol.
    #[arg(long)]
    protocol: Option<String>,

    /// Directory to write trace (.jsonl) and report (.json) files into.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Run only, skip property checking.
    #[arg(long)]
    no_check: bool,

    /// Print full per-run reports instead of one summary line per seed.
    #[arg(long)]
    verbose: bool,
}

fn parse_seeds(s: &str) -> Option<(u64, u64)> {
    let (a, b) = s.split_once("..")?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn parse_protocol(s: &str) -> Option<ProtocolKind> {
    Some(match s {
        "none" => ProtocolKind::None,
        "hotstuff3" => ProtocolKind::Hotstuff3,
        "hotstuff2" => ProtocolKind::Hotstuff2,
        "pbft" => ProtocolKind::Pbft,
        "sbft" => ProtocolKind::Sbft,
        "sbft-no-timer" => ProtocolKind::SbftNoTimer,
        "tendermint" => ProtocolKind::Tendermint,
        _ => return None,
    })
}

fn main() -> ExitCode {
    let args = Args::parse();

    let text = match std::fs::read_to_string(&args.scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.scenario.display());
            return ExitCode::from(2);
        }
    };
    let mut scenario = match Scenario::from_toml(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(p) = &args.protocol {
        match parse_protocol(p) {
            Some(kind) => scenario.protocol.kind = kind,
            None => {
                eprintln!("error: unknown protocol {p:?}");
                return ExitCode::from(2);
            }
        }
    }

    let (lo, hi) = match &args.seeds {
        Some(s) => match parse_seeds(s) {
            Some(r) if r.0 <= r.1 => r,
            _ => {
                eprintln!("error: --seeds expects A..B with A <= B");
                return ExitCode::from(2);
            }
        },
        None => (args.seed, args.seed),
    };

    if let Some(dir) = &args.out {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    }

    let name = args
        .scenario
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    let mut failures = 0usize;

    for seed in lo..=hi {
        let build = scenario.build(seed);
        let protocol = build.protocol;
        let mut world = World::new(build.clone());
        let fault = world.run().err();
        if fault.is_some() {
            failures += 1;
        }

        let report = if args.no_check {
            let m = checker::Metrics::from_trace(&world.trace, &build);
            RunReport::new(&name, protocol, seed, fault, world.max_mailbox, &m, &[])
        } else {
            let (m, verdicts) = checker::check_all(&world.trace, &build);
            let r = RunReport::new(&name, protocol, seed, fault, world.max_mailbox, &m, &verdicts);
            if !r.ok() {
                failures += 1;
            }
            r
        };

        if args.verbose || lo == hi {
            print!("{}", report.to_text());
        } else {
            println!("{}", summary_line(&report));
        }

        if let Some(dir) = &args.out {
            let trace_path = dir.join(format!("{name}-seed{seed}.trace.jsonl"));
            let report_path = dir.join(format!("{name}-seed{seed}.report.json"));
            if let Err(e) = std::fs::write(&trace_path, world.trace.to_jsonl())
                .and_then(|_| std::fs::write(&report_path, report.to_json()))
            {
                eprintln!("error: writing outputs: {e}");
                return ExitCode::from(2);
            }
        }
    }

    if failures > 0 {
        eprintln!("{failures} failing run(s)");
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
