use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;
use hardylab_cli::batch::{parse_entries, run_entries};
use hardylab_cli::report::{exit_code, write_csv_many, write_csv_single};
use hardylab_cli::{dispatch, Cli, Command, Format, Globals, Report, RunConfig};

fn emit(g: &Globals, reports: &[Report], single: bool) -> io::Result<()> {
    let out: Box<dyn Write> = match &g.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let mut out = out;
    match (g.format, single) {
        (Format::Json, true) => serde_json::to_writer_pretty(&mut out, &reports[0])?,
        (Format::Json, false) => serde_json::to_writer_pretty(&mut out, reports)?,
        (Format::Csv, true) => write_csv_single(&reports[0], &mut out)?,
        (Format::Csv, false) => write_csv_many(reports, &mut out)?,
    }
    if g.format == Format::Json {
        writeln!(out)?;
    }
    out.flush()
}

fn run(cli: Cli) -> Result<(Vec<Report>, bool), String> {
    let g = &cli.globals;
    match cli.command {
        Command::Batch(b) => {
            let text = std::fs::read_to_string(&b.file).map_err(|e| format!("{}: {e}", b.file.display()))?;
            let entries = parse_entries(&b.file, &text).map_err(|e| e.to_string())?;
            Ok((run_entries(&entries, g.seed, g.tol), false))
        }
        command => {
            let cfg = RunConfig { command, seed: g.seed, tol: g.tol };
            Ok((vec![dispatch(&cfg)], true))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let globals = cli.globals.clone();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = globals.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (reports, single) = match pool.install(|| run(cli)) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    for r in &reports {
        if let Some(e) = &r.error {
            eprintln!("{}: {}", r.command, e.message);
        }
    }
    if let Err(e) = emit(&globals, &reports, single) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(exit_code(&reports, single) as u8)
}
