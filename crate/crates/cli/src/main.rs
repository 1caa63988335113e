use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::Parser;
use mploc_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cancel = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&cancel);
    // A second interrupt falls through to the default handler only after the
    // partial ensemble has been flushed, so ignore registration failures.
    let _ = ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed));
    match run(&cli.command, Some(cancel)) {
        Ok(done) => {
            for line in &done.summary {
                println!("{line}");
            }
            println!("wrote {}", done.dir.display());
            ExitCode::from(done.record.status.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
