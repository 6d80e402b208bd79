use std::process::ExitCode;

use clap::Parser;
use dashsnap_cli::commands::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = String::new();
    let code = run(cli, &mut out);
    print!("{out}");
    ExitCode::from(code)
}
