use clap::Parser;
use rmab_core::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    if let Err(e) = execute(cli, &mut stdout.lock()) {
        eprintln!("rmab: {e}");
        std::process::exit(1);
    }
}
