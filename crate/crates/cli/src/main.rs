use clap::Parser;
use vtraffic_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("vtraffic: {e}");
        std::process::exit(e.exit_code());
    }
}
