use clap::Parser;

use sigarch::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.single_line());
        std::process::exit(e.exit_code());
    }
}
