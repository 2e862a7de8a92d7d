use clap::Parser;
use critkill_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = critkill_cli::run(cli) {
        eprintln!("{}", e.diagnostic());
        std::process::exit(e.exit_code());
    }
}
