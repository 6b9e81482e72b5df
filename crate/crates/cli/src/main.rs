use clap::Parser;
use protoselect_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(err) = protoselect_cli::run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
