use clap::Parser;

fn main() {
    let cli = ergonull_cli::Cli::parse();
    std::process::exit(ergonull_cli::run(cli));
}
