use clap::Parser;

fn main() {
    if let Err(e) = madrl_cli::run(madrl_cli::Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
