use clap::Parser;

fn main() {
    let cli = apptrend::cli::Cli::parse();
    if let Err(e) = apptrend::cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
