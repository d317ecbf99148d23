use clap::Parser;

fn main() {
    let cli = calibcc_cli::Cli::parse();
    if let Err(e) = calibcc_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
