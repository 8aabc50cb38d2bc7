use clap::Parser;

fn main() {
    let cli = hedge_cli::Cli::parse();
    if let Err(e) = hedge_cli::run(cli) {
        eprintln!("hedge: {e}");
        std::process::exit(e.exit_code());
    }
}
