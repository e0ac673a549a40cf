use clap::Parser;

fn main() {
    let cli = pyramid_cli::Cli::parse();
    if let Err(e) = pyramid_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
