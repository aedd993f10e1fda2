use clap::Parser;

fn main() {
    let cli = hetfb::cli::Cli::parse();
    let stdout = std::io::stdout();
    if let Err(e) = hetfb::cli::run(&cli, &mut stdout.lock()) {
        eprintln!("{}", e.record());
        std::process::exit(e.exit_code());
    }
}
