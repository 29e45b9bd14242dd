use clap::Parser;

fn main() {
    let cli = samlab_cli::Cli::parse();
    if let Err(e) = samlab_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
