use clap::Parser;

fn main() {
    let args = irsopt::cli::Cli::parse();
    if let Err(e) = irsopt::cli::run(args) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
