use clap::Parser;

fn main() {
    spinread::cli::init_threads();
    let cli = spinread::cli::Cli::parse();
    if let Err(e) = spinread::cli::run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(1);
    }
}
