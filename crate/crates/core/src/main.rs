use clap::Parser;

fn main() {
    // clap exits with code 2 on usage errors; runtime failures exit 1.
    let cli = vcdet::cli::Cli::parse();
    if let Err(err) = vcdet::cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
