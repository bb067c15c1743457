use clap::Parser;

fn main() {
    let cli = terraclass_cli::Cli::parse();
    if let Err(e) = terraclass_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(terraclass_cli::exit_code(&e));
    }
}
