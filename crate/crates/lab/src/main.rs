use clap::Parser;
use monge_lab::cli::{execute, Cli, EXIT_ERROR};

fn main() {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    std::process::exit(code);
}
