mod cli;

fn main() {
    match cli::run() {
        Ok(()) => {}
        Err(cli::CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(cli::CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
