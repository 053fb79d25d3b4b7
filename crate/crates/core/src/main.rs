use std::panic;
use std::process::ExitCode;

use chiral_qfim::cli;

fn main() -> ExitCode {
    panic::set_hook(Box::new(|info| {
        eprintln!("internal error: {info}");
    }));
    let code = panic::catch_unwind(|| cli::run(std::env::args_os())).unwrap_or(cli::EXIT_NUMERIC);
    ExitCode::from(code as u8)
}
