use std::process::ExitCode;

fn main() -> ExitCode {
    npeb::cli::run()
}
