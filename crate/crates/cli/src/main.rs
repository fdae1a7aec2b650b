use std::process::ExitCode;

fn main() -> ExitCode {
    ftmf_cli::run()
}
