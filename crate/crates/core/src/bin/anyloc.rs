use std::process::ExitCode;

fn main() -> ExitCode {
    anyloc::cli::main()
}
