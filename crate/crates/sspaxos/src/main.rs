use std::process::ExitCode;

fn main() -> ExitCode {
    sspaxos::cli::main()
}
