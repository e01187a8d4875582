use std::process::ExitCode;

fn main() -> ExitCode {
    photomesh::cli::main(std::env::args_os())
}
