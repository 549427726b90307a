fn main() -> std::process::ExitCode {
    strathjb::cli::run(std::env::args_os())
}
