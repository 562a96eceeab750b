fn main() -> std::process::ExitCode {
    labelcommons_server::cli::main()
}
