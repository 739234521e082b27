fn main() -> std::process::ExitCode {
    thermopose::cli::main()
}
