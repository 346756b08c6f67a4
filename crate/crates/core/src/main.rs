fn main() -> std::process::ExitCode {
    rfqsrr::cli::main()
}
