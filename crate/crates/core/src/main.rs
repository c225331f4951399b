fn main() -> std::process::ExitCode {
    playcall::cli::main()
}
