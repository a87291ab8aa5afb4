fn main() -> std::process::ExitCode {
    topicbridge::cli::main()
}
