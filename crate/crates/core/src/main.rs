fn main() {
    std::process::exit(promptraj::cli::run(std::env::args_os()));
}
