fn main() {
    std::process::exit(spindirac::cli::run(std::env::args_os()));
}
