fn main() {
    std::process::exit(marginbn::cli::run(std::env::args_os()));
}
