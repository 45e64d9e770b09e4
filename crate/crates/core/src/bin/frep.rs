fn main() {
    std::process::exit(diffrep::cli::run(std::env::args_os()));
}
