fn main() {
    std::process::exit(spectralkit::cli::main_with_args(std::env::args_os()));
}
