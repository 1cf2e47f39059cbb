fn main() {
    std::process::exit(adacq::cli::main_with_args(std::env::args_os()));
}
