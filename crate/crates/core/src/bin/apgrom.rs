fn main() {
    std::process::exit(apgrom::cli::main_with_args(std::env::args_os()));
}
