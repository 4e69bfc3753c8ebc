fn main() {
    std::process::exit(kylesim::cli::main_with_args(std::env::args_os()));
}
