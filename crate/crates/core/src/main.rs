fn main() {
    std::process::exit(cubenet::cli::main_with_args(std::env::args_os()));
}
