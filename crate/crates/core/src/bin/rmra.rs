fn main() {
    std::process::exit(rmra::cli::main_with_args(std::env::args_os()));
}
