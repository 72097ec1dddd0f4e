fn main() {
    std::process::exit(orsearch_cli::main_with_args(std::env::args_os()));
}
