fn main() {
    std::process::exit(hctc_cli::main_with_args(std::env::args_os()));
}
