fn main() {
    std::process::exit(sobext::cli::main_with_args(std::env::args_os()));
}
