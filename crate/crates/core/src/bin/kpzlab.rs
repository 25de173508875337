fn main() {
    std::process::exit(kpzlab::cli::main_with_args(std::env::args_os()));
}
