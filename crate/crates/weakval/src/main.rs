fn main() {
    std::process::exit(weakval::cli::main_with_args(std::env::args_os()));
}
