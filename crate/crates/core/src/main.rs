fn main() {
    std::process::exit(pipeleak::cli::main_with_args(std::env::args_os()));
}
