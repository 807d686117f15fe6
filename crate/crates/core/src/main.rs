fn main() {
    std::process::exit(slicecast::cli::main_with_args(std::env::args_os()));
}
