fn main() {
    std::process::exit(sparse_scatter::cli::main_with_args(std::env::args_os()));
}
