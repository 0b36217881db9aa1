fn main() {
    std::process::exit(neumann_lab::cli::main_with_args(std::env::args_os()));
}
