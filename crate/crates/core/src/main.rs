fn main() {
    std::process::exit(uscsim::cli::main_with_args(std::env::args_os()));
}
