fn main() {
    std::process::exit(hdgpod::cli::main_with_args(std::env::args_os()));
}
