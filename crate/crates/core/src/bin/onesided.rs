fn main() {
    std::process::exit(onesided::cli::main_with_args(std::env::args_os()));
}
