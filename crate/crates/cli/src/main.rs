fn main() {
    std::process::exit(kerr_cli::main_with_args(std::env::args_os()));
}
