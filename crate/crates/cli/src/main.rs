fn main() {
    std::process::exit(pgnaa_cli::main_with_args(std::env::args_os()));
}
