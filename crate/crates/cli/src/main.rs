fn main() {
    std::process::exit(mixnorm_cli::main_with_args(std::env::args_os()));
}
