fn main() {
    std::process::exit(funcint::cli::main_with_args(std::env::args_os()));
}
