fn main() {
    std::process::exit(flexquant::cli::main_with_args(std::env::args_os()));
}
