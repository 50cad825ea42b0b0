fn main() {
    std::process::exit(aht_cli::main_with_args(std::env::args_os()));
}
