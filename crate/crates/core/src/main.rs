fn main() {
    std::process::exit(shipflow::cli::main_with(std::env::args_os()));
}
