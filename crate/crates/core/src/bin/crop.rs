fn main() {
    std::process::exit(crop::cli::main_with(std::env::args_os()));
}
