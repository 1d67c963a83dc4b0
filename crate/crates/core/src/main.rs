fn main() {
    std::process::exit(bonsai::cli::main_with(std::env::args_os()));
}
