fn main() {
    std::process::exit(dnls_gauge::cli::main_with(std::env::args_os()));
}
