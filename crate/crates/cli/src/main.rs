fn main() {
    std::process::exit(panc_risk::cli::main_with(std::env::args_os()));
}
