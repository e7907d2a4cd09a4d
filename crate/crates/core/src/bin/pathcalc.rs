fn main() {
    std::process::exit(pathcalc::cli::main_with_args(std::env::args_os()));
}
