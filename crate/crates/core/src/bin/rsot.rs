fn main() {
    std::process::exit(rsot::cli::main_with_args(std::env::args_os()));
}
