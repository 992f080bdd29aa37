fn main() {
    std::process::exit(hobn::cli::main_with_args(std::env::args_os()));
}
