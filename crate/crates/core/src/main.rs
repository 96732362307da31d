fn main() {
    std::process::exit(repeater_fd::cli::main_with_args(std::env::args_os()));
}
