fn main() {
    std::process::exit(rvwalk::cli::main_with_args(std::env::args_os()));
}
