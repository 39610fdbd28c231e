fn main() {
    std::process::exit(ffde_cli::main_with_args(std::env::args_os()));
}
