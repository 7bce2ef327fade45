fn main() {
    std::process::exit(evdvsr_cli::main_with_args(std::env::args_os()));
}
