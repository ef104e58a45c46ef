fn main() {
    std::process::exit(hardylab::main_with_args(std::env::args_os()));
}
