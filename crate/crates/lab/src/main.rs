fn main() {
    std::process::exit(qetlab::cli::main_with(std::env::args_os()));
}
