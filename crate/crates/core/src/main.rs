fn main() {
    std::process::exit(wildflow::cli::run(std::env::args_os()));
}
