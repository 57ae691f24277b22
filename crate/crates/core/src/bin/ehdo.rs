fn main() {
    std::process::exit(ehdo::cli::run(std::env::args_os()));
}
