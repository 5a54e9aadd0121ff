fn main() {
    std::process::exit(hypereq::cli::run(std::env::args_os()));
}
