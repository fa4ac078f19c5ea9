fn main() {
    std::process::exit(dgocp::cli::run(std::env::args_os()));
}
