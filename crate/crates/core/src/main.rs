fn main() {
    std::process::exit(krein_core::cli::run(std::env::args_os()));
}
