fn main() {
    std::process::exit(polyvem::cli::run(std::env::args_os()));
}
