fn main() {
    std::process::exit(ldp_market::cli::run(std::env::args()));
}
