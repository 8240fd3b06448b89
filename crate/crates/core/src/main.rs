fn main() {
    std::process::exit(ckme::harness::cli_dispatch(std::env::args()));
}
