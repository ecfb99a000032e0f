fn main() {
    std::process::exit(marlx::harness::cli::main());
}
