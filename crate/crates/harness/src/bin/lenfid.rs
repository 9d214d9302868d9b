fn main() {
    std::process::exit(lenfid_harness::cli::main());
}
