fn main() {
    std::process::exit(freeinit_core::cli::main());
}
