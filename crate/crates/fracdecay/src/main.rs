fn main() {
    std::process::exit(fracdecay::cli::main());
}
