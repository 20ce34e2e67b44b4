fn main() {
    std::process::exit(cdle_core::cli::main());
}
