fn main() {
    std::process::exit(subset_qubo::cli::main());
}
