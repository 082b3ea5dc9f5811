fn main() {
    acbm::cli::main();
}
