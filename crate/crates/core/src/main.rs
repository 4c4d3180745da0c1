fn main() {
    std::process::exit(pivotbench::cli::run());
}
