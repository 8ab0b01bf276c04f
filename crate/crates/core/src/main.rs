fn main() {
    std::process::exit(mclnn::cli::main());
}
