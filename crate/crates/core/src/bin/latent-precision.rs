fn main() {
    std::process::exit(latent_precision::cli::main_from_env());
}
