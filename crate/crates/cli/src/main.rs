fn main() {
    std::process::exit(texture_forge_cli::run(std::env::args_os()));
}
