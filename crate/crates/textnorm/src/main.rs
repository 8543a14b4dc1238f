fn main() {
    std::process::exit(textnorm::cli::cli_main(std::env::args_os()));
}
