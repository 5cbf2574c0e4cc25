fn main() {
    std::process::exit(wgangp_lab::cli::run(std::env::args_os()));
}
