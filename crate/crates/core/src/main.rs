fn main() {
    std::process::exit(moment_atlas::cli::run(std::env::args_os()));
}
