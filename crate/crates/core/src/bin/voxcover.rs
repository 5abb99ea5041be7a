fn main() {
    std::process::exit(voxcover::cli::run(std::env::args_os()));
}
