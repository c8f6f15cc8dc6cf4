fn main() {
    std::process::exit(dbd_sim::cli::run(std::env::args_os()));
}
