fn main() {
    std::process::exit(vmem::cli::run(std::env::args_os()));
}
