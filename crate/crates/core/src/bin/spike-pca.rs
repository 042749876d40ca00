fn main() {
    std::process::exit(spike_pca::cli_io::cli_main(std::env::args().collect()));
}
