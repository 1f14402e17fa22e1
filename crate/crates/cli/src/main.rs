fn main() {
    std::process::exit(evtgan_cli::run_main(std::env::args().collect()));
}
