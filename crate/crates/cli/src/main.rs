fn main() {
    std::process::exit(tipscan_cli::run(std::env::args_os()));
}
