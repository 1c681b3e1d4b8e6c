fn main() {
    std::process::exit(trlsum::run_cli(std::env::args_os()));
}
