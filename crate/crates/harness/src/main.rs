fn main() {
    std::process::exit(zodps_harness::cli_main(std::env::args_os()));
}
