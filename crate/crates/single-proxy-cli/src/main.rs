fn main() {
    std::process::exit(single_proxy_cli::run());
}
