fn main() {
    std::process::exit(selfish_rewards::cli::run(std::env::args_os()));
}
