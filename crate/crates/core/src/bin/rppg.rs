fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RPPG_LOG", "warn")).init();
    std::process::exit(rppg::cli::main_with(std::env::args_os()));
}
