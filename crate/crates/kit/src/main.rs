fn main() {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("BRIGHT_KIT_LOG", "warn")).try_init();
    std::process::exit(bright_kit::cli::run(std::env::args_os()));
}
