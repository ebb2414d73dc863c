use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = hgrec::Cli::parse();
    if let Err(e) = hgrec::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
