use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = elixir_service::cli::Cli::parse();
    if let Err(e) = elixir_service::cli::run(cli, &mut std::io::stdout().lock()) {
        eprintln!("elixir: {e}");
        std::process::exit(1);
    }
}
