use clap::Parser;
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = forgebot_cli::Cli::parse();
    let code = forgebot_cli::run(cli, &mut std::io::stdout(), &mut std::io::stderr()).await;
    std::process::exit(code);
}
