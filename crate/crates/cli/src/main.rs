use clap::Parser;
use irisattn_cli::{http, run, Cli, Command};

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Serve(args) => tokio::runtime::Runtime::new()?.block_on(http::serve(args)),
        command => run(command, &mut std::io::stdout().lock()),
    }
}
