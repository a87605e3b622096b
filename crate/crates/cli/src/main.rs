use clap::Parser;

fn main() -> anyhow::Result<()> {
    let cli = hann_cli::Cli::parse();
    hann_cli::run(&cli, &mut std::io::stdout().lock())
}
