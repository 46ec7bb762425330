use clap::Parser;
use corereach::cli::{dispatch, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = dispatch(cli, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
