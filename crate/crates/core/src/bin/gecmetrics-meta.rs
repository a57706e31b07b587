use clap::Parser;
use gec_metrics::cli::{exit_status, run_meta, MetaArgs};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = MetaArgs::parse();
    std::process::exit(exit_status(run_meta(&args)));
}
