use clap::Parser;
use gec_metrics::cli::{exit_status, run_eval, EvalArgs};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = EvalArgs::parse();
    std::process::exit(exit_status(run_eval(&args)));
}
