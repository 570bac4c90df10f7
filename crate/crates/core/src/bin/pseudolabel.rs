use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match pseudolabel::cli::run_subcommand(std::env::args_os()) {
        0 => ExitCode::SUCCESS,
        code => ExitCode::from(code as u8),
    }
}
