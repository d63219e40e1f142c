use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PULSEFORGE_LOG", "warn"))
        .format_timestamp(None)
        .init();
    ExitCode::from(pulseforge::cli::main_with_args(std::env::args_os()))
}
