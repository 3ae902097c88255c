use std::io;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PROCAUG_LOG", "error")).init();
    let stdout = io::stdout();
    let stderr = io::stderr();
    let code = procaug::cli::run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}
