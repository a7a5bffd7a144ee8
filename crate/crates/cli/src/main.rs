use std::process::ExitCode;

fn main() -> ExitCode {
    let seed = std::env::var(piconet_cli::SEED_ENV).ok();
    match piconet_cli::run(std::env::args_os(), seed.as_deref()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("piconet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
