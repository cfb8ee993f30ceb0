use std::process::ExitCode;

use btc_cli::{parse_config, run, Category};

fn main() -> ExitCode {
    let env: Vec<(String, String)> = std::env::vars().collect();
    let result = parse_config(std::env::args_os(), &env).and_then(|cfg| run(&cfg));
    match result {
        Ok(report) => {
            for path in &report.written {
                println!("wrote {}", path.display());
            }
            for note in &report.notes {
                println!("{note}");
            }
            ExitCode::SUCCESS
        }
        Err(e) if e.category == Category::Info => {
            print!("{e}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
