use std::io::Write;

fn main() {
    let (code, text) = shapeinv::cli::run(std::env::args_os());
    let wrote_file = std::env::args().any(|a| a == "--output" || a.starts_with("--output="));
    if code == 0 || code == 2 && !text.starts_with("error") {
        if !wrote_file {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    } else {
        let _ = std::io::stderr().write_all(text.as_bytes());
    }
    std::process::exit(code);
}
