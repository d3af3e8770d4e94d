use std::io;

fn main() {
    let stdout = io::stdout();
    let stderr = io::stderr();
    let code = aoileak::cli::run(std::env::args().collect(), &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}
