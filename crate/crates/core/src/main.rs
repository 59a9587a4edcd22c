use std::io::Write;

fn main() {
    // Results do not depend on the pool size; this only caps CPU use.
    if let Some(n) = std::env::var("GREENFORGE_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = greenforge::cli::run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    let _ = std::io::stdout().flush();
    std::process::exit(code);
}
