use std::io;

fn main() {
    mdpwf::cli::init_threads();
    let code = mdpwf::cli::run(std::env::args_os(), &mut io::stdin().lock(), &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
