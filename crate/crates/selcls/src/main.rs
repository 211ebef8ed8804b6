use std::process::exit;

fn main() {
    exit(selcls::cli::run())
}
