fn main() {
    std::process::exit(cavity_cool::app::run(std::env::args_os()));
}
