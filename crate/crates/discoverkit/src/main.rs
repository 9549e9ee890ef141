fn main() {
    // die quietly when a pipe closes (e.g. `discoverkit ... | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(discoverkit::cli::run(std::env::args_os()));
}
