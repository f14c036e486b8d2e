fn main() {
    std::process::exit(gaze_events_cli::run(std::env::args_os()));
}
