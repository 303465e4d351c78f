use std::process::ExitCode;

fn main() -> ExitCode {
    mipt_traj::cli::run()
}
