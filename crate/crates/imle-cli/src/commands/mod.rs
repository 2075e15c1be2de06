mod evaluate;
mod interpolate;
mod sample;
mod train;
mod verify_cmd;

pub use evaluate::cmd_eval;
pub use interpolate::cmd_interpolate;
pub use sample::{cmd_sample, SampleFormat};
pub use train::cmd_train;
pub use verify_cmd::{cmd_verify, Suite};
