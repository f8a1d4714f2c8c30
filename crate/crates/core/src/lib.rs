pub mod analysis;
pub mod buffer;
pub mod channel;
pub mod config;
pub mod detect;
pub mod error;
pub mod harness;
pub mod ldpc;
pub mod receiver;
pub mod traffic;

pub use buffer::ReceivedBuffer;
pub use config::SimConfig;
pub use error::{Error, Result};
