//! Session host for the pointing-selection engine: socket protocol, the
//! interactive session, a websocket server and the `deixis` command line.

pub mod cli;
pub mod log;
pub mod protocol;
pub mod script;
pub mod server;
pub mod session;
