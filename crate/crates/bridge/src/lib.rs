//! Robot-side seam of the runtime: the frame protocol, the dispatcher that
//! drives commands through it, and a simulated robot on the other end.

pub mod dispatcher;
pub mod protocol;
pub mod sim;

pub use dispatcher::{run_bridge_client, run_dispatcher, DispatchExit, DispatcherOptions};
pub use protocol::{decode, encode, BridgeError, BridgeMessage};
pub use sim::{SimRobot, SimRobotConfig};
