//! Lockstep simulation of the operator arm, the avatar arm, the network
//! link between them and the scripted human.

pub mod channel;
pub mod contact;
pub mod human;
pub mod logs;
pub mod plant;
pub mod runner;
pub mod scenario;

pub use channel::{Channel, ChannelConfig, Message};
pub use contact::{Attachment, ContactPlane};
pub use logs::{LogTable, LogWriter, Row};
pub use plant::{ArmPlant, PlantParams};
pub use runner::{run_scenario, start_posture, RunOptions, RunReport, SimError, Simulation, TickRecord};
pub use scenario::{Scenario, ScenarioError};
