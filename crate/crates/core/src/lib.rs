pub mod avatar_ctrl;
pub mod ftcal;
pub mod kinematics;
pub mod op_ctrl;
pub mod signal;
pub mod hand_ctrl;
pub mod sim;
pub mod harness;
