//! Learning multi-step tabletop manipulation from a single observed demonstration.
//!
//! The pipeline segments a demonstration into skills while selecting a state
//! abstraction for each, formulates one MDP per skill, learns DMP policies with
//! PI², and reformulates an MDP (adding a gripper-force action or switching the
//! abstraction) when the learned skill fails to reproduce the observed outcome.
//! A kinematic tabletop world provides demonstrations and rollouts.

pub mod bench;
pub mod config;
pub mod dmp;
pub mod error;
pub mod mdp;
pub mod pose;
pub mod rl;
pub mod segmentation;
pub mod sim;
pub mod state;

pub use error::{Error, Result};
pub use pose::{relative_pose, Pose, PoseVec7, Quat};
pub use state::{abstract_state, finite_diff_accel, Abstraction, Demonstration, PublicState};
