//! Skill layer for the ticktree engine.
//!
//! Skills run outside the tree: a leaf node forwards its ticks and halts
//! over a small line protocol (`start` / `stop` / `status` requests, one
//! correlated response each) to a skill server. The server executes each
//! skill as a state chart acting on a simulated planar world.
//!
//! The server comes in two forms with identical protocol behavior: a real
//! TCP server ([`server::SkillServer`]) and an in-process engine handle used
//! for deterministic desk-scale runs ([`transport::InProcTransport`]).

pub mod chart;
pub mod client;
pub mod engine;
pub mod fetch;
pub mod server;
pub mod transport;
pub mod wire;
pub mod world;

pub use chart::{Args, SkillStateChart, StateDef, StepResult, Terminal};
pub use client::{RemoteAction, RemoteCondition};
pub use engine::{ClientId, SkillEngine};
pub use fetch::{fetch_engine, goal_reached, skill_registry, SkillEndpoint};
pub use server::SkillServer;
pub use transport::{InProcTransport, SkillTransport, TcpTransport};
pub use wire::{decode, encode, Op, SkillMessage, WireError};
pub use world::{ArmState, SimWorld};
