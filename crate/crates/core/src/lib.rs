//! Motion-analysis engine for the badminton backhand short service.

pub mod analytics;
pub mod config;
pub mod feedback;
pub mod fsm;
pub mod kinetics;
pub mod mocap;
pub mod model;
pub mod report;
pub mod session;
pub mod stats;
pub mod trajectory;
