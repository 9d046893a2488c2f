//! Tutorial-guided retrieval augmentation for GUI agents.
//!
//! The crate covers the whole offline pipeline: curating a tutorial corpus
//! ([`corpus`]), indexing it for exact cosine retrieval ([`retrieval`]),
//! turning retrieved tutorials into task-aware guidance ([`guidance`]),
//! running a frozen agent with or without that guidance ([`agent`]),
//! building SFT and rejection-sampling datasets ([`rsf`]), and scoring the
//! results ([`eval`]). Every model call goes through [`gateway`], which has
//! remote, scripted-stub and record/replay backends so that all of it runs
//! offline.

pub mod action;
pub mod agent;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod gateway;
pub mod guidance;
pub mod io;
pub mod manifest;
pub mod retrieval;
pub mod rsf;
pub mod task;
pub mod text;

pub use action::AgentAction;
pub use corpus::TutorialDoc;
pub use guidance::Guidance;
pub use task::TaskContext;
