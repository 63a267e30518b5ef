//! Planar reaching-through-clutter planning: a quasi-static pushing
//! simulator, kinodynamic RRT and KPIECE planners, and a guidance loop that
//! lets a human, a heuristic or a script propose object rearrangements.

pub mod bench;
pub mod clock;
pub mod geometry;
pub mod grtc;
pub mod heuristic;
pub mod physics;
pub mod planners;
pub mod scenegen;
pub mod world;
