//! Finite-horizon optimal control with dynamics and running costs that jump
//! across a flat stratification of space.
//!
//! The crate computes the value function with a stratification-aligned
//! semi-Lagrangian scheme, evaluates full and tangential Hamiltonians exactly
//! over finitely generated convex dynamics-cost sets, checks the structural
//! assumptions (admissible stratification, normal controllability, tangential
//! continuity) and certifies the stratified HJB inequalities on computed grids.

pub mod builtins;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod geometry;
pub mod hamiltonians;
pub mod hull;
pub mod linalg;
pub mod lp;
pub mod report;
pub mod solver;
pub mod verify;
