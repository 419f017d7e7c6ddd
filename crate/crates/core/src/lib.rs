//! Mixed-traffic unsignalised intersection control: conflict geometry,
//! priority-queue right-of-way allocation, CAV mode planning, MPC and Stanley
//! actuation, and a deterministic closed-loop simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod allocator;
pub mod cli;
pub mod config;
pub mod control;
pub mod geometry;
pub mod planner;
pub mod sim;
