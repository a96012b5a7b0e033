pub mod attack;
pub mod controllers;
pub mod decision;
pub mod exec_model;
pub mod harness;
pub mod kernel;
pub mod monitor;
pub mod plant;
pub mod side_channel;
pub mod time;
