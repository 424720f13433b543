#![allow(dead_code)]

pub mod npy_fixtures;
