#![allow(dead_code)]

pub mod ambiguity;
