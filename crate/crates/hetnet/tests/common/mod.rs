#![allow(dead_code)]

use std::path::PathBuf;

use mec_hetnet::config_file::{load_config, LoadedConfig};

pub fn preset_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn preset(name: &str) -> LoadedConfig {
    load_config(&preset_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}
