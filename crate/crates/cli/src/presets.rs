//! Bundled parameter sets, compiled in from `configs/`.

use crate::config::{ConfigError, RunConfig};

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        /// `(name, json)` for every bundled preset.
        pub const PRESETS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../../configs/", $name, ".json")))),*
        ];
    };
}

presets!(
    "fig1a",
    "fig1b",
    "fig1c",
    "fig2_k5",
    "fig2_k50",
    "fig3",
    "fig4_eradication",
    "fig4_endemic",
    "fig5a",
    "fig5b",
    "fig5c",
    "fig5d",
    "fig5e",
    "fig5f",
);

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<RunConfig, ConfigError> {
    let text = source(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_owned()))?;
    RunConfig::from_json_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for name in names() {
            let cfg = load(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(cfg.outputs.ends_with(name), "{name}");
        }
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(matches!(load("fig9"), Err(ConfigError::UnknownPreset(_))));
    }
}
