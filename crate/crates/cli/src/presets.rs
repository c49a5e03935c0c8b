//! Scenario configs bundled with the binary.

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../presets/", $name, ".toml")))),*]
    };
}

pub const PRESETS: &[(&str, &str)] = presets![
    "mub-1e6-stationary",
    "mub-1e6-pauli-z",
    "mub-1e6-random",
    "mub-1e2-stationary",
    "mub-1e2-pauli-z",
    "mub-1e2-random",
    "pauli-1e2-stationary",
    "pauli-1e2-pauli-z",
    "pauli-1e2-random",
    "noise",
    "smoke",
];

pub fn find(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}
