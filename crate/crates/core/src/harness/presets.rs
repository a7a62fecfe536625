//! Named configurations shipped with the library.

use crate::error::{Error, Result};

use super::config::RunConfig;

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub toml: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "counterexample",
        summary: "two quadratics on [-1, 1]; FedFW reaches x = 1 while naive averaging stays at 0",
        toml: include_str!("../../presets/counterexample.toml"),
    },
    Preset {
        name: "thm1-quadratic",
        summary: "convex schedule on a two-client quadratic with a closed-form solution",
        toml: include_str!("../../presets/thm1-quadratic.toml"),
    },
    Preset {
        name: "thm2-nonconvex",
        summary: "non-convex quadratic over an l2 ball, fixed-horizon schedule",
        toml: include_str!("../../presets/thm2-nonconvex.toml"),
    },
    Preset {
        name: "thm3-sto",
        summary: "stochastic FedFW on synthetic multiclass logistic regression",
        toml: include_str!("../../presets/thm3-sto.toml"),
    },
    Preset {
        name: "pp-sweep",
        summary: "counterexample swept over lambda0, participation and seeds",
        toml: include_str!("../../presets/pp-sweep.toml"),
    },
];

pub fn find(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let known: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
        Error::Config(format!(
            "unknown preset {name:?} (known: {})",
            known.join(", ")
        ))
    })
}

pub fn load(name: &str) -> Result<RunConfig> {
    RunConfig::from_toml(find(name)?.toml)
}
