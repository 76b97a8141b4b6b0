//! Named simulation scenarios.

use ebvi::{DesignKind, Signal, SimScenario};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub scenario: SimScenario,
}

const fn iid(n: usize, p: usize, s: usize, sigma: f64, signal: Signal) -> SimScenario {
    SimScenario {
        n,
        p,
        s,
        signal,
        design: DesignKind::IidGaussian { sigma },
        seed: 0,
    }
}

const fn ar1(p: usize, s: usize, r: f64) -> SimScenario {
    SimScenario {
        n: 100,
        p,
        s,
        signal: Signal::Fixed(3.0),
        design: DesignKind::Ar1Gaussian { r },
        seed: 0,
    }
}

const PRESETS: &[Preset] = &[
    Preset { name: "test1", scenario: iid(250, 500, 5, 0.25, Signal::Fixed(4.0)) },
    Preset { name: "test2", scenario: iid(250, 500, 10, 2.0, Signal::Fixed(6.0)) },
    Preset { name: "test3", scenario: iid(250, 500, 15, 0.5, Signal::Uniform { lo: -2.0, hi: 2.0 }) },
    Preset { name: "test4", scenario: iid(2500, 5000, 25, 0.5, Signal::Fixed(2.0)) },
    Preset { name: "test5", scenario: iid(2500, 5000, 10, 1.0, Signal::Uniform { lo: -1.0, hi: 1.0 }) },
    Preset { name: "table2-p200-s4-r0", scenario: ar1(200, 4, 0.0) },
    Preset { name: "table2-p200-s4-r0.2", scenario: ar1(200, 4, 0.2) },
    Preset { name: "table2-p200-s8-r0", scenario: ar1(200, 8, 0.0) },
    Preset { name: "table2-p200-s8-r0.2", scenario: ar1(200, 8, 0.2) },
    Preset { name: "table2-p400-s4-r0", scenario: ar1(400, 4, 0.0) },
    Preset { name: "table2-p400-s4-r0.2", scenario: ar1(400, 4, 0.2) },
    Preset { name: "table2-p400-s8-r0", scenario: ar1(400, 8, 0.0) },
    Preset { name: "table2-p400-s8-r0.2", scenario: ar1(400, 8, 0.2) },
    Preset { name: "dtable-100-200-4-3", scenario: iid(100, 200, 4, 1.0, Signal::Fixed(3.0)) },
    Preset { name: "dtable-100-200-6-3", scenario: iid(100, 200, 6, 1.0, Signal::Fixed(3.0)) },
    Preset { name: "dtable-100-200-4-6", scenario: iid(100, 200, 4, 1.0, Signal::Fixed(6.0)) },
    Preset { name: "dtable-200-400-4-3", scenario: iid(200, 400, 4, 1.0, Signal::Fixed(3.0)) },
];

pub fn registry() -> &'static [Preset] {
    PRESETS
}

pub fn preset(name: &str) -> Option<SimScenario> {
    PRESETS.iter().find(|p| p.name == name).map(|p| p.scenario)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.name)
}
