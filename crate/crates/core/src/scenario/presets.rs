/// A built-in scenario file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PresetInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub toml: &'static str,
}

const VACUUM_PULSE: &str = r#"name = "vacuum_pulse"

[material]
law = "linear"

[grid]
cells = [32, 32, 32]
length = [1.5, 1.5, 1.5]
origin = [-0.75, -0.75, -0.75]
modes = ["periodic", "periodic", "periodic"]

[data]
preset = "pulse"
amplitude = 1.0
width = 0.3
center = [0.0, 0.0, 0.0]

[solver]
m = 2
horizon = 0.1

[diagnostics]
divergence = true
cone = true
cone_radius = 0.35
"#;

const VACUUM_PLANE_WAVE: &str = r#"name = "vacuum_plane_wave"

[material]
law = "linear"

[grid]
cells = [16, 16, 16]
length = [1.0, 1.0, 1.0]
modes = ["periodic", "periodic", "periodic"]

[data]
preset = "plane_wave"
amplitude = 1.0
wavenumber = 1.0

[solver]
m = 2
horizon = 0.5
"#;

const PEC_BOUNCE: &str = r#"name = "pec_bounce"

[material]
law = "linear"

[grid]
cells = [20, 20, 24]
length = [1.0, 1.0, 1.2]
origin = [-0.5, -0.5, 0.0]
modes = ["periodic", "periodic", "pec_bottom_open_top"]

[data]
preset = "pulse"
amplitude = 1.0
width = 0.2
center = [0.0, 0.0, 0.35]

[solver]
m = 1
horizon = 0.6
dissipation = 0.0
"#;

const KERR_PULSE: &str = r#"name = "kerr_pulse"

[material]
law = "kerr"
vartheta = 1.0

[grid]
cells = [32, 32, 32]
length = [1.5, 1.5, 1.5]
origin = [-0.75, -0.75, -0.75]
modes = ["periodic", "periodic", "periodic"]

[data]
preset = "pulse"
amplitude = 0.5
width = 0.3
center = [0.0, 0.0, 0.0]

[solver]
m = 3
tau = 0.05
horizon = 0.1
fp_tolerance = 1e-9

[diagnostics]
divergence = true
cone = true
cone_radius = 0.35
"#;

const KERR_ODE_MODE: &str = r#"name = "kerr_ode_mode"

[material]
law = "kerr"
vartheta = 1.0
conductivity_scale = 2.0

[grid]
cells = [4, 4, 4]
length = [1.0, 1.0, 1.0]
modes = ["periodic", "periodic", "periodic"]

[data]
preset = "uniform"
e_field = [0.8, 0.3, 0.0]
h_field = [0.0, 0.5, 0.0]

[solver]
m = 3
horizon = 0.5
max_dt = 0.005
"#;

const KERR_ODE_BLOWUP: &str = r#"name = "kerr_ode_blowup"

[material]
law = "kerr"
vartheta = 1.0
gain = 50.0

[grid]
cells = [4, 4, 4]
length = [1.0, 1.0, 1.0]
modes = ["periodic", "periodic", "periodic"]

[data]
preset = "uniform"
e_field = [1.0, 0.0, 0.0]

[solver]
m = 2
horizon = 1.0
max_dt = 0.001
lipschitz_threshold = 5.0
"#;

const MANUFACTURED: &str = r#"name = "manufactured"

[material]
law = "linear"
conductivity_scale = 0.5

[grid]
cells = [16, 16, 16]
length = [1.0, 1.0, 1.0]
modes = ["periodic", "periodic", "pec_bottom_open_top"]

[data]
preset = "manufactured"
amplitude = 1.0
width = 0.12
center = [0.0, 0.0, 0.3]
wavenumber = 1.0
frequency = 1.0

[solver]
m = 1
tau = 0.25
horizon = 0.25
"#;

const CONE_CHECK: &str = r#"name = "cone_check"

[material]
law = "linear"

[grid]
cells = [48, 48, 48]
length = [1.5, 1.5, 1.5]
origin = [-0.75, -0.75, -0.75]
modes = ["periodic", "periodic", "periodic"]

[data]
preset = "pulse"
amplitude = 1.0
width = 0.2
center = [0.0, 0.0, 0.0]

[solver]
m = 1
horizon = 0.1

[diagnostics]
energy = false
cone = true
cone_radius = 0.25
cone_tolerance = 1e-6
"#;

const CONTINUITY_SWEEP: &str = r#"name = "continuity_sweep"
seed = 7

[material]
law = "kerr"
vartheta = 1.0

[grid]
cells = [24, 24, 24]
length = [1.5, 1.5, 1.5]
origin = [-0.75, -0.75, -0.75]
modes = ["periodic", "periodic", "periodic"]

[data]
preset = "pulse"
amplitude = 0.5
width = 0.25
center = [0.0, 0.0, 0.0]

[solver]
m = 2
horizon = 0.05
fp_tolerance = 1e-12

[diagnostics]
continuity = true
continuity_deltas = [1e-2, 1e-3, 1e-4]
"#;

const REGISTRY: &[PresetInfo] = &[
    PresetInfo {
        name: "vacuum_pulse",
        description: "divergence-free compact pulse in vacuum on a periodic box, with cone and divergence checks",
        toml: VACUUM_PULSE,
    },
    PresetInfo {
        name: "vacuum_plane_wave",
        description: "plane wave along x1 in vacuum on the periodic unit cube",
        toml: VACUUM_PLANE_WAVE,
    },
    PresetInfo {
        name: "pec_bounce",
        description: "pulse reflecting off the perfectly conducting bottom face, no dissipation",
        toml: PEC_BOUNCE,
    },
    PresetInfo {
        name: "kerr_pulse",
        description: "compact pulse in a Kerr medium solved by Picard slabs",
        toml: KERR_PULSE,
    },
    PresetInfo {
        name: "kerr_ode_mode",
        description: "spatially uniform Kerr state decaying under conductivity",
        toml: KERR_ODE_MODE,
    },
    PresetInfo {
        name: "kerr_ode_blowup",
        description: "uniform Kerr state with gain, stopped by the Lipschitz monitor",
        toml: KERR_ODE_BLOWUP,
    },
    PresetInfo {
        name: "manufactured",
        description: "exact solution with matching source and conducting-face data",
        toml: MANUFACTURED,
    },
    PresetInfo {
        name: "cone_check",
        description: "vacuum pulse against the forward cone of speed 3",
        toml: CONE_CHECK,
    },
    PresetInfo {
        name: "continuity_sweep",
        description: "Kerr pulse perturbed by delta times a seeded direction",
        toml: CONTINUITY_SWEEP,
    },
];

/// Every built-in preset, in a fixed order.
pub fn list_scenarios() -> &'static [PresetInfo] {
    REGISTRY
}

pub fn preset(name: &str) -> Option<&'static PresetInfo> {
    REGISTRY.iter().find(|p| p.name == name)
}
