use serde::{Deserialize, Serialize};

/// Position of a weight matrix in the network, which fixes its muP rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerClass {
    Input,
    Hidden,
    Output,
}

/// Width-dependent multiplier `a`, init variance `b` and learning-rate scale
/// `c` for one weight matrix: `W = a·w`, `w ~ N(0, b)`, `lr = c·η₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MupScaling {
    pub layer_class: LayerClass,
    pub fan_in: usize,
    pub fan_out: usize,
    pub multiplier: f64,
    pub init_variance: f64,
    pub lr_scale: f64,
}

pub fn scaling_for(layer_class: LayerClass, fan_in: usize, fan_out: usize) -> MupScaling {
    assert!(fan_in >= 1 && fan_out >= 1, "fan_in and fan_out must be >= 1");
    let (fi, fo) = (fan_in as f64, fan_out as f64);
    let (multiplier, init_variance, lr_scale) = match layer_class {
        LayerClass::Input => (fo.sqrt(), 1.0 / fo, 1.0 / fo.sqrt()),
        LayerClass::Output => (1.0 / fi.sqrt(), 1.0 / fi, 1.0 / fi.sqrt()),
        LayerClass::Hidden => (1.0, 1.0 / fi, 1.0 / fi),
    };
    MupScaling {
        layer_class,
        fan_in,
        fan_out,
        multiplier,
        init_variance,
        lr_scale,
    }
}

/// Standard parameterization baseline: unit multiplier, `1/fan_in` init
/// variance, one global learning rate.
pub fn standard_scaling(layer_class: LayerClass, fan_in: usize, fan_out: usize) -> MupScaling {
    MupScaling {
        layer_class,
        fan_in,
        fan_out,
        multiplier: 1.0,
        init_variance: 1.0 / fan_in as f64,
        lr_scale: 1.0,
    }
}
