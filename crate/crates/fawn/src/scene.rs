//! Deterministic synthetic ISAC scene and CSI generator.
//!
//! A 2-D free-space model: each link's channel is the line-of-sight path
//! plus one single-bounce term per present entity, evaluated per
//! subcarrier. Robots reflect more strongly than people, the 5G emitter
//! has a torus-pattern null directly beneath it, and a small complex
//! Gaussian noise floor keeps the task from being exactly invertible.
//! Samples are generated from per-index child seeds, so dataset content
//! is independent of generation order and thread count.

use num_complex::Complex64;

use crate::parallel::{map_indexed, map_indexed_seq};
use crate::rng::SplitMix64;
use crate::sample::{CsiSample, GridCell, SceneLabel, CELL_SIZE_M, GRID_NX, GRID_NY};
use crate::tensor::Tensor;

pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Technology {
    FiveG,
    WiFi,
}

/// Room geometry: the 9x10 grid of 0.6 m cells and the four device
/// positions (meters). Cells whose center coincides with a device are
/// excluded from entity placement, since a scatterer at zero distance
/// from an emitter or receiver has no defined path loss.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomLayout {
    pub emitter_5g: (f64, f64),
    pub receiver_5g: (f64, f64),
    pub emitter_wifi: (f64, f64),
    pub receiver_wifi: (f64, f64),
}

impl Default for RoomLayout {
    fn default() -> Self {
        Self {
            emitter_5g: (4.8, 4.8),
            receiver_5g: (0.0, 0.6),
            emitter_wifi: (4.8, 0.6),
            receiver_wifi: (0.0, 5.4),
        }
    }
}

impl RoomLayout {
    pub fn emitter(&self, tech: Technology) -> (f64, f64) {
        match tech {
            Technology::FiveG => self.emitter_5g,
            Technology::WiFi => self.emitter_wifi,
        }
    }

    pub fn receiver(&self, tech: Technology) -> (f64, f64) {
        match tech {
            Technology::FiveG => self.receiver_5g,
            Technology::WiFi => self.receiver_wifi,
        }
    }

    fn device_positions(&self) -> [(f64, f64); 4] {
        [self.emitter_5g, self.receiver_5g, self.emitter_wifi, self.receiver_wifi]
    }

    /// Grid cells an entity may occupy, row-major order.
    pub fn eligible_cells(&self) -> Vec<GridCell> {
        let devices = self.device_positions();
        let mut cells = Vec::with_capacity(GRID_NX * GRID_NY);
        for iy in 0..GRID_NY {
            for ix in 0..GRID_NX {
                let cell = GridCell { ix: ix as u8, iy: iy as u8 };
                let c = cell.center();
                if devices.iter().all(|&d| d != c) {
                    cells.push(cell);
                }
            }
        }
        cells
    }
}

/// Scatterer and impairment parameters. `noise_sigma = 0` turns off every
/// stochastic term (noise and phase drift), making the CSI a pure function
/// of the scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScattererModel {
    /// Dimensionless reflectivity of a person.
    pub reflectivity_person: f64,
    /// Dimensionless reflectivity of a robot; metal reflects harder.
    pub reflectivity_robot: f64,
    /// Complex-noise standard deviation relative to the LoS magnitude.
    pub noise_sigma: f64,
    /// 5G torus null: emitter gain ramps linearly up to this distance (m).
    pub near_dot_radius: f64,
    /// Per-symbol 5G phase drift is uniform in +-this bound (rad).
    pub phase_drift_max: f64,
}

impl Default for ScattererModel {
    fn default() -> Self {
        Self {
            reflectivity_person: 0.8,
            reflectivity_robot: 1.5,
            noise_sigma: 0.01,
            near_dot_radius: 1.2,
            phase_drift_max: 0.05,
        }
    }
}

/// Per-technology OFDM layout. Subcarrier and symbol counts match the
/// encoder input shapes exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub technology: Technology,
    pub center_freq_hz: f64,
    pub subcarriers: usize,
    pub spacing_hz: f64,
    pub symbols: usize,
}

impl LinkSpec {
    pub fn five_g() -> Self {
        Self {
            technology: Technology::FiveG,
            center_freq_hz: 3.5e9,
            subcarriers: 360,
            spacing_hz: 30e3,
            symbols: 4,
        }
    }

    /// Legacy 52-subcarrier layout: indices -26..-1 and 1..26, no DC.
    pub fn wifi() -> Self {
        Self {
            technology: Technology::WiFi,
            center_freq_hz: 5.18e9,
            subcarriers: 52,
            spacing_hz: 312.5e3,
            symbols: 1,
        }
    }

    /// Frequency of subcarrier index `k` in [0, subcarriers).
    pub fn subcarrier_freq(&self, k: usize) -> f64 {
        debug_assert!(k < self.subcarriers);
        let offset = match self.technology {
            Technology::FiveG => k as f64 - 180.0,
            Technology::WiFi => {
                // skip DC: 0..25 -> -26..-1, 26..51 -> 1..26
                if k < 26 {
                    k as f64 - 26.0
                } else {
                    k as f64 - 25.0
                }
            }
        };
        self.center_freq_hz + offset * self.spacing_hz
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    (dx * dx + dy * dy).sqrt()
}

fn path_phasor(freq: f64, path_len: f64) -> Complex64 {
    Complex64::from_polar(1.0, -std::f64::consts::TAU * freq * path_len / SPEED_OF_LIGHT)
}

/// Person present with probability 0.75, robot likewise (independent);
/// each present entity uniform over the eligible cells, the robot
/// redrawn until it differs from the person.
pub fn sample_scene(rng: &mut SplitMix64, layout: &RoomLayout) -> SceneLabel {
    let person_present = rng.next_f64() < 0.75;
    let robot_present = rng.next_f64() < 0.75;
    let cells = layout.eligible_cells();
    let n = cells.len() as u64;
    let person = person_present.then(|| cells[rng.next_below(n) as usize]);
    let robot = if robot_present {
        Some(loop {
            let c = cells[rng.next_below(n) as usize];
            if Some(c) != person {
                break c;
            }
        })
    } else {
        None
    };
    SceneLabel { person, robot }
}

/// Complex channel gain of one subcarrier: line of sight plus one
/// single-bounce term per present entity, with the 5G torus null
/// attenuating scatterers near the dot.
pub fn channel_response(
    scene: &SceneLabel,
    link: &LinkSpec,
    layout: &RoomLayout,
    model: &ScattererModel,
    k: usize,
) -> Complex64 {
    let e = layout.emitter(link.technology);
    let r = layout.receiver(link.technology);
    let freq = link.subcarrier_freq(k);
    let d_er = dist(e, r);
    let mut h = path_phasor(freq, d_er) / d_er;
    let entities = [
        (scene.person, model.reflectivity_person),
        (scene.robot, model.reflectivity_robot),
    ];
    for (cell, rho) in entities {
        let Some(cell) = cell else { continue };
        let s = cell.center();
        let d_es = dist(e, s);
        let d_sr = dist(s, r);
        let g_tx = match link.technology {
            Technology::FiveG => (d_es / model.near_dot_radius).min(1.0),
            Technology::WiFi => 1.0,
        };
        h += rho * g_tx * path_phasor(freq, d_es + d_sr) / (d_es * d_sr);
    }
    h
}

/// One link's CSI tensor, shape 2 x subcarriers x symbols (channel 0 real,
/// channel 1 imaginary), normalized by the LoS distance so the LoS
/// magnitude is ~1. With noise enabled, a per-sample 5G phase drift and
/// per-element complex Gaussian noise are drawn from `rng`, in a fixed
/// order (drift, then noise subcarrier-major then symbol).
pub fn synth_csi_link(
    scene: &SceneLabel,
    link: &LinkSpec,
    layout: &RoomLayout,
    model: &ScattererModel,
    rng: &mut SplitMix64,
) -> Tensor {
    let k_n = link.subcarriers;
    let s_n = link.symbols;
    let d_er = dist(layout.emitter(link.technology), layout.receiver(link.technology));
    let noisy = model.noise_sigma > 0.0;
    let sigma = model.noise_sigma / d_er; // sigma * |LoS|
    let drift = if noisy && link.technology == Technology::FiveG {
        rng.next_range(-model.phase_drift_max, model.phase_drift_max)
    } else {
        0.0
    };
    let h: Vec<Complex64> =
        (0..k_n).map(|k| channel_response(scene, link, layout, model, k)).collect();
    let mut data = vec![0.0; 2 * k_n * s_n];
    for (k, h_k) in h.iter().enumerate() {
        for m in 0..s_n {
            let mut v = h_k * Complex64::from_polar(1.0, m as f64 * drift);
            if noisy {
                let (re, im) = rng.next_gaussian_pair(sigma);
                v += Complex64::new(re, im);
            }
            data[k * s_n + m] = v.re * d_er;
            data[(k_n + k) * s_n + m] = v.im * d_er;
        }
    }
    Tensor::from_vec(&[2, k_n, s_n], data).expect("shape matches construction")
}

/// Both link tensors plus the label. The 5G link consumes `rng` first.
pub fn synth_sample(
    scene: SceneLabel,
    layout: &RoomLayout,
    model: &ScattererModel,
    rng: &mut SplitMix64,
) -> CsiSample {
    let csi_5g = synth_csi_link(&scene, &LinkSpec::five_g(), layout, model, rng);
    let csi_wifi = synth_csi_link(&scene, &LinkSpec::wifi(), layout, model, rng);
    CsiSample { csi_5g, csi_wifi, label: scene }
}

/// The sample at `index` of the dataset keyed by `seed`. Each index gets
/// a child generator seeded by splitmix64(seed XOR index), so any sample
/// can be produced independently of the rest.
pub fn dataset_sample(
    seed: u64,
    index: usize,
    layout: &RoomLayout,
    model: &ScattererModel,
) -> CsiSample {
    let child_seed = SplitMix64::new(seed ^ index as u64).next_u64();
    let mut rng = SplitMix64::new(child_seed);
    let scene = sample_scene(&mut rng, layout);
    synth_sample(scene, layout, model, &mut rng)
}

/// `n` labeled samples, fanned out over the worker pool when the
/// `parallel` feature is on.
pub fn generate_dataset(
    n: usize,
    seed: u64,
    layout: &RoomLayout,
    model: &ScattererModel,
) -> Vec<CsiSample> {
    map_indexed(n, |i| dataset_sample(seed, i, layout, model))
}

/// Sequential reference path for `generate_dataset`; same output.
pub fn generate_dataset_seq(
    n: usize,
    seed: u64,
    layout: &RoomLayout,
    model: &ScattererModel,
) -> Vec<CsiSample> {
    map_indexed_seq(n, |i| dataset_sample(seed, i, layout, model))
}

/// Default collection size of a dataset.
pub const DEFAULT_DATASET_SIZE: usize = 400;
