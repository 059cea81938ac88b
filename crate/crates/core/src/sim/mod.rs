//! Simulated stand-in for a rotary inverted pendulum test bench.

pub mod controller;
pub mod episode;
pub mod furuta;
pub mod signal;

pub use controller::{build_pd_controller, build_pd_controller_with, PdConfig, PdRealization};
pub use episode::{
    generate_dataset, load_dataset, run_closed_loop_episode, simulate_dataset, Dataset, DatasetConfig,
    EpisodeConfig, EpisodeOutcome, Excitation, Manifest,
};
pub use furuta::{furuta_rhs, furuta_step, furuta_step_torque, mechanical_energy, FurutaParams, FurutaState};
pub use signal::{generate_signal, SignalKind, SignalSpec};
