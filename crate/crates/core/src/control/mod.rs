//! Turbine and converter controllers.

pub mod blocks;
pub mod cascade;
pub mod config;
pub mod controller;
pub mod limiter;
pub mod modulation;
pub mod msmc;
pub mod pitch;
pub mod pll;
pub mod virtual_machine;

pub use cascade::{current_loop_gains, CurrentLoop, InnerCascade};
pub use config::{ControllerConfig, ControllerMode};
pub use controller::{de_energized, operating_point, ControlTelemetry, Controller, OperatingPoint};
pub use limiter::{current_saturation, LimiterConfig, LimiterScheme, OverloadMitigation};
pub use modulation::{abc_to_dq, dq_to_abc, modulation_wave};
pub use msmc::{msmc, optimal_power_ref, MsmcOutput, Region};
pub use pitch::{PitchController, PitchGains};
pub use pll::{pll_step, PllState};
pub use virtual_machine::{VicAngle, VicParams, VsmAngle, VsmParams};
