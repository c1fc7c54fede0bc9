//! Pipelined-kernel timing: one new event every `initiation_interval`
//! cycles, each result `depth` cycles after its input.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

pub type Exact = Ratio<u128>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TimingError {
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("clock {0} is not a positive whole number of Hz")]
    Clock(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineTiming {
    clock_hz: u64,
    initiation_interval: u64,
    depth: u64,
}

impl PipelineTiming {
    pub const DEFAULT_CLOCK_HZ: u64 = 150_000_000;
    /// 150 MHz over an 18.75 MHz event rate.
    pub const DEFAULT_II: u64 = 8;
    /// 146.66 ns at 150 MHz, rounded to whole cycles.
    pub const DEFAULT_DEPTH: u64 = 22;

    pub fn new(clock_hz: u64, initiation_interval: u64, depth: u64) -> Result<Self, TimingError> {
        for (name, v) in [
            ("clock_hz", clock_hz),
            ("initiation_interval", initiation_interval),
            ("depth", depth),
        ] {
            if v == 0 {
                return Err(TimingError::Zero(name));
            }
        }
        Ok(PipelineTiming {
            clock_hz,
            initiation_interval,
            depth,
        })
    }

    /// Accepts a clock written as a float, e.g. `150e6`.
    pub fn with_clock_f64(clock_hz: f64, initiation_interval: u64, depth: u64) -> Result<Self, TimingError> {
        if !(clock_hz.is_finite() && clock_hz >= 1.0 && clock_hz.fract() == 0.0 && clock_hz <= u64::MAX as f64) {
            return Err(TimingError::Clock(clock_hz.to_string()));
        }
        Self::new(clock_hz as u64, initiation_interval, depth)
    }

    pub fn clock_hz(&self) -> u64 {
        self.clock_hz
    }

    pub fn initiation_interval(&self) -> u64 {
        self.initiation_interval
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    pub fn throughput_hz(&self) -> Exact {
        Ratio::new(u128::from(self.clock_hz), u128::from(self.initiation_interval))
    }

    pub fn latency_s(&self) -> Exact {
        Ratio::new(u128::from(self.depth), u128::from(self.clock_hz))
    }

    pub fn latency_ns(&self) -> Exact {
        self.latency_s() * Ratio::from_integer(1_000_000_000)
    }

    /// `throughput 18.75 MHz, latency 146.67 ns` style line.
    pub fn summary(&self) -> String {
        format!(
            "throughput {} MHz, latency {} ns",
            decimal(self.throughput_hz() / Ratio::from_integer(1_000_000), 2),
            decimal(self.latency_ns(), 2)
        )
    }
}

impl Default for PipelineTiming {
    fn default() -> Self {
        PipelineTiming {
            clock_hz: Self::DEFAULT_CLOCK_HZ,
            initiation_interval: Self::DEFAULT_II,
            depth: Self::DEFAULT_DEPTH,
        }
    }
}

/// Exact decimal rendering with `places` digits, rounding half up.
pub fn decimal(r: Exact, places: u32) -> String {
    let scale = 10u128.pow(places);
    let scaled = r * Ratio::from_integer(scale);
    let mut units = scaled.floor().to_integer();
    if !(scaled.fract() * Ratio::from_integer(2)).lt(&Ratio::from_integer(1)) {
        units += 1;
    }
    let (int, frac) = (units / scale, units % scale);
    if places == 0 {
        int.to_string()
    } else {
        format!("{int}.{frac:0width$}", width = places as usize)
    }
}

/// Approximate value, for reports.
pub fn to_f64(r: Exact) -> f64 {
    if r.is_zero() {
        0.0
    } else {
        r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
    }
}
