use std::collections::HashSet;

use serde::Serialize;

use super::{ActivityTrace, CostError, DataflowMode, HwConfig};

/// One row of the published module characterisation of SDT-8-512.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModuleProfile {
    pub name: &'static str,
    pub memory_mb: f64,
    /// Per-timestep work.
    pub gflops: f64,
    pub timesteps: u32,
    pub latency_ms: f64,
    pub published_intensity: f64,
    pub published_throughput: f64,
}

impl ModuleProfile {
    /// FLOP per byte over all timesteps.
    pub fn arithmetic_intensity(&self) -> f64 {
        self.gflops * 1e9 * f64::from(self.timesteps) / (self.memory_mb * 1e6)
    }

    /// Inferences per second.
    pub fn throughput(&self) -> f64 {
        1e3 / self.latency_ms
    }
}

pub const TABLE1: [ModuleProfile; 4] = [
    ModuleProfile {
        name: "SPS",
        memory_mb: 1023.52,
        gflops: 20.982,
        timesteps: 4,
        latency_ms: 1.619,
        published_intensity: 82.001,
        published_throughput: 617.47,
    },
    ModuleProfile {
        name: "Spike-Driven Encoder",
        memory_mb: 1704.41,
        gflops: 11.099,
        timesteps: 4,
        latency_ms: 19.737,
        published_intensity: 26.049,
        published_throughput: 50.67,
    },
    ModuleProfile {
        name: "Linear",
        memory_mb: 2.21,
        gflops: 0.002,
        timesteps: 1,
        latency_ms: 0.093,
        published_intensity: 0.694,
        published_throughput: 10719.83,
    },
    ModuleProfile {
        name: "Total",
        memory_mb: 3643.32,
        gflops: 32.083,
        timesteps: 4,
        latency_ms: 24.308,
        published_intensity: 35.224,
        published_throughput: 41.14,
    },
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RooflineStats {
    /// One op per MAC, in units of 1e9.
    pub gops: f64,
    pub megabytes: f64,
    /// Ops per byte, the convention of [`TABLE1`].
    pub intensity: f64,
    pub latency_ms: f64,
    /// Inferences per second at `latency_ms`.
    pub throughput: f64,
}

/// Work and traffic of a trace. Bytes are input + output traffic plus the
/// weight traffic the dataflow policy actually fetches.
pub fn roofline_stats(trace: &ActivityTrace, cfg: &HwConfig) -> Result<RooflineStats, CostError> {
    if trace.is_empty() {
        return Err(CostError::EmptyTrace);
    }
    let cost = super::analyze_trace(trace, cfg)?;
    let mut loaded = HashSet::new();
    let mut bytes = 0u64;
    for op in &trace.ops {
        bytes += op.input_bytes + op.output_bytes;
        let stationary = cfg.dataflow.mode(op.kind().class()) == DataflowMode::WeightStationary;
        if !stationary || loaded.insert((op.layer, op.kind())) {
            bytes += op.weight_bytes;
        }
    }
    if bytes == 0 {
        return Err(CostError::ZeroBytes);
    }
    let ops = trace.total_macs();
    let latency_ms = cost.latency_ps as f64 / 1e9;
    Ok(RooflineStats {
        gops: ops as f64 / 1e9,
        megabytes: bytes as f64 / 1e6,
        intensity: ops as f64 / bytes as f64,
        latency_ms,
        throughput: if latency_ms > 0.0 { 1e3 / latency_ms } else { f64::INFINITY },
    })
}
