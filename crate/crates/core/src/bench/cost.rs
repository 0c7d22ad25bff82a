use super::BenchError;
use serde::{Deserialize, Serialize};

/// Inputs of the petascale resource estimate for a nested-grid run in
/// which every level holds `base_points^3` points and level `l` takes
/// `base_steps * 2^l` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModelInput {
    pub levels: u32,
    pub base_points: u64,
    pub grid_functions: u64,
    pub bytes_per_value: u64,
    /// Flops per point and step for the basic evolution.
    pub flops_per_point: u64,
    /// Additional flops per point and step for extra physics.
    pub extra_flops: u64,
    pub base_steps: u64,
    /// Sustained machine rate in flop/s.
    pub rate: f64,
}

impl CostModelInput {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |what: &str| Err(BenchError::Input(format!("{what} must be positive")));
        if self.levels == 0 {
            return bad("levels");
        }
        if self.levels > 100 {
            return Err(BenchError::Input(format!("{} levels is beyond the model's range", self.levels)));
        }
        if self.base_points == 0 {
            return bad("base points");
        }
        if self.grid_functions == 0 {
            return bad("grid functions");
        }
        if self.bytes_per_value == 0 {
            return bad("bytes per value");
        }
        if self.flops_per_point + self.extra_flops == 0 {
            return bad("flops per point");
        }
        if self.base_steps == 0 {
            return bad("base steps");
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad("rate");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub memory_bytes: u128,
    pub total_flops: u128,
    /// Steps taken on each level, coarsest first.
    pub level_steps: Vec<u128>,
    pub runtime_seconds: f64,
}

impl CostEstimate {
    pub fn memory_tib(&self) -> f64 {
        self.memory_bytes as f64 / (1u128 << 40) as f64
    }

    pub fn total_petaflops(&self) -> f64 {
        self.total_flops as f64 / 1e15
    }

    pub fn runtime_days(&self) -> f64 {
        self.runtime_seconds / 86_400.0
    }

    pub fn finest_steps(&self) -> u128 {
        *self.level_steps.last().expect("at least one level")
    }
}

fn overflow(what: &str) -> BenchError {
    BenchError::Input(format!("{what} overflows 128-bit arithmetic"))
}

pub fn estimate_cost(input: &CostModelInput) -> Result<CostEstimate, BenchError> {
    input.validate()?;
    let n3 = (input.base_points as u128).checked_pow(3).ok_or_else(|| overflow("points per level"))?;
    let memory_bytes = n3
        .checked_mul(input.levels as u128)
        .and_then(|x| x.checked_mul(input.grid_functions as u128))
        .and_then(|x| x.checked_mul(input.bytes_per_value as u128))
        .ok_or_else(|| overflow("memory"))?;
    let per_point_step = (input.flops_per_point as u128 + input.extra_flops as u128)
        .checked_mul(n3)
        .ok_or_else(|| overflow("flops per level step"))?;
    let mut level_steps = Vec::with_capacity(input.levels as usize);
    let mut total_flops: u128 = 0;
    for l in 0..input.levels {
        let steps = (input.base_steps as u128).checked_mul(1u128 << l).ok_or_else(|| overflow("step count"))?;
        total_flops = per_point_step
            .checked_mul(steps)
            .and_then(|f| total_flops.checked_add(f))
            .ok_or_else(|| overflow("total flops"))?;
        level_steps.push(steps);
    }
    Ok(CostEstimate {
        memory_bytes,
        total_flops,
        level_steps,
        runtime_seconds: total_flops as f64 / input.rate,
    })
}

/// Ghost points per owned point for a cubic block of `owned` points per
/// side with `ghost` layers: `((o + 2g)^3 - o^3) / o^3`.
pub fn ghost_overhead(owned: u64, ghost: u64) -> Result<f64, BenchError> {
    if owned == 0 {
        return Err(BenchError::Input("owned points per side must be at least 1".into()));
    }
    let o = owned as u128;
    let total = (o + 2 * ghost as u128).pow(3);
    Ok((total - o.pow(3)) as f64 / o.pow(3) as f64)
}
