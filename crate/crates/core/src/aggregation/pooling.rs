//! Global pooling over the pixel grid: average (GAP), max (GMP) and the
//! generalized power mean (GeM) that interpolates between them.

use crate::error::{Error, Result};
use crate::feature_store::FeatureMap;
use crate::linalg::{normalize_f64, to_f32};

use super::GlobalDescriptor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Gap,
    Gmp,
    Gem,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolingConfig {
    pub kind: PoolKind,
    /// Power-mean exponent. Forced to 1 for GAP, ignored for GMP.
    pub p: f64,
    /// Scale the result to unit L2 norm.
    pub normalize_output: bool,
}

impl PoolingConfig {
    pub const DEFAULT_GEM_P: f64 = 3.0;

    pub fn gap() -> Self {
        PoolingConfig {
            kind: PoolKind::Gap,
            p: 1.0,
            normalize_output: true,
        }
    }

    pub fn gmp() -> Self {
        PoolingConfig {
            kind: PoolKind::Gmp,
            p: f64::INFINITY,
            normalize_output: true,
        }
    }

    pub fn gem(p: f64) -> Self {
        PoolingConfig {
            kind: PoolKind::Gem,
            p,
            normalize_output: true,
        }
    }

    pub fn unnormalized(mut self) -> Self {
        self.normalize_output = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == PoolKind::Gem && !(self.p.is_finite() && self.p >= 1.0) {
            return Err(Error::Config(format!(
                "GeM exponent must be finite and >= 1, got {}",
                self.p
            )));
        }
        Ok(())
    }

    /// `gap`, `gmp` or `gem-p{p}`, with `-raw` appended when output is not normalized.
    pub fn method_tag(&self) -> String {
        let base = match self.kind {
            PoolKind::Gap => "gap".to_string(),
            PoolKind::Gmp => "gmp".to_string(),
            PoolKind::Gem => format!("gem-p{}", format_number(self.p)),
        };
        if self.normalize_output {
            base
        } else {
            format!("{base}-raw")
        }
    }
}

pub(crate) fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// `sign(x) * |x|^p`, so odd-looking exponents stay total on signed features.
fn signed_pow(x: f64, p: f64) -> f64 {
    if p == 3.0 {
        x * x * x
    } else {
        x.signum() * x.abs().powf(p)
    }
}

fn signed_root(x: f64, p: f64) -> f64 {
    if p == 3.0 {
        x.cbrt()
    } else if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(1.0 / p)
    }
}

/// Pools `map` into one `dim`-length vector.
///
/// GeM is computed as a power *mean*, `(sum_i f_i^p / (H*W))^(1/p)` per channel,
/// with sign-preserving powers and roots. With `p = 1` it equals GAP.
pub fn pool(map: &FeatureMap, cfg: &PoolingConfig) -> Result<GlobalDescriptor> {
    cfg.validate()?;
    let dim = map.dim();
    let n = map.num_pixels() as f64;
    let mut out = match cfg.kind {
        PoolKind::Gap => {
            let mut acc = vec![0.0f64; dim];
            for px in map.pixels() {
                acc.iter_mut().zip(px).for_each(|(a, &x)| *a += x as f64);
            }
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        }
        PoolKind::Gmp => {
            let mut acc = vec![f64::NEG_INFINITY; dim];
            for px in map.pixels() {
                acc.iter_mut().zip(px).for_each(|(a, &x)| *a = a.max(x as f64));
            }
            acc
        }
        PoolKind::Gem => {
            let p = cfg.p;
            let mut acc = vec![0.0f64; dim];
            for px in map.pixels() {
                acc.iter_mut().zip(px).for_each(|(a, &x)| *a += signed_pow(x as f64, p));
            }
            acc.iter_mut().for_each(|a| *a = signed_root(*a / n, p));
            acc
        }
    };
    if cfg.normalize_output {
        normalize_f64(&mut out);
    }
    Ok(GlobalDescriptor {
        image_id: map.image_id().to_string(),
        method_tag: cfg.method_tag(),
        values: to_f32(&out),
    })
}
