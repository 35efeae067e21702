use alloc::format;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use super::{DlrmConfig, Interaction, ScaleTag};
use crate::math;
use crate::{Error, Result};

/// Width-scaling schemes. `None` is the unscaled base model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    None,
    /// Rows of every embedding table times the factor.
    Vertical,
    /// Every embedding dim set to the factor (a target dim, not a multiplier).
    Horizontal,
    /// Hidden widths of the overarch MLP times the factor.
    Overarch,
    /// Hidden widths of both MLPs times the factor.
    Mlp,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::None, Scheme::Vertical, Scheme::Horizontal, Scheme::Overarch, Scheme::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::Vertical => "vertical",
            Scheme::Horizontal => "horizontal",
            Scheme::Overarch => "overarch",
            Scheme::Mlp => "mlp",
        }
    }

    /// Parameter counts for overarch and MLP scaling exclude embeddings.
    pub fn counts_embedding_params(self) -> bool {
        !matches!(self, Scheme::Overarch | Scheme::Mlp)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.as_str() == s)
            .ok_or_else(|| Error::config("scheme", format!("unknown scheme `{s}`")))
    }
}

fn scaled(value: usize, factor: f64) -> f64 {
    math::round(value as f64 * factor).max(1.0)
}

fn checked_width(value: f64, what: &str, factor: f64) -> Result<usize> {
    if value > (u32::MAX as f64) {
        return Err(Error::config("factor", format!("{factor} makes {what} overflow")));
    }
    Ok(value as usize)
}

/// Applies `scheme` with `factor` to `base`.
///
/// Fractional rows and widths round half away from zero with a floor of 1.
pub fn apply_scaling(base: &DlrmConfig, scheme: Scheme, factor: f64) -> Result<DlrmConfig> {
    base.validate()?;
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::config("factor", format!("{factor} must be finite and positive")));
    }
    let mut cfg = base.clone();
    match scheme {
        Scheme::None => {
            if factor != 1.0 {
                return Err(Error::config("factor", format!("{factor} given for scheme `none`, which only accepts 1")));
            }
        }
        Scheme::Vertical => {
            for t in &mut cfg.tables {
                let rows = checked_width(scaled(t.rows as usize, factor), "rows", factor)?;
                t.rows = rows as u32;
            }
        }
        Scheme::Horizontal => {
            if factor != libm::trunc(factor) {
                return Err(Error::config("factor", format!("{factor} is not an integer embedding dim")));
            }
            let dim = checked_width(factor, "dim", factor)?;
            for t in &mut cfg.tables {
                t.dim = dim;
            }
            // The bottom output is the dense counterpart of an embedding and
            // tracks its width.
            *cfg.bottom_widths.last_mut().expect("validated") = dim;
        }
        Scheme::Overarch => {
            let hidden = cfg.overarch_widths.len() - 1;
            for w in &mut cfg.overarch_widths[..hidden] {
                *w = checked_width(scaled(*w, factor), "overarch width", factor)?;
            }
        }
        Scheme::Mlp => {
            let bottom = match cfg.interaction {
                Interaction::Concat => cfg.bottom_widths.len(),
                // Bottom output must keep matching the embedding dim.
                Interaction::ConcatDot => cfg.bottom_widths.len() - 1,
            };
            for w in &mut cfg.bottom_widths[..bottom] {
                *w = checked_width(scaled(*w, factor), "bottom width", factor)?;
            }
            let hidden = cfg.overarch_widths.len() - 1;
            for w in &mut cfg.overarch_widths[..hidden] {
                *w = checked_width(scaled(*w, factor), "overarch width", factor)?;
            }
        }
    }
    cfg.scheme_tag = Some(ScaleTag { scheme, factor });
    cfg.validate().map_err(|e| Error::config("factor", format!("{factor} for {scheme}: {e}")))?;
    Ok(cfg)
}
