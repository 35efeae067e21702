use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::Scheme;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub rows: u32,
    pub dim: usize,
}

/// How the bottom-MLP output and the pooled embeddings are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interaction {
    /// `[bottom_out, e_1, .., e_T]`.
    #[default]
    Concat,
    /// Concatenation followed by the dot product of every pair drawn from
    /// `{bottom_out, e_1, .., e_T}`. All vectors must share one width.
    ConcatDot,
}

/// Which scaling scheme and factor produced a config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleTag {
    pub scheme: Scheme,
    pub factor: f64,
}

/// Architecture of one model instance.
///
/// `bottom_widths` lists output widths of the dense MLP (input is
/// `num_dense`); the last entry is the bottom output width. `overarch_widths`
/// lists output widths of the top MLP (input is the interaction width) and
/// ends in 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlrmConfig {
    pub num_dense: usize,
    pub tables: Vec<TableConfig>,
    pub bottom_widths: Vec<usize>,
    pub overarch_widths: Vec<usize>,
    #[serde(default)]
    pub interaction: Interaction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme_tag: Option<ScaleTag>,
}

impl DlrmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_dense == 0 {
            return Err(Error::config("model.num_dense", "must be at least 1"));
        }
        if self.tables.is_empty() {
            return Err(Error::config("model.tables", "at least one embedding table is required"));
        }
        for (t, table) in self.tables.iter().enumerate() {
            if table.rows == 0 {
                return Err(Error::config(format!("model.tables[{t}].rows"), "must be at least 1"));
            }
            if table.dim == 0 {
                return Err(Error::config(format!("model.tables[{t}].dim"), "must be at least 1"));
            }
        }
        if self.bottom_widths.is_empty() {
            return Err(Error::config("model.bottom_widths", "needs at least one layer"));
        }
        if let Some(i) = self.bottom_widths.iter().position(|&w| w == 0) {
            return Err(Error::config(format!("model.bottom_widths[{i}]"), "must be at least 1"));
        }
        if self.overarch_widths.is_empty() {
            return Err(Error::config("model.overarch_widths", "needs at least one layer"));
        }
        if let Some(i) = self.overarch_widths.iter().position(|&w| w == 0) {
            return Err(Error::config(format!("model.overarch_widths[{i}]"), "must be at least 1"));
        }
        if self.overarch_widths.last() != Some(&1) {
            return Err(Error::config("model.overarch_widths", "final width must be 1 (single logit)"));
        }
        if self.interaction == Interaction::ConcatDot {
            let d = self.bottom_output_width();
            if let Some(t) = self.tables.iter().position(|t| t.dim != d) {
                return Err(Error::config(
                    format!("model.tables[{t}].dim"),
                    format!("concat-dot interaction needs every dim equal to the bottom output width {d}"),
                ));
            }
        }
        Ok(())
    }

    pub fn bottom_output_width(&self) -> usize {
        *self.bottom_widths.last().expect("validated: bottom_widths non-empty")
    }

    /// Number of vectors entering a pairwise-dot interaction.
    pub(crate) fn interaction_vectors(&self) -> usize {
        self.tables.len() + 1
    }

    pub(crate) fn dot_pairs(&self) -> usize {
        match self.interaction {
            Interaction::Concat => 0,
            Interaction::ConcatDot => {
                let n = self.interaction_vectors();
                n * (n - 1) / 2
            }
        }
    }

    /// Width of the interaction output, i.e. the overarch input width.
    pub fn interaction_width(&self) -> usize {
        let concat = self.bottom_output_width() + self.tables.iter().map(|t| t.dim).sum::<usize>();
        concat + self.dot_pairs()
    }

    /// `(fan_in, fan_out)` of every bottom layer, in order.
    pub fn bottom_layer_shapes(&self) -> Vec<(usize, usize)> {
        layer_shapes(self.num_dense, &self.bottom_widths)
    }

    /// `(fan_in, fan_out)` of every overarch layer, in order.
    pub fn overarch_layer_shapes(&self) -> Vec<(usize, usize)> {
        layer_shapes(self.interaction_width(), &self.overarch_widths)
    }
}

fn layer_shapes(input: usize, widths: &[usize]) -> Vec<(usize, usize)> {
    let mut fan_in = input;
    widths
        .iter()
        .map(|&w| {
            let shape = (fan_in, w);
            fan_in = w;
            shape
        })
        .collect()
}
