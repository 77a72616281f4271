use std::collections::HashMap;
use std::ops::Range;

use crate::agents::ChoiceRecord;
use crate::error::{Error, Result};
use crate::schema::{AttributeSchema, ChoiceSet};

/// Named group of adjacent columns (one attribute's dummy block).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnBlock {
    pub name: String,
    pub columns: Range<usize>,
}

/// Dummy-coded choice data grouped by choice set.
///
/// Rows are stored densely, `n_params` values per profile; set `s` owns rows
/// `row_offsets[s]..row_offsets[s + 1]` and `chosen[s]` indexes into them.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_params: usize,
    x: Vec<f64>,
    row_offsets: Vec<usize>,
    chosen: Vec<usize>,
    set_ids: Vec<u64>,
    labels: Vec<(String, String)>,
    blocks: Vec<ColumnBlock>,
    /// Records that carried no usable choice.
    pub dropped_sets: usize,
}

impl DesignMatrix {
    pub fn new(labels: Vec<(String, String)>, blocks: Vec<ColumnBlock>) -> Self {
        DesignMatrix {
            n_params: labels.len(),
            x: Vec::new(),
            row_offsets: vec![0],
            chosen: Vec::new(),
            set_ids: Vec::new(),
            labels,
            blocks,
            dropped_sets: 0,
        }
    }

    /// Adds one choice set; `rows` holds one covariate vector per profile.
    pub fn push_set(&mut self, set_id: u64, rows: &[Vec<f64>], chosen: usize) -> Result<()> {
        if rows.len() < 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: rows.len(),
            });
        }
        if chosen >= rows.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                got: chosen,
            });
        }
        for r in rows {
            if r.len() != self.n_params {
                return Err(Error::Dimension {
                    expected: self.n_params,
                    got: r.len(),
                });
            }
            self.x.extend_from_slice(r);
        }
        let last = *self.row_offsets.last().unwrap();
        self.row_offsets.push(last + rows.len());
        self.chosen.push(chosen);
        self.set_ids.push(set_id);
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_sets(&self) -> usize {
        self.chosen.len()
    }

    pub fn labels(&self) -> &[(String, String)] {
        &self.labels
    }

    pub fn blocks(&self) -> &[ColumnBlock] {
        &self.blocks
    }

    pub fn set_ids(&self) -> &[u64] {
        &self.set_ids
    }

    /// Common J if every set has the same number of profiles.
    pub fn uniform_j(&self) -> Option<usize> {
        let mut sizes = self.row_offsets.windows(2).map(|w| w[1] - w[0]);
        let first = sizes.next()?;
        sizes.all(|j| j == first).then_some(first)
    }

    pub fn set_rows(&self, s: usize) -> impl Iterator<Item = &[f64]> {
        let (a, b) = (self.row_offsets[s], self.row_offsets[s + 1]);
        self.x[a * self.n_params..b * self.n_params].chunks_exact(self.n_params)
    }

    pub fn set_size(&self, s: usize) -> usize {
        self.row_offsets[s + 1] - self.row_offsets[s]
    }

    pub fn chosen(&self, s: usize) -> usize {
        self.chosen[s]
    }

    /// Copy with the given columns removed; blocks are re-indexed and a block
    /// whose columns are all removed disappears.
    pub fn without_columns(&self, drop: Range<usize>) -> DesignMatrix {
        let keep: Vec<usize> = (0..self.n_params).filter(|c| !drop.contains(c)).collect();
        let mut x = Vec::with_capacity(self.x.len() / self.n_params.max(1) * keep.len());
        for row in self.x.chunks_exact(self.n_params.max(1)) {
            x.extend(keep.iter().map(|&c| row[c]));
        }
        let shift = |c: usize| if c >= drop.end { c - drop.len() } else { c };
        let blocks = self
            .blocks
            .iter()
            .filter_map(|b| {
                let cols: Vec<usize> = b.columns.clone().filter(|c| !drop.contains(c)).collect();
                let (first, last) = (*cols.first()?, *cols.last()?);
                Some(ColumnBlock {
                    name: b.name.clone(),
                    columns: shift(first)..shift(last) + 1,
                })
            })
            .collect();
        DesignMatrix {
            n_params: keep.len(),
            x,
            row_offsets: self.row_offsets.clone(),
            chosen: self.chosen.clone(),
            set_ids: self.set_ids.clone(),
            labels: keep.iter().map(|&c| self.labels[c].clone()).collect(),
            blocks,
            dropped_sets: self.dropped_sets,
        }
    }
}

/// Dummy row for one profile: 1 in the column of each non-reference level it carries.
pub fn dummy_row(schema: &AttributeSchema, levels: &[usize]) -> Vec<f64> {
    let mut row = vec![0.0; schema.n_parameters()];
    let mut offset = 0;
    for (attr, &lvl) in schema.attributes.iter().zip(levels) {
        if lvl != attr.reference_level() {
            row[offset + lvl] = 1.0;
        }
        offset += attr.levels.len() - 1;
    }
    row
}

pub fn schema_blocks(schema: &AttributeSchema) -> Vec<ColumnBlock> {
    schema
        .attributes
        .iter()
        .zip(schema.column_blocks())
        .map(|(a, columns)| ColumnBlock {
            name: a.name.clone(),
            columns,
        })
        .collect()
}

/// Joins records to their choice sets. Ineffective records are skipped and
/// counted in `dropped_sets`; a record for an unknown set is an error.
pub fn build_design_matrix(
    records: &[ChoiceRecord],
    design: &[ChoiceSet],
    schema: &AttributeSchema,
) -> Result<DesignMatrix> {
    let by_id: HashMap<u64, &ChoiceSet> = design.iter().map(|s| (s.id, s)).collect();
    let mut dm = DesignMatrix::new(schema.parameter_labels(), schema_blocks(schema));
    for r in records {
        let set = by_id.get(&r.set_id).ok_or(Error::UnknownSet(r.set_id))?;
        match r.chosen_index {
            Some(c) if c < set.j() => {
                let rows: Vec<Vec<f64>> = set.profiles.iter().map(|p| dummy_row(schema, &p.levels)).collect();
                dm.push_set(set.id, &rows, c)?;
            }
            _ => dm.dropped_sets += 1,
        }
    }
    Ok(dm)
}
