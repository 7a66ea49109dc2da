use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Row-major label grid; `None` marks background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelGrid {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<Option<usize>>,
}

impl LabelGrid {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, labels: vec![None; width * height] }
    }
}

/// Gives every 4-connected piece of every label its own id, numbered in
/// row-major order of discovery.
pub fn split_disconnected(grid: &LabelGrid) -> LabelGrid {
    let (w, h) = (grid.width, grid.height);
    let mut out = LabelGrid::empty(w, h);
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..grid.labels.len() {
        let Some(label) = grid.labels[start] else { continue };
        if out.labels[start].is_some() {
            continue;
        }
        out.labels[start] = Some(next);
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize| {
                if grid.labels[q] == Some(label) && out.labels[q].is_none() {
                    out.labels[q] = Some(next);
                    queue.push_back(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        next += 1;
    }
    out
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    width: usize,
    height: usize,
    labels: Vec<[i64; 2]>,
}

impl Serialize for LabelGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut runs: Vec<[i64; 2]> = Vec::new();
        for l in &self.labels {
            let v = l.map_or(-1, |x| x as i64);
            match runs.last_mut() {
                Some(r) if r[0] == v => r[1] += 1,
                _ => runs.push([v, 1]),
            }
        }
        GridRepr { width: self.width, height: self.height, labels: runs }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = GridRepr::deserialize(d)?;
        let mut labels = Vec::with_capacity(r.width * r.height);
        for [v, n] in r.labels {
            if n <= 0 {
                return Err(D::Error::custom("non-positive run length"));
            }
            let l = usize::try_from(v).ok();
            labels.extend(std::iter::repeat_n(l, n as usize));
        }
        if labels.len() != r.width * r.height {
            return Err(D::Error::custom("run lengths do not cover the grid"));
        }
        Ok(LabelGrid { width: r.width, height: r.height, labels })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&str]) -> LabelGrid {
        let labels = rows
            .iter()
            .flat_map(|r| r.chars().map(|c| c.to_digit(10).map(|d| d as usize)))
            .collect();
        LabelGrid { width: rows[0].len(), height: rows.len(), labels }
    }

    #[test]
    fn connected_clusters_are_unchanged_up_to_ids() {
        let g = grid(&["00.1", "00.1", "...1"]);
        assert_eq!(split_disconnected(&g), g);
    }

    #[test]
    fn islands_get_separate_ids() {
        let g = grid(&["0.0", "...", "1.0"]);
        let out = split_disconnected(&g);
        assert_eq!(out, grid(&["0.1", "...", "2.3"]));
    }

    #[test]
    fn diagonal_contact_does_not_connect() {
        let out = split_disconnected(&grid(&["0.", ".0"]));
        assert_eq!(out, grid(&["0.", ".1"]));
    }

    #[test]
    fn json_roundtrip() {
        let g = grid(&["00.1", "2..1"]);
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<LabelGrid>(&text).unwrap(), g);
    }
}
