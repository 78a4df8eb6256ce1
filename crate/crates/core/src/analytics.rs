//! Win rates, value co-occurrence, distance trends and 2-D projections, with
//! CSV and SVG export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::linalg::Pca;
use crate::providers::EmbeddingVector;
use crate::retrieval::{mean_retrieval_distance, UserHistory};
use crate::store::AnnotationStore;
use crate::values::{normalize, ClusterTable, SchwartzValue, TradeOff};

pub const DEFAULT_MIN_SUPPORT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinRateCell {
    pub rate: f64,
    pub wins_a: usize,
    pub wins_b: usize,
}

impl WinRateCell {
    pub fn support(&self) -> usize {
        self.wins_a + self.wins_b
    }
}

/// Rows are cluster pairs `(A, B)` with `A < B`; a cell holds how often the
/// redditor preferred A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRateMatrix {
    pub rows: Vec<(String, String)>,
    pub cols: Vec<String>,
    pub cells: Vec<Vec<Option<WinRateCell>>>,
    pub min_support: usize,
    /// Trade-offs whose phrases were not found in the cluster table.
    pub unmapped: usize,
}

impl WinRateMatrix {
    pub fn row_label(&self, row: usize) -> String {
        format!("{} vs. {}", self.rows[row].0, self.rows[row].1)
    }

    /// Rate at which `redditor` preferred `a` over `b`, in either orientation.
    pub fn rate(&self, redditor: &str, a: &str, b: &str) -> Option<f64> {
        let col = self.cols.iter().position(|c| c == redditor)?;
        let (row, flip) = match self.rows.iter().position(|(x, y)| x == a && y == b) {
            Some(r) => (r, false),
            None => (self.rows.iter().position(|(x, y)| x == b && y == a)?, true),
        };
        let cell = self.cells[row][col]?;
        Some(if flip { 1.0 - cell.rate } else { cell.rate })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair");
        for c in &self.cols {
            let _ = write!(out, ",{}", csv_field(c));
        }
        out.push('\n');
        for (r, row) in self.cells.iter().enumerate() {
            out.push_str(&csv_field(&self.row_label(r)));
            for cell in row {
                match cell {
                    Some(c) => {
                        let _ = write!(out, ",{}", c.rate);
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let values: Vec<Vec<Option<f64>>> = self
            .cells
            .iter()
            .map(|row| row.iter().map(|c| c.map(|c| c.rate)).collect())
            .collect();
        let rows: Vec<String> = (0..self.rows.len()).map(|r| self.row_label(r)).collect();
        heatmap_svg("Win rates", &rows, &self.cols, &values, (0.0, 1.0))
    }
}

/// Per-redditor win rates over cluster pairs. Trade-offs with either side
/// outside the cluster table, or with both sides in the same cluster, are skipped.
pub fn win_rate_matrix(
    tradeoffs: &BTreeMap<String, Vec<TradeOff>>,
    table: &ClusterTable,
    min_support: usize,
) -> Result<WinRateMatrix> {
    let index = table.phrase_index();
    let mut counts: BTreeMap<(String, String), BTreeMap<String, (usize, usize)>> = BTreeMap::new();
    let mut unmapped = 0;
    for (redditor, list) in tradeoffs {
        for t in list {
            let (Some(&p), Some(&r)) = (index.get(&normalize(&t.preferred)), index.get(&normalize(&t.rejected))) else {
                unmapped += 1;
                continue;
            };
            let (p, r) = (table.label(p), table.label(r));
            if p == r {
                continue;
            }
            let a_won = p < r;
            let key = if a_won { (p, r) } else { (r, p) };
            let cell = counts.entry(key).or_default().entry(redditor.clone()).or_default();
            if a_won {
                cell.0 += 1;
            } else {
                cell.1 += 1;
            }
        }
    }
    let cols: Vec<String> = tradeoffs.keys().cloned().collect();
    let min_support = min_support.max(1);
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (pair, per) in counts {
        let row: Vec<Option<WinRateCell>> = cols
            .iter()
            .map(|c| {
                per.get(c).and_then(|&(a, b)| {
                    (a + b >= min_support).then(|| WinRateCell {
                        rate: a as f64 / (a + b) as f64,
                        wins_a: a,
                        wins_b: b,
                    })
                })
            })
            .collect();
        if row.iter().any(Option::is_some) {
            rows.push(pair);
            cells.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("no value pair reaches support {min_support}")));
    }
    Ok(WinRateMatrix {
        rows,
        cols,
        cells,
        min_support,
        unmapped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub counts: Vec<Vec<usize>>,
    /// `ln(count + 1)`.
    pub log_counts: Vec<Vec<f64>>,
}

impl CooccurrenceMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cluster");
        for c in &self.cols {
            let _ = write!(out, ",{}", csv_field(c));
        }
        out.push('\n');
        for (name, row) in self.rows.iter().zip(&self.log_counts) {
            out.push_str(&csv_field(name));
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let values: Vec<Vec<Option<f64>>> =
            self.log_counts.iter().map(|r| r.iter().map(|v| Some(*v)).collect()).collect();
        let max = self.log_counts.iter().flatten().copied().fold(0.0, f64::max);
        heatmap_svg("Value co-occurrence (log count)", &self.rows, &self.cols, &values, (0.0, max.max(1e-9)))
    }
}

/// Counts, per situation, the joint appearance of each value cluster (from
/// the situation's conflicts) with each Schwartz value annotated for it.
pub fn cooccurrence_counts(corpus: &Corpus, annotations: &AnnotationStore, table: &ClusterTable) -> CooccurrenceMatrix {
    let index = table.phrase_index();
    let mut schwartz_by_situation: BTreeMap<&str, BTreeSet<SchwartzValue>> = BTreeMap::new();
    for inst in &corpus.instances {
        if let Some(a) = annotations.schwartz.get(&inst.instance_id) {
            schwartz_by_situation
                .entry(inst.situation_id.as_str())
                .or_default()
                .extend(a.situation_values);
        }
    }
    let n = table.clusters.len();
    let mut counts = vec![vec![0usize; SchwartzValue::ALL.len()]; n];
    for (situation, conflicts) in &annotations.conflicts {
        let Some(values) = schwartz_by_situation.get(situation.as_str()) else { continue };
        let clusters: BTreeSet<usize> = conflicts
            .iter()
            .flat_map(|c| [&c.value_a, &c.value_b])
            .filter_map(|p| index.get(&normalize(p)).copied())
            .collect();
        for c in clusters {
            for v in values {
                let col = SchwartzValue::ALL.iter().position(|x| x == v).expect("listed value");
                counts[c][col] += 1;
            }
        }
    }
    CooccurrenceMatrix {
        rows: (0..n).map(|i| table.label(i)).collect(),
        cols: SchwartzValue::ALL.iter().map(|v| v.name().to_string()).collect(),
        log_counts: counts
            .iter()
            .map(|r| r.iter().map(|&c| ((c + 1) as f64).ln()).collect())
            .collect(),
        counts,
    }
}

/// Centered 2-D PCA coordinates, first axis of largest variance.
pub fn project_2d(vectors: &[EmbeddingVector]) -> Result<Vec<[f64; 2]>> {
    if vectors.len() < 3 {
        return Err(Error::InvalidInput(format!("projection needs at least 3 vectors, got {}", vectors.len())));
    }
    let dim = vectors[0].dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: v.dim() });
    }
    if vectors.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::Degenerate("all vectors are identical".into()));
    }
    let rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.as_slice().to_vec()).collect();
    let pca = Pca::fit(&rows, 2)?;
    Ok(rows
        .iter()
        .map(|r| {
            let t = pca.transform(r);
            [t[0], t.get(1).copied().unwrap_or(0.0)]
        })
        .collect())
}

/// Mean top-k distance for nested random sub-histories of the given sizes.
/// Sizes larger than the history are skipped.
pub fn distance_curve(
    history: &UserHistory,
    queries: &[EmbeddingVector],
    sizes: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let mut order: Vec<_> = history.entries().to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::new();
    for &size in sizes {
        if size == 0 || size > order.len() {
            continue;
        }
        let sub = UserHistory::new(history.redditor_id(), history.model(), order[..size].to_vec())?;
        out.push((size, mean_retrieval_distance(&sub, queries, k)?));
    }
    Ok(out)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            out[p] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant or fewer than two points are given.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Standalone SVG heatmap; undefined cells are drawn grey.
pub fn heatmap_svg(title: &str, rows: &[String], cols: &[String], values: &[Vec<Option<f64>>], range: (f64, f64)) -> String {
    const CELL: usize = 28;
    let left = 12 + 7 * rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
    let top = 40 + 7 * cols.iter().map(|c| c.chars().count()).max().unwrap_or(0);
    let width = left + CELL * cols.len() + 20;
    let height = top + CELL * rows.len() + 20;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="8" y="18" font-size="14">{}</text>"#, xml_escape(title));
    for (c, name) in cols.iter().enumerate() {
        let x = left + c * CELL + CELL / 2;
        let _ = writeln!(
            svg,
            r#"<text transform="translate({x},{}) rotate(-60)">{}</text>"#,
            top - 4,
            xml_escape(name)
        );
    }
    let span = (range.1 - range.0).max(1e-12);
    for (r, name) in rows.iter().enumerate() {
        let y = top + r * CELL;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 4,
            y + CELL / 2 + 4,
            xml_escape(name)
        );
        for (c, v) in values[r].iter().enumerate() {
            let x = left + c * CELL;
            let (fill, label) = match v {
                Some(v) => {
                    let t = ((v - range.0) / span).clamp(0.0, 1.0);
                    let shade = (255.0 * (1.0 - t)).round() as u8;
                    (format!("rgb({shade},{shade},255)"), format!("{v:.2}"))
                }
                None => ("#dddddd".to_string(), String::new()),
            };
            let _ = writeln!(
                svg,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="white"><title>{}</title></rect>"#,
                label
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Standalone SVG scatter plot with axes scaled to the data.
pub fn scatter_svg(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 50.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0).max(1e-12) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0).max(1e-12) * (H - 2.0 * PAD);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="8" y="18" font-size="14">{}</text>"#, xml_escape(title));
    let _ = writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, xml_escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text transform="translate(14,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        H / 2.0,
        xml_escape(y_label)
    );
    let _ = writeln!(svg, r#"<text x="{PAD}" y="{}">{x0:.3}</text><text x="{}" y="{}" text-anchor="end">{x1:.3}</text>"#, H - PAD + 14.0, W - PAD, H - PAD + 14.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{y0:.3}</text><text x="{}" y="{PAD}" text-anchor="end">{y1:.3}</text>"#, PAD - 4.0, H - PAD, PAD - 4.0);
    for &(x, y) in points {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(x), sy(y));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::values::{ClusterOrigin, ValueCluster};
    use proptest::prelude::*;

    fn table(names: &[(&str, &[&str])]) -> ClusterTable {
        ClusterTable::new(
            names
                .iter()
                .enumerate()
                .map(|(i, (name, members))| ValueCluster {
                    cluster_id: i,
                    name: name.to_string(),
                    descriptor: String::new(),
                    members: members.iter().map(|s| s.to_string()).collect(),
                    member_ids: (0..members.len()).collect(),
                    exemplar_ids: vec![],
                    origin: ClusterOrigin::Density,
                })
                .collect(),
        )
    }

    fn t(p: &str, r: &str) -> TradeOff {
        TradeOff::new(p, r, "i").unwrap()
    }

    #[test]
    fn nine_of_ten_is_point_nine() {
        let tbl = table(&[
            ("Boundary Awareness", &["setting personal limits", "protecting own space"]),
            ("Cultural Expectations", &["honoring family customs"]),
        ]);
        let mut list = vec![t("setting personal limits", "honoring family customs"); 5];
        list.extend(vec![t("protecting own space", "Honoring family customs."); 4]);
        list.push(t("honoring family customs", "setting personal limits"));
        list.push(t("unknown phrase here", "setting personal limits"));
        let logs: BTreeMap<String, Vec<TradeOff>> = [("r1".to_string(), list), ("r2".to_string(), vec![])].into();
        let m = win_rate_matrix(&logs, &tbl, 3).unwrap();
        assert_eq!(m.rows, vec![("Boundary Awareness".to_string(), "Cultural Expectations".to_string())]);
        let cell = m.cells[0][0].unwrap();
        assert_eq!(cell.rate, 0.9);
        assert_eq!(cell.support(), 10);
        assert_eq!(m.cells[0][1], None);
        assert_eq!(m.unmapped, 1);
        assert!((m.rate("r1", "Cultural Expectations", "Boundary Awareness").unwrap() - 0.1).abs() < 1e-12);
        assert!(m.to_csv().starts_with("pair,r1,r2\nBoundary Awareness vs. Cultural Expectations,0.9,\n"));
        assert!(m.to_svg().contains("<svg"));
        assert!(win_rate_matrix(&logs, &tbl, 11).is_err());
    }

    #[test]
    fn cooccurrence_log_smoothing() {
        use crate::corpus::{Instance, Situation, VerdictCode};
        use crate::values::{SchwartzAnnotation, ValueConflict};
        let corpus = Corpus::new(
            vec![Situation { situation_id: "s1".into(), title: "t".into(), body: String::new() }],
            vec![Instance {
                instance_id: "i1".into(),
                situation_id: "s1".into(),
                redditor_id: "r".into(),
                comment: "c".into(),
                verdict: VerdictCode::Nta,
                judgment: crate::corpus::map_verdict(VerdictCode::Nta),
                created_at: None,
            }],
        )
        .unwrap();
        let mut ann = AnnotationStore::default();
        ann.schwartz.insert(
            "i1".into(),
            SchwartzAnnotation::new(
                [SchwartzValue::Security, SchwartzValue::SelfDirection],
                [SchwartzValue::Power, SchwartzValue::Hedonism],
            )
            .unwrap(),
        );
        ann.conflicts.insert(
            "s1".into(),
            vec![ValueConflict::new("setting personal limits", "honoring family customs").unwrap()],
        );
        let tbl = table(&[
            ("Boundaries", &["setting personal limits"]),
            ("Customs", &["honoring family customs"]),
            ("Unused", &["something else entirely"]),
        ]);
        let m = cooccurrence_counts(&corpus, &ann, &tbl);
        let sec = SchwartzValue::ALL.iter().position(|v| *v == SchwartzValue::Security).unwrap();
        let pow = SchwartzValue::ALL.iter().position(|v| *v == SchwartzValue::Power).unwrap();
        assert_eq!(m.counts[0][sec], 1);
        assert!((m.log_counts[0][sec] - 2f64.ln()).abs() < 1e-12);
        assert_eq!(m.log_counts[0][pow], 0.0);
        assert_eq!(m.counts[2].iter().sum::<usize>(), 0);
    }

    #[test]
    fn projection_recovers_axes() {
        let pts = [[-3.0, 0.0], [3.0, 0.0], [0.0, -1.0], [0.0, 1.0]];
        let vecs: Vec<EmbeddingVector> = pts.iter().map(|p| EmbeddingVector::new(p.to_vec()).unwrap()).collect();
        let out = project_2d(&vecs).unwrap();
        for (p, q) in pts.iter().zip(&out) {
            assert!((p[0].abs() - q[0].abs()).abs() < 1e-9 && (p[1].abs() - q[1].abs()).abs() < 1e-9);
        }
        let same = vec![EmbeddingVector::new(vec![1.0, 1.0]).unwrap(); 3];
        assert!(matches!(project_2d(&same), Err(Error::Degenerate(_))));
        assert!(project_2d(&vecs[..2]).is_err());
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 35.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(r > 0.9 && r < 1.0);
    }

    proptest! {
        #[test]
        fn complementary_rates(choices in prop::collection::vec((0usize..3, 0usize..3, 0usize..2), 1..80)) {
            let names = ["Alpha value", "Beta value", "Gamma value"];
            let phrases = ["alpha one two", "beta one two", "gamma one two"];
            let tbl = table(&[(names[0], &[phrases[0]]), (names[1], &[phrases[1]]), (names[2], &[phrases[2]])]);
            let mut logs: BTreeMap<String, Vec<TradeOff>> = BTreeMap::new();
            for (a, b, who) in choices {
                if a != b {
                    logs.entry(format!("r{who}")).or_default().push(t(phrases[a], phrases[b]));
                }
            }
            if let Ok(m) = win_rate_matrix(&logs, &tbl, 1) {
                for (ri, (a, b)) in m.rows.iter().enumerate() {
                    for (ci, r) in m.cols.iter().enumerate() {
                        if let Some(cell) = m.cells[ri][ci] {
                            let ab = m.rate(r, a, b).unwrap();
                            let ba = m.rate(r, b, a).unwrap();
                            prop_assert!((ab + ba - 1.0).abs() < 1e-12);
                            prop_assert!((0.0..=1.0).contains(&cell.rate));
                            let total = logs[r].iter().filter(|x| {
                                let s = [x.preferred.as_str(), x.rejected.as_str()];
                                s.contains(&phrases[names.iter().position(|n| n == a).unwrap()])
                                    && s.contains(&phrases[names.iter().position(|n| n == b).unwrap()])
                            }).count();
                            prop_assert_eq!(cell.support(), total);
                        }
                    }
                }
            }
        }
    }
}
