//! Plain-text edge lists: one arc per line, `src dst [weight]`, whitespace
//! separated, `#` starts a comment line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{LayerGraph, NetworkError};

/// Reads an edge list with dense 0-based integer ids.
///
/// The layer has `max id + 1` nodes. Undirected input materializes both
/// directions; duplicate arcs are summed.
pub fn load_edge_list(
    path: impl AsRef<Path>,
    directed: bool,
    default_weight: f64,
) -> Result<LayerGraph, NetworkError> {
    let file = File::open(path)?;
    parse_edge_list(BufReader::new(file), directed, default_weight)
}

pub fn parse_edge_list<R: BufRead>(
    reader: R,
    directed: bool,
    default_weight: f64,
) -> Result<LayerGraph, NetworkError> {
    let mut arcs = Vec::new();
    let mut max_id: Option<usize> = None;
    for_each_arc(reader, default_weight, |line, src, dst, w| {
        let s = parse_id(src, line)?;
        let d = parse_id(dst, line)?;
        if s == d {
            return Err(NetworkError::InvalidArc {
                line,
                msg: format!("self-loop on node {s}"),
            });
        }
        max_id = Some(max_id.map_or(s.max(d), |m| m.max(s).max(d)));
        arcs.push((s, d, w));
        Ok(())
    })?;
    build(max_id.map_or(0, |m| m + 1), arcs, directed)
}

/// Maps arbitrary string labels onto dense node ids in first-seen order.
#[derive(Clone, Debug, Default)]
pub struct NodeLabels {
    ids: HashMap<String, usize>,
    labels: Vec<String>,
}

impl NodeLabels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, label: &str) -> usize {
        if let Some(&id) = self.ids.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.ids.insert(label.to_owned(), id);
        self.labels.push(label.to_owned());
        id
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.ids.get(label).copied()
    }

    pub fn label(&self, id: usize) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Reads an edge list whose endpoints are string labels. Sharing one
/// `NodeLabels` across several calls keeps ids consistent between layers.
/// The resulting layer spans every label interned so far.
pub fn parse_labeled_edge_list<R: BufRead>(
    reader: R,
    directed: bool,
    default_weight: f64,
    labels: &mut NodeLabels,
) -> Result<LayerGraph, NetworkError> {
    let mut arcs = Vec::new();
    for_each_arc(reader, default_weight, |line, src, dst, w| {
        if src == dst {
            return Err(NetworkError::InvalidArc {
                line,
                msg: format!("self-loop on node {src:?}"),
            });
        }
        arcs.push((labels.intern(src), labels.intern(dst), w));
        Ok(())
    })?;
    build(labels.len(), arcs, directed)
}

/// Writes `g` as an edge list. With `undirected` set only arcs with
/// `src < dst` are written, which is lossless for symmetric layers.
/// Weights are omitted when every weight is exactly 1.
pub fn write_edge_list<W: Write>(
    g: &LayerGraph,
    mut out: W,
    undirected: bool,
) -> std::io::Result<()> {
    let unit = g.out_index().weights().iter().all(|&w| w == 1.0);
    for (i, j, w) in g.arcs() {
        if undirected && i > j {
            continue;
        }
        if unit {
            writeln!(out, "{i} {j}")?;
        } else {
            writeln!(out, "{i} {j} {w:?}")?;
        }
    }
    out.flush()
}

fn build(
    n: usize,
    arcs: Vec<(usize, usize, f64)>,
    directed: bool,
) -> Result<LayerGraph, NetworkError> {
    if directed {
        LayerGraph::from_arcs(n, arcs)
    } else {
        LayerGraph::from_undirected(n, arcs)
    }
}

fn for_each_arc<R, F>(reader: R, default_weight: f64, mut f: F) -> Result<(), NetworkError>
where
    R: BufRead,
    F: FnMut(usize, &str, &str, f64) -> Result<(), NetworkError>,
{
    if !(default_weight.is_finite() && default_weight > 0.0) {
        return Err(NetworkError::BadWeight(default_weight));
    }
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        let weight = match fields.len() {
            2 => default_weight,
            3 => {
                let w: f64 = fields[2].parse().map_err(|_| NetworkError::Parse {
                    line: lineno,
                    msg: format!("bad weight {:?}", fields[2]),
                })?;
                if !(w.is_finite() && w > 0.0) {
                    return Err(NetworkError::InvalidArc {
                        line: lineno,
                        msg: format!("weight {w} is not strictly positive and finite"),
                    });
                }
                w
            }
            k => {
                return Err(NetworkError::Parse {
                    line: lineno,
                    msg: format!("expected `src dst [weight]`, found {k} fields"),
                })
            }
        };
        f(lineno, fields[0], fields[1], weight)?;
    }
    Ok(())
}

fn parse_id(field: &str, line: usize) -> Result<usize, NetworkError> {
    field.parse().map_err(|_| NetworkError::Parse {
        line,
        msg: format!("bad node id {field:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, directed: bool) -> Result<LayerGraph, NetworkError> {
        parse_edge_list(text.as_bytes(), directed, 1.0)
    }

    #[test]
    fn undirected_path_materializes_both_directions() {
        let g = parse("0 1\n1 2", false).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.arc_count(), 4);
        assert!(g.arcs().all(|(_, _, w)| w == 1.0));
    }

    #[test]
    fn duplicates_sum() {
        let g = parse("0 1 2.0\n0 1 3.0", true).unwrap();
        assert_eq!(g.arc_count(), 1);
        assert_eq!(g.out_neighbors(0).unwrap().to_vec(), vec![(1, 5.0)]);
    }

    #[test]
    fn self_loop_rejected() {
        let err = parse("0 0 1.0", true).unwrap_err();
        assert!(
            matches!(err, NetworkError::InvalidArc { line: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn comments_crlf_and_blank_lines() {
        let g = parse(
            "# header\r\n0 1 0.5\r\n\r\n  # indented comment\n2 1\n",
            true,
        )
        .unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.in_weights(1).unwrap().to_vec(), vec![(0, 0.5), (2, 1.0)]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse("0 1\n0 x\n", true).unwrap_err() {
            NetworkError::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
        match parse("0 1\n1 2\n3\n", true).unwrap_err() {
            NetworkError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        for bad in ["0 1 -2", "0 1 0", "0 1 NaN"] {
            assert!(matches!(
                parse(bad, true).unwrap_err(),
                NetworkError::InvalidArc { line: 1, .. }
            ));
        }
    }

    #[test]
    fn labeled_lists_share_ids() {
        let mut labels = NodeLabels::new();
        let a = parse_labeled_edge_list("alice bob\nbob carol".as_bytes(), false, 1.0, &mut labels)
            .unwrap();
        let b =
            parse_labeled_edge_list("carol alice 2".as_bytes(), true, 1.0, &mut labels).unwrap();
        assert_eq!(labels.len(), 3);
        assert_eq!(a.node_count(), 3);
        assert_eq!(labels.id("carol"), Some(2));
        assert_eq!(labels.label(1), Some("bob"));
        assert_eq!(b.out_neighbors(2).unwrap().to_vec(), vec![(0, 2.0)]);
    }

    #[test]
    fn write_then_read_back() {
        let g = LayerGraph::from_undirected(4, [(0, 1, 1.5), (2, 3, 0.1), (1, 3, 7.0)]).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf, true).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 3);
        assert_eq!(parse_edge_list(buf.as_slice(), false, 1.0).unwrap(), g);
    }
}
