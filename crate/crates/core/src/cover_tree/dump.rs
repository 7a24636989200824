//! Line-based tree dumps.
//!
//! ```text
//! # cover-tree v1
//! # metric=interval d=1 c=1 lo=0 hi=1
//! 1	0	0	-	1,3
//! 2	0.6	1	1	-
//! ```
//!
//! Fields are the 1-based index `k`, comma-separated coordinates, the rank
//! `L_k`, the 1-based parent (`-` for the root) and the generation ranks in
//! order of appearance. Floats use the shortest round-trip representation.

#![allow(clippy::tabs_in_doc_comments)]

use std::fmt::Write as _;

use super::{CoverTree, CoverTreeNode};
use crate::error::{Error, Result};
use crate::metric::{MetricKind, MetricSpace, Point};

const MAGIC: &str = "# cover-tree v1";

fn join<T: ToString>(v: &[T]) -> String {
    if v.is_empty() {
        "-".into()
    } else {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
    }
}

pub fn dump_tree(tree: &CoverTree) -> String {
    let s = tree.space();
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(
        out,
        "# metric={} d={} c={} lo={} hi={}",
        s.kind,
        s.doubling_dim,
        s.doubling_const,
        join(&s.domain.lo),
        join(&s.domain.hi)
    )
    .unwrap();
    for (k, n) in tree.nodes().iter().enumerate() {
        let parent = n.parent.map(|p| (p + 1).to_string()).unwrap_or_else(|| "-".into());
        writeln!(out, "{}\t{}\t{}\t{}\t{}", k + 1, join(&n.point), n.rank, parent, join(&n.generation_ranks)).unwrap();
    }
    out
}

fn bad(line: usize, what: &str) -> Error {
    Error::Parse(format!("tree dump line {line}: {what}"))
}

fn floats(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split(',').map(|v| v.parse::<f64>().map_err(|_| bad(line, "bad number"))).collect()
}

pub fn parse_tree(text: &str) -> Result<CoverTree> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        _ => return Err(bad(1, "missing header")),
    }
    let (_, meta) = lines.next().ok_or_else(|| bad(2, "missing metadata"))?;
    let mut kind = None;
    let (mut d, mut c, mut lo, mut hi) = (None, None, None, None);
    for field in meta.trim_start_matches('#').split_whitespace() {
        let (k, v) = field.split_once('=').ok_or_else(|| bad(2, "bad metadata"))?;
        match k {
            "metric" => {
                kind = Some(match v {
                    "sup" => MetricKind::Sup,
                    "euclidean" => MetricKind::Euclidean,
                    "interval" => MetricKind::Interval,
                    _ => return Err(bad(2, "unknown metric")),
                })
            }
            "d" => d = Some(v.parse::<u32>().map_err(|_| bad(2, "bad d"))?),
            "c" => c = Some(v.parse::<f64>().map_err(|_| bad(2, "bad c"))?),
            "lo" => lo = Some(floats(v, 2)?),
            "hi" => hi = Some(floats(v, 2)?),
            _ => return Err(bad(2, "unknown metadata key")),
        }
    }
    let missing = || bad(2, "incomplete metadata");
    let space = MetricSpace::new(kind.ok_or_else(missing)?, lo.ok_or_else(missing)?, hi.ok_or_else(missing)?)?
        .with_doubling(d.ok_or_else(missing)?, c.ok_or_else(missing)?)?;
    let mut tree = CoverTree::new(&space);
    let mut declared: Vec<Vec<u32>> = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(ln, "expected 5 fields"));
        }
        let k: usize = f[0].parse().map_err(|_| bad(ln, "bad index"))?;
        if k != tree.nodes.len() + 1 {
            return Err(bad(ln, "indices must be consecutive"));
        }
        let point = Point(floats(f[1], ln)?);
        space.check_point(&point)?;
        let rank: u32 = f[2].parse().map_err(|_| bad(ln, "bad rank"))?;
        let parent = match f[3] {
            "-" => None,
            p => {
                let p: usize = p.parse().map_err(|_| bad(ln, "bad parent"))?;
                if p == 0 || p >= k {
                    return Err(bad(ln, "parent must precede its child"));
                }
                Some(p - 1)
            }
        };
        if parent.is_none() != (k == 1) {
            return Err(bad(ln, "exactly the first node is the root"));
        }
        declared.push(if f[4] == "-" {
            vec![]
        } else {
            f[4].split(',').map(|v| v.parse().map_err(|_| bad(ln, "bad generation"))).collect::<Result<_>>()?
        });
        let n = tree.nodes.len();
        if let Some(p) = parent {
            let pn = &mut tree.nodes[p];
            pn.children.push(n);
            if !pn.generation_ranks.contains(&rank) {
                pn.generation_ranks.push(rank);
                pn.generation_born.push(n + 1);
            }
            let mut a = Some(p);
            while let Some(j) = a {
                let d = space.dist(&tree.nodes[j].point, &point);
                tree.nodes[j].radius = tree.nodes[j].radius.max(d);
                a = tree.nodes[j].parent;
            }
        }
        tree.nodes.push(CoverTreeNode {
            point,
            rank,
            parent,
            children: vec![],
            generation_ranks: vec![],
            generation_born: vec![],
            radius: 0.0,
            ids: vec![n],
        });
    }
    for (k, gens) in declared.iter().enumerate() {
        if *gens != tree.nodes[k].generation_ranks {
            return Err(bad(k + 3, "generation ranks disagree with the children"));
        }
    }
    tree.inserted = tree.nodes.len();
    Ok(tree)
}
