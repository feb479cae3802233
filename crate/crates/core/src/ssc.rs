//! Sufficient disk-separation test for the strong separation condition.
//!
//! Cylinder disks `f_u(D)` are nested, so once every pair of depth-`d`
//! disks descending from distinct first symbols is disjoint, the first-level
//! pieces `f_i(K)` are disjoint as well.

use serde::Serialize;

use crate::ifs::{ComplexVal, Disk, IfsSystem};

/// Stop refining overlapping pairs beyond this many per level.
const MAX_PAIRS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SscStatus {
    Proven,
    Refuted,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SscVerdict {
    pub status: SscStatus,
    /// Depth at which separation was established (or the last depth examined).
    pub depth_used: usize,
    /// Smallest gap between depth-`depth_used` disks from distinct first-level
    /// branches; negative when some pair still overlaps.
    pub min_gap: f64,
}

impl SscVerdict {
    pub fn is_proven(&self) -> bool {
        self.status == SscStatus::Proven
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    scale: ComplexVal,
    offset: ComplexVal,
}

impl Node {
    fn root() -> Self {
        Node {
            scale: ComplexVal::new(1.0, 0.0),
            offset: ComplexVal::new(0.0, 0.0),
        }
    }

    fn child(&self, system: &IfsSystem, i: usize) -> Node {
        Node {
            scale: self.scale * system.lambda(),
            offset: self.offset + self.scale * system.translations()[i],
        }
    }

    fn disk(&self, base: &Disk) -> Disk {
        Disk {
            center: self.scale * base.center + self.offset,
            radius: self.scale.norm() * base.radius,
        }
    }
}

fn children<'a>(system: &'a IfsSystem, node: &Node) -> impl Iterator<Item = Node> + 'a {
    let node = *node;
    (0..system.len()).map(move |i| node.child(system, i))
}

fn top_pairs(system: &IfsSystem) -> Vec<(Node, Node)> {
    let root = Node::root();
    let kids: Vec<Node> = children(system, &root).collect();
    let mut pairs = Vec::new();
    for i in 0..kids.len() {
        for j in i + 1..kids.len() {
            pairs.push((kids[i], kids[j]));
        }
    }
    pairs
}

/// Hierarchical disk test up to `max_depth` levels.
pub fn check_ssc(system: &IfsSystem, max_depth: usize) -> SscVerdict {
    let max_depth = max_depth.max(1);
    let base = system.bounding_disk();
    let mut overlapping: Vec<(Node, Node)> = top_pairs(system)
        .into_iter()
        .filter(|(u, v)| u.disk(&base).gap(&v.disk(&base)) <= 0.0)
        .collect();
    let mut depth = 1;
    loop {
        if overlapping.is_empty() {
            return SscVerdict {
                status: SscStatus::Proven,
                depth_used: depth,
                min_gap: cross_branch_min_gap(system, depth),
            };
        }
        if depth == max_depth {
            break;
        }
        let mut next = Vec::new();
        for (u, v) in &overlapping {
            for cu in children(system, u) {
                let du = cu.disk(&base);
                for cv in children(system, v) {
                    if du.gap(&cv.disk(&base)) <= 0.0 {
                        next.push((cu, cv));
                    }
                }
            }
            if next.len() > MAX_PAIRS {
                break;
            }
        }
        depth += 1;
        overlapping = next;
        if overlapping.len() > MAX_PAIRS {
            break;
        }
    }

    // Overlap persisted. Look for a sampled witness: two cylinder atoms from
    // distinct branches, each inside the other's disk.
    let b = system.barycenter();
    let witnessed = overlapping.iter().any(|(u, v)| {
        let (du, dv) = (u.disk(&base), v.disk(&base));
        let (pu, pv) = (u.scale * b + u.offset, v.scale * b + v.offset);
        dv.contains(pu, 0.0) && du.contains(pv, 0.0)
    });
    let min_gap = overlapping
        .iter()
        .map(|(u, v)| u.disk(&base).gap(&v.disk(&base)))
        .fold(f64::INFINITY, f64::min);
    SscVerdict {
        status: if witnessed {
            SscStatus::Refuted
        } else {
            SscStatus::Unknown
        },
        depth_used: depth,
        min_gap,
    }
}

/// Smallest gap between depth-`depth` disks whose words differ in the first
/// symbol (branch and bound: children never come closer than their parents).
pub fn cross_branch_min_gap(system: &IfsSystem, depth: usize) -> f64 {
    let base = system.bounding_disk();
    let mut best = f64::INFINITY;
    let mut stack: Vec<(Node, Node, usize)> =
        top_pairs(system).into_iter().map(|(u, v)| (u, v, 1)).collect();
    while let Some((u, v, level)) = stack.pop() {
        let gap = u.disk(&base).gap(&v.disk(&base));
        if gap >= best {
            continue;
        }
        if level == depth {
            best = gap;
            continue;
        }
        for cu in children(system, &u) {
            for cv in children(system, &v) {
                stack.push((cu, cv, level + 1));
            }
        }
    }
    best
}

/// Smallest gap among all distinct depth-`d` disks for `d = 1..=depth`.
///
/// A pair sharing a prefix of length `m` is the image under a similarity of
/// ratio `r^m` of a cross-branch pair at depth `d - m`.
pub fn disk_gap_profile(system: &IfsSystem, depth: usize) -> Vec<f64> {
    let cross: Vec<f64> = (1..=depth).map(|e| cross_branch_min_gap(system, e)).collect();
    (1..=depth)
        .map(|d| {
            (0..d)
                .map(|m| system.r().powi(m as i32) * cross[d - m - 1])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::presets::*;
    use crate::ifs::{cylinder_map, validate_system, Word};

    #[test]
    fn sys_a_proven_at_depth_one() {
        let v = check_ssc(&sys_a(), 1);
        assert_eq!(v.status, SscStatus::Proven);
        assert_eq!(v.depth_used, 1);
        // R = √2/0.65, image radius rR, centers at ±1±i (min distance 2).
        let rr = 0.35 * 2f64.sqrt() / 0.65;
        assert!((v.min_gap - (2.0 - 2.0 * rr)).abs() < 1e-12);
        assert!((v.min_gap - 0.477).abs() < 1e-3);
    }

    #[test]
    fn overlapping_system_not_proven() {
        let s = validate_system(
            ComplexVal::new(0.9, 0.0),
            &[ComplexVal::new(0.0, 0.0), ComplexVal::new(0.0, 0.1)],
            &[0.5, 0.5],
        )
        .unwrap();
        let v = check_ssc(&s, 6);
        assert_ne!(v.status, SscStatus::Proven);
        assert!(v.min_gap < 0.0);
    }

    #[test]
    fn brute_force_min_gap_matches() {
        let s = sys_b();
        let base = s.bounding_disk();
        for depth in 1..=3usize {
            let n = 4usize.pow(depth as u32);
            let disks: Vec<(usize, Disk)> = (0..n)
                .map(|rank| {
                    let w = Word::from_rank(rank, 4, depth);
                    let m = cylinder_map(&s, &w).unwrap();
                    (w.indices()[0], s.cylinder_disk(&m))
                })
                .collect();
            let mut cross = f64::INFINITY;
            let mut all = f64::INFINITY;
            for a in 0..n {
                for b in a + 1..n {
                    let g = disks[a].1.gap(&disks[b].1);
                    all = all.min(g);
                    if disks[a].0 != disks[b].0 {
                        cross = cross.min(g);
                    }
                }
            }
            assert!((cross_branch_min_gap(&s, depth) - cross).abs() < 1e-12);
            assert!((disk_gap_profile(&s, depth)[depth - 1] - all).abs() < 1e-12);
            assert!(base.radius > 0.0);
        }
    }

    #[test]
    fn gap_profile_positive_and_nonincreasing() {
        let profile = disk_gap_profile(&sys_a(), 6);
        assert!(profile.iter().all(|g| *g > 0.0));
        for w in profile.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }
}
