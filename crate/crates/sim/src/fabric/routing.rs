//! Dimension-order routing and dateline virtual-channel selection.

use apeiron_core::{Direction, PacketHeader, Topology, TorusCoord};

use super::port::{PortId, Vc};

/// Output port for a packet at `cur`.
///
/// At the destination the packet leaves on the IntraNode port of its
/// task; otherwise it moves along the lowest dimension whose offset is
/// still non-zero, in the direction of the minimal offset.
pub fn route(topo: &Topology, cur: &TorusCoord, hdr: &PacketHeader) -> PortId {
    for dim in 0..topo.dims() {
        let off = topo.offset(cur, &hdr.dest, dim);
        if off != 0 {
            let dir = if off > 0 {
                Direction::Plus
            } else {
                Direction::Minus
            };
            return PortId::Inter {
                dim: dim as u8,
                dir,
            };
        }
    }
    PortId::Intra(hdr.task_id.get())
}

/// Virtual channel for the next hop through `out`.
///
/// `current_vc` is the channel the packet holds in its current ring; a
/// caller moving a packet into a new dimension (or injecting it) passes
/// VC0. The packet moves to VC1 on the hop that uses the ring's wrap link
/// and keeps it for the rest of that ring.
///
/// Panics if `out` is an IntraNode port.
pub fn select_vc(current_vc: Vc, topo: &Topology, cur: &TorusCoord, out: PortId) -> Vc {
    let PortId::Inter { dim, dir } = out else {
        panic!("select_vc called for IntraNode port {out}");
    };
    if current_vc == Vc::V1 || topo.crosses_dateline(cur, usize::from(dim), dir) {
        Vc::V1
    } else {
        Vc::V0
    }
}

/// Hops the packet would take from `src` under dimension-order routing.
pub fn dor_hops(topo: &Topology, src: &TorusCoord, dest: &TorusCoord) -> u32 {
    (0..topo.dims())
        .map(|d| topo.offset(src, dest, d).unsigned_abs() as u32)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use apeiron_core::{ChannelId, TaskId};
    use std::collections::VecDeque;

    fn hdr(dest: &[u32], task: u8) -> PacketHeader {
        PacketHeader {
            dest: TorusCoord::from(dest),
            task_id: TaskId::new(task).unwrap(),
            ch_id: ChannelId::new(0).unwrap(),
            payload_len: 1,
            src: TorusCoord::from(dest),
        }
    }

    #[test]
    fn route_examples() {
        let t = Topology::new(vec![4, 4]).unwrap();
        assert_eq!(route(&t, &TorusCoord::from(&[1, 1][..]), &hdr(&[1, 1], 2)), PortId::Intra(2));
        assert_eq!(
            route(&t, &TorusCoord::from(&[0, 0][..]), &hdr(&[0, 3], 0)),
            PortId::Inter { dim: 1, dir: Direction::Minus }
        );
        assert_eq!(
            route(&t, &TorusCoord::from(&[0, 0][..]), &hdr(&[2, 1], 0)),
            PortId::Inter { dim: 0, dir: Direction::Plus }
        );
    }

    #[test]
    fn select_vc_examples() {
        let ring = Topology::new(vec![4]).unwrap();
        let plus = PortId::Inter { dim: 0, dir: Direction::Plus };
        let minus = PortId::Inter { dim: 0, dir: Direction::Minus };
        let at = |x: u32| TorusCoord::new(vec![x]);
        assert_eq!(select_vc(Vc::V0, &ring, &at(3), plus), Vc::V1);
        assert_eq!(select_vc(Vc::V0, &ring, &at(1), plus), Vc::V0);
        assert_eq!(select_vc(Vc::V0, &ring, &at(0), minus), Vc::V1);
        assert_eq!(select_vc(Vc::V0, &ring, &at(2), minus), Vc::V0);
        // once past the dateline the packet stays on VC1 in this ring
        assert_eq!(select_vc(Vc::V1, &ring, &at(0), plus), Vc::V1);
    }

    /// Walks the route hop by hop and compares with a BFS distance.
    #[test]
    fn dor_walk_is_minimal_on_small_tori() {
        for sizes in [vec![5], vec![3, 4], vec![2, 3, 2]] {
            let t = Topology::new(sizes).unwrap();
            for src in t.coords() {
                let dist = bfs(&t, &src);
                for dest in t.coords() {
                    let h = hdr(dest.as_slice(), 1);
                    let mut cur = src.clone();
                    let mut hops = 0;
                    loop {
                        match route(&t, &cur, &h) {
                            PortId::Intra(p) => {
                                assert_eq!(p, 1);
                                break;
                            }
                            PortId::Inter { dim, dir } => {
                                cur = t.neighbor(&cur, usize::from(dim), dir);
                                hops += 1;
                            }
                        }
                    }
                    assert_eq!(cur, dest);
                    assert_eq!(hops, dist[t.index_of(&dest)]);
                    assert_eq!(dor_hops(&t, &src, &dest), hops);
                }
            }
        }
    }

    fn bfs(t: &Topology, src: &TorusCoord) -> Vec<u32> {
        let mut dist = vec![u32::MAX; t.node_count()];
        dist[t.index_of(src)] = 0;
        let mut q = VecDeque::from([src.clone()]);
        while let Some(c) = q.pop_front() {
            let d = dist[t.index_of(&c)];
            for dim in 0..t.dims() {
                for dir in [Direction::Plus, Direction::Minus] {
                    let n = t.neighbor(&c, dim, dir);
                    let i = t.index_of(&n);
                    if dist[i] == u32::MAX {
                        dist[i] = d + 1;
                        q.push_back(n);
                    }
                }
            }
        }
        dist
    }
}
