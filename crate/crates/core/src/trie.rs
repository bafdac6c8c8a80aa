//! Immutable byte trie over a fixed-length prefix set.
//!
//! All nodes live in one pool and refer to each other by `u32` index. A node
//! with at most [`MICRO_MAX`] children stores its sorted child bytes and
//! targets inline and is scanned linearly; wider nodes own a 256-entry table
//! indexed by the next byte. Edges on the last level point at leaf ordinals rather than nodes, so
//! leaves take no pool space.
//!
//! The pool is laid out depth-first with the children of each node visited
//! in order of their most frequent descendant, so the nodes on the path of
//! the most frequent prefixes sit next to each other.

use std::collections::BTreeMap;

use crate::topk::TopKList;

/// Widest node that still uses a linear child scan.
pub const MICRO_MAX: usize = 4;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    labels: [u8; MICRO_MAX],
    /// Number of children; `0..=256`.
    len: u16,
    wide: bool,
    /// Child targets, or the table index in slot 0 for wide nodes.
    targets: [u32; MICRO_MAX],
}

/// Pool order of the built trie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrieLayout {
    /// Depth-first, children ordered by the rank of their best leaf.
    #[default]
    FrequencyOrdered,
    /// Breadth-first, children ordered by byte value.
    ByteOrdered,
}

#[derive(Debug, Clone, Default)]
pub struct PrefixTrie {
    depth: usize,
    len: usize,
    nodes: Vec<Node>,
    tables: Vec<[u32; 256]>,
    /// Target after the first two bytes, indexed by those bytes; empty when
    /// the depth is below two.
    jump: Vec<u32>,
}

/// Build-time tree; children keyed by byte.
#[derive(Default)]
struct Scratch {
    children: BTreeMap<u8, usize>,
    /// Best (smallest) ordinal in the subtree.
    best: u32,
}

impl PrefixTrie {
    /// Builds a trie whose ordinals follow list rank order.
    pub fn from_topk(list: &TopKList) -> Self {
        Self::build(list.grams(), TrieLayout::default())
    }

    /// Builds a trie from grams given in rank order; the i-th gram gets
    /// ordinal `i`.
    ///
    /// Panics if lengths differ, a gram is empty, or a gram repeats.
    pub fn build<'a, I>(grams: I, layout: TrieLayout) -> Self
    where
        I: IntoIterator<Item = &'a [u8]>,
    {
        let mut scratch = vec![Scratch {
            best: NONE,
            ..Default::default()
        }];
        let mut depth = None;
        let mut count = 0usize;
        for (ordinal, gram) in grams.into_iter().enumerate() {
            let d = *depth.get_or_insert(gram.len());
            assert!(d >= 1, "prefix trie grams must be non-empty");
            assert_eq!(gram.len(), d, "prefix trie grams must share one length");
            let ordinal = u32::try_from(ordinal).expect("too many prefixes");
            let mut at = 0;
            scratch[at].best = scratch[at].best.min(ordinal);
            for &b in &gram[..d - 1] {
                at = match scratch[at].children.get(&b) {
                    Some(&next) => next,
                    None => {
                        scratch.push(Scratch {
                            best: NONE,
                            ..Default::default()
                        });
                        let next = scratch.len() - 1;
                        scratch[at].children.insert(b, next);
                        next
                    }
                };
                scratch[at].best = scratch[at].best.min(ordinal);
            }
            let last = gram[d - 1];
            let dup = scratch[at].children.insert(last, count).is_some();
            assert!(!dup, "duplicate prefix {gram:?}");
            count += 1;
        }
        let Some(depth) = depth else {
            return PrefixTrie::default();
        };

        // Last-level edges hold the leaf ordinal itself.
        let child_best = |s: &Vec<Scratch>, node_depth: usize, target: usize| -> u32 {
            if node_depth + 1 == depth {
                target as u32
            } else {
                s[target].best
            }
        };

        // Pool order: each entry is (scratch index, depth).
        let mut order: Vec<(usize, usize)> = Vec::with_capacity(scratch.len());
        match layout {
            TrieLayout::FrequencyOrdered => {
                let mut stack = vec![(0usize, 0usize)];
                while let Some((node, d)) = stack.pop() {
                    order.push((node, d));
                    if d + 1 == depth {
                        continue;
                    }
                    let mut kids: Vec<usize> = scratch[node].children.values().copied().collect();
                    kids.sort_by_key(|&c| child_best(&scratch, d, c));
                    stack.extend(kids.into_iter().rev().map(|c| (c, d + 1)));
                }
            }
            TrieLayout::ByteOrdered => {
                let mut queue = std::collections::VecDeque::from([(0usize, 0usize)]);
                while let Some((node, d)) = queue.pop_front() {
                    order.push((node, d));
                    if d + 1 < depth {
                        queue.extend(scratch[node].children.values().map(|&c| (c, d + 1)));
                    }
                }
            }
        }
        let mut pool_index = vec![NONE; scratch.len()];
        for (i, &(node, _)) in order.iter().enumerate() {
            pool_index[node] = i as u32;
        }

        let mut trie = PrefixTrie {
            depth,
            len: count,
            nodes: Vec::with_capacity(order.len()),
            ..Default::default()
        };
        for &(node, d) in &order {
            let kids = &scratch[node].children;
            let target_of = |c: usize| {
                if d + 1 == depth {
                    c as u32
                } else {
                    pool_index[c]
                }
            };
            if kids.len() > MICRO_MAX {
                let mut table = [NONE; 256];
                for (&b, &c) in kids {
                    table[b as usize] = target_of(c);
                }
                trie.nodes.push(Node {
                    labels: [0; MICRO_MAX],
                    len: kids.len() as u16,
                    wide: true,
                    targets: [trie.tables.len() as u32, 0, 0, 0],
                });
                trie.tables.push(table);
            } else {
                let mut n = Node {
                    labels: [0; MICRO_MAX],
                    len: kids.len() as u16,
                    wide: false,
                    targets: [NONE; MICRO_MAX],
                };
                for (i, (&b, &c)) in kids.iter().enumerate() {
                    n.labels[i] = b;
                    n.targets[i] = target_of(c);
                }
                trie.nodes.push(n);
            }
        }
        if depth >= 2 {
            trie.jump = vec![NONE; 1 << 16];
            for b0 in 0..=255u8 {
                let n = trie.child(&trie.nodes[0], b0);
                if n == NONE {
                    continue;
                }
                for b1 in 0..=255u8 {
                    trie.jump[(b0 as usize) << 8 | b1 as usize] = trie.child(&trie.nodes[n as usize], b1);
                }
            }
        }
        trie
    }

    /// Gram length; 0 for an empty trie.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of stored prefixes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of interior nodes in the pool.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of nodes that use a 256-entry child table.
    pub fn wide_nodes(&self) -> usize {
        self.tables.len()
    }

    /// Approximate heap footprint of the pool.
    pub fn memory_bytes(&self) -> usize {
        self.nodes.len() * std::mem::size_of::<Node>()
            + self.tables.len() * 256 * 4
            + self.jump.len() * 4
    }

    #[inline]
    fn child(&self, node: &Node, byte: u8) -> u32 {
        if node.wide {
            self.tables[node.targets[0] as usize][byte as usize]
        } else {
            for i in 0..node.len as usize {
                if node.labels[i] == byte {
                    return node.targets[i];
                }
            }
            NONE
        }
    }

    /// Ordinal of `window` if it is stored.
    ///
    /// Stops at the first byte without a matching child. Panics if the
    /// window length differs from the trie depth (empty tries accept any
    /// length and always miss).
    #[inline]
    pub fn lookup(&self, window: &[u8]) -> Option<u32> {
        if self.len == 0 {
            return None;
        }
        assert_eq!(window.len(), self.depth, "lookup window length mismatch");
        let (mut node, rest) = match window {
            [b0, b1, rest @ ..] => (self.jump[(*b0 as usize) << 8 | *b1 as usize], rest),
            _ => (0, window),
        };
        for &b in rest {
            if node == NONE {
                return None;
            }
            node = self.child(&self.nodes[node as usize], b);
        }
        (node != NONE).then_some(node)
    }

    pub fn contains(&self, window: &[u8]) -> bool {
        self.lookup(window).is_some()
    }
}
