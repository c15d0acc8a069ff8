use alloc::vec::Vec;

/// Dense row-major cost matrix. `+∞` (or any non-finite value) marks a
/// forbidden pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost matrix size mismatch");
        CostMatrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CostMatrix { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn transposed(&self) -> CostMatrix {
        CostMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }
}

/// Cost ordered lexicographically: number of forbidden pairs first, then the
/// finite total. Minimising it maximises the feasible matching size before
/// minimising cost.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Lex {
    forbidden: i64,
    cost: f64,
}

impl Lex {
    const ZERO: Lex = Lex { forbidden: 0, cost: 0.0 };
    const INF: Lex = Lex { forbidden: i64::MAX / 4, cost: 0.0 };

    fn of(v: f64) -> Lex {
        if v.is_finite() {
            Lex { forbidden: 0, cost: v }
        } else {
            Lex { forbidden: 1, cost: 0.0 }
        }
    }

    fn add(self, o: Lex) -> Lex {
        Lex { forbidden: self.forbidden + o.forbidden, cost: self.cost + o.cost }
    }

    fn sub(self, o: Lex) -> Lex {
        Lex { forbidden: self.forbidden - o.forbidden, cost: self.cost - o.cost }
    }

    fn lt(self, o: Lex) -> bool {
        self.forbidden < o.forbidden || (self.forbidden == o.forbidden && self.cost < o.cost)
    }
}

/// Shortest-augmenting-path Hungarian method for `rows <= cols`.
/// Returns, for each row, its column.
fn hungarian(m: &CostMatrix) -> Vec<usize> {
    let (n, k) = (m.rows, m.cols);
    debug_assert!(n <= k);
    // 1-based potentials and matching, column 0 is the virtual source
    let mut u = alloc::vec![Lex::ZERO; n + 1];
    let mut v = alloc::vec![Lex::ZERO; k + 1];
    let mut p = alloc::vec![0usize; k + 1];
    let mut way = alloc::vec![0usize; k + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = alloc::vec![Lex::INF; k + 1];
        let mut used = alloc::vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = Lex::INF;
            let mut j1 = 0;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = Lex::of(m.get(i0 - 1, j - 1)).sub(u[i0]).sub(v[j]);
                if cur.lt(minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j].lt(delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] = u[p[j]].add(delta);
                    v[j] = v[j].sub(delta);
                } else {
                    minv[j] = minv[j].sub(delta);
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = alloc::vec![usize::MAX; n];
    for j in 1..=k {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Minimum-total-cost one-to-one assignment. Forbidden (`+∞`) pairs are never
/// returned; when no full matching of size `min(rows, cols)` exists, the
/// largest feasible matching (and among those the cheapest) is returned.
/// Pairs come back sorted by row. The search visits rows in ascending order
/// and columns in ascending order, so ties resolve the same way every call.
pub fn min_cost_assignment(cost: &CostMatrix) -> Vec<(usize, usize)> {
    if cost.rows == 0 || cost.cols == 0 {
        return Vec::new();
    }
    let mut pairs: Vec<(usize, usize)> = if cost.rows <= cost.cols {
        hungarian(cost).into_iter().enumerate().collect()
    } else {
        hungarian(&cost.transposed())
            .into_iter()
            .enumerate()
            .map(|(c, r)| (r, c))
            .collect()
    };
    pairs.retain(|&(r, c)| cost.get(r, c).is_finite());
    pairs.sort_unstable();
    pairs
}

/// Sum of the assigned entries, in row order.
pub fn assignment_cost(cost: &CostMatrix, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, c)| cost.get(r, c)).sum()
}
