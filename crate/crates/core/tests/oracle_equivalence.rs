//! Every built-in oracle against a re-implementation written straight from
//! its constraint formula, over exhaustive small grids (rank <= 3, dims <= 3).

use shapefuzz::registry::Registry;
use shapefuzz::value::{InputTuple, Shape, Value};

fn shapes(max_rank: usize, max_dim: usize) -> Vec<Shape> {
    let mut out = vec![Shape::scalar()];
    let mut frontier = vec![Vec::<usize>::new()];
    for _ in 0..max_rank {
        let mut next = Vec::new();
        for prefix in &frontier {
            for d in 0..=max_dim {
                let mut s = prefix.clone();
                s.push(d);
                out.push(Shape::new(s.clone()));
                next.push(s);
            }
        }
        frontier = next;
    }
    out
}

fn grid() -> Vec<Shape> {
    shapes(3, 3)
}

fn t(shape: &Shape) -> Value {
    Value::Tensor { shape: shape.clone() }
}

/// Trailing-aligned: every dim of `from` equals the matching target dim or is 1.
fn expands_to(from: &[usize], target: &[usize]) -> bool {
    from.len() <= target.len()
        && from
            .iter()
            .rev()
            .zip(target.iter().rev())
            .all(|(&a, &b)| a == b || a == 1)
}

fn mutually_broadcastable(a: &[usize], b: &[usize]) -> bool {
    a.iter().rev().zip(b.iter().rev()).all(|(&x, &y)| x == y || x == 1 || y == 1)
}

fn check(op: &str, tuples: impl Iterator<Item = InputTuple>, expected: impl Fn(&InputTuple) -> bool) -> usize {
    let reg = Registry::builtin();
    let spec = reg.get(op).unwrap();
    let mut count = 0;
    let mut valid = 0;
    for tuple in tuples {
        let got = spec.validate(&tuple).unwrap();
        assert_eq!(got.is_valid(), expected(&tuple), "{op} {tuple}: {got:?}");
        if let Some(m) = got.message() {
            assert!(!m.is_empty());
        }
        count += 1;
        valid += got.is_valid() as usize;
    }
    assert!(valid > 0 && valid < count, "{op}: grid must contain both classes");
    count
}

fn pairs() -> impl Iterator<Item = InputTuple> {
    let g = grid();
    let g2 = g.clone();
    g.into_iter()
        .flat_map(move |a| g2.clone().into_iter().map(move |b| InputTuple::new(vec![t(&a), t(&b)])))
}

#[test]
fn bmm() {
    let n = check("bmm", pairs(), |x| {
        let (a, b) = (x.shape(0).dims(), x.shape(1).dims());
        a.len() == 3 && b.len() == 3 && a[0] == b[0] && a[2] == b[1]
    });
    assert_eq!(n, 85 * 85);
}

#[test]
fn dot() {
    check("dot", pairs(), |x| {
        let (a, b) = (x.shape(0).dims(), x.shape(1).dims());
        a.len() == 1 && b.len() == 1 && a[0] == b[0]
    });
}

#[test]
fn broadcast_to() {
    check("broadcast_to", pairs(), |x| expands_to(x.shape(0).dims(), x.shape(1).dims()));
}

#[test]
fn cartesian_prod() {
    let small = shapes(2, 3);
    let mut lists: Vec<Vec<Shape>> = small.iter().map(|s| vec![s.clone()]).collect();
    for a in &small {
        for b in &small {
            lists.push(vec![a.clone(), b.clone()]);
        }
    }
    let tuples = lists.into_iter().map(|l| InputTuple::new(vec![Value::TensorList { items: l }]));
    check("cartesian_prod", tuples, |x| x.shapes(0).iter().all(|s| s.rank() == 1));
}

#[test]
fn max_pool2d() {
    let mut inputs = grid();
    inputs.extend([Shape::new([1, 2, 3, 3]), Shape::new([2, 1, 2, 3]), Shape::new([1, 1, 0, 2])]);
    let tuples = inputs.into_iter().flat_map(|s| {
        (-2..=7i64).flat_map(move |k| {
            let s = s.clone();
            (-1..=3i64).flat_map(move |st| {
                let s = s.clone();
                (-1..=4i64).map(move |p| InputTuple::new(vec![t(&s), Value::int(k), Value::int(st), Value::int(p)]))
            })
        })
    });
    check("max_pool2d", tuples, |x| {
        let d = x.shape(0).dims();
        let (k, s, p) = (x.int(1), x.int(2), x.int(3));
        if !(d.len() == 3 || d.len() == 4) {
            return false;
        }
        let (h, w) = (d[d.len() - 2] as i64, d[d.len() - 1] as i64);
        k >= 1 && s > 0 && p >= 0 && p <= k / 2 && k <= h.min(w) + 2 * p
    });
}

#[test]
fn matrix_inverse() {
    let tuples = grid().into_iter().map(|s| InputTuple::new(vec![t(&s)]));
    check("matrix_inverse", tuples, |x| {
        let d = x.shape(0).dims();
        d.len() >= 2 && d[d.len() - 1] == d[d.len() - 2]
    });
}

#[test]
fn top_k() {
    let tuples = grid()
        .into_iter()
        .flat_map(|s| (-2..=5i64).map(move |k| InputTuple::new(vec![t(&s), Value::int(k)])));
    check("top_k", tuples, |x| {
        let d = x.shape(0).dims();
        let k = x.int(1);
        !d.is_empty() && 0 <= k && k <= *d.last().unwrap() as i64
    });
}

#[test]
fn split() {
    let tuples = grid().into_iter().flat_map(|s| {
        (-1..=4i64).flat_map(move |n| {
            let s = s.clone();
            (-4..=4i64).map(move |a| InputTuple::new(vec![t(&s), Value::int(n), Value::int(a)]))
        })
    });
    check("split", tuples, |x| {
        let d = x.shape(0).dims();
        let (n, axis) = (x.int(1), x.int(2));
        let r = d.len() as i64;
        if n < 1 || axis < -r || axis >= r {
            return false;
        }
        let at = if axis < 0 { axis + r } else { axis } as usize;
        d[at] as i64 % n == 0
    });
}

#[test]
fn sigmoid_grad() {
    check("sigmoid_grad", pairs(), |x| x.shape(0) == x.shape(1));
}

#[test]
fn addr() {
    let g = grid();
    let vecs: Vec<Shape> = shapes(2, 3);
    let mut tuples = Vec::new();
    for input in &g {
        for v1 in &vecs {
            for v2 in &vecs {
                tuples.push(InputTuple::new(vec![t(input), t(v1), t(v2)]));
            }
        }
    }
    check("addr", tuples.into_iter(), |x| {
        let (input, v1, v2) = (x.shape(0).dims(), x.shape(1).dims(), x.shape(2).dims());
        v1.len() == 1 && v2.len() == 1 && expands_to(input, &[v1[0], v2[0]])
    });
}

#[test]
fn pairwise_distance() {
    check("pairwise_distance", pairs(), |x| {
        let (a, b) = (x.shape(0).dims(), x.shape(1).dims());
        (1..=2).contains(&a.len())
            && (1..=2).contains(&b.len())
            && a.last() == b.last()
            && mutually_broadcastable(a, b)
    });
}

#[test]
fn index_select() {
    let g = grid();
    let mut tuples = Vec::new();
    for input in &g {
        for dim in -4..=4i64 {
            for index in &g {
                tuples.push(InputTuple::new(vec![t(input), Value::int(dim), t(index)]));
            }
        }
    }
    check("index_select", tuples.into_iter(), |x| {
        let (input, dim, index) = (x.shape(0).dims(), x.int(1), x.shape(2).dims());
        let r = input.len() as i64;
        r >= 1 && -r <= dim && dim < r && index.len() <= 1
    });
}

#[test]
fn grid_sizes() {
    assert_eq!(grid().len(), 1 + 4 + 16 + 64);
}
