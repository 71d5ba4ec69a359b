//! The twelve built-in operators.
//!
//! Oracles check rank conditions first, then scalar sizes, then relations
//! between arguments, and report the first failure. Messages follow the
//! wording of the corresponding PyTorch / TensorFlow checks.
//!
//! Integer parameters carry narrowed sampling ranges where the default
//! [-100, 100] would make the operator almost never valid.

use crate::value::{InputTuple, ParamSpace, ParamSpec, Shape};

use super::{BugPredicate, OperatorSpec, PartialConstraints, ValidationOutcome};

pub const BUILTIN_NAMES: [&str; 12] = [
    "bmm",
    "dot",
    "broadcast_to",
    "cartesian_prod",
    "max_pool2d",
    "matrix_inverse",
    "top_k",
    "split",
    "sigmoid_grad",
    "addr",
    "pairwise_distance",
    "index_select",
];

use ValidationOutcome::Valid;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return ValidationOutcome::Rejected(format!($($msg)*));
        }
    };
}

fn space(params: Vec<ParamSpec>) -> ParamSpace {
    ParamSpace::new(params).expect("built-in parameter spaces are well formed")
}

fn valid(op: fn(&InputTuple) -> ValidationOutcome, t: &InputTuple) -> bool {
    op(t).is_valid()
}

/// Built-in operators in catalog order.
pub fn builtin_operators() -> Vec<OperatorSpec> {
    vec![
        bmm(),
        dot(),
        broadcast_to(),
        cartesian_prod(),
        max_pool2d(true),
        matrix_inverse(),
        top_k(),
        split(),
        sigmoid_grad(),
        addr(),
        pairwise_distance(),
        index_select(),
    ]
}

fn bmm_oracle(t: &InputTuple) -> ValidationOutcome {
    let (batch1, batch2) = (t.shape(0), t.shape(1));
    ensure!(batch1.rank() == 3, "batch1 must be a 3D tensor");
    ensure!(batch2.rank() == 3, "batch2 must be a 3D tensor");
    let (bs, contraction) = (batch1.dims()[0], batch1.dims()[2]);
    let (b0, b1) = (batch2.dims()[0], batch2.dims()[1]);
    ensure!(
        b0 == bs && b1 == contraction,
        "Expected size for first two dimensions of batch2 tensor to be: [{bs}, {contraction}] but got: [{b0}, {b1}]."
    );
    Valid
}

fn bmm() -> OperatorSpec {
    OperatorSpec::new(
        "bmm",
        space(vec![ParamSpec::tensor("input"), ParamSpec::tensor("mat2")]),
        bmm_oracle,
    )
    .with_constraint("input = (b, n, m) and mat2 = (b, m, p)")
    .with_messages(&[
        "batch1 must be a 3D tensor",
        "batch2 must be a 3D tensor",
        "Expected size for first two dimensions of batch2 tensor to be: [b, m] but got: [x, y].",
    ])
    .with_partial(PartialConstraints::new(
        "both tensors rank 3 with equal batch size",
        |t| {
            let (a, b) = (t.shape(0), t.shape(1));
            a.rank() == 3 && b.rank() == 3 && a.dims()[0] == b.dims()[0]
        },
    ))
    .with_bug(BugPredicate::new("empty batch (b = 0)", |t| {
        valid(bmm_oracle, t) && t.shape(0).dims()[0] == 0
    }))
}

fn dot_oracle(t: &InputTuple) -> ValidationOutcome {
    let (a, b) = (t.shape(0), t.shape(1));
    ensure!(
        a.rank() == 1 && b.rank() == 1,
        "1D tensors expected, but got {}D and {}D tensors",
        a.rank(),
        b.rank()
    );
    let (n, m) = (a.numel(), b.numel());
    ensure!(
        n == m,
        "inconsistent tensor size, expected tensor [{n}] and src [{m}] to have the same number of elements, but got {n} and {m} elements respectively"
    );
    Valid
}

fn dot() -> OperatorSpec {
    OperatorSpec::new(
        "dot",
        space(vec![ParamSpec::tensor("input"), ParamSpec::tensor("tensor")]),
        dot_oracle,
    )
    .with_constraint("input.dim() = 1 and tensor.dim() = 1 and input.numel() = tensor.numel()")
    .with_messages(&[
        "1D tensors expected, but got aD and bD tensors",
        "inconsistent tensor size, expected tensor [n] and src [m] to have the same number of elements, but got n and m elements respectively",
    ])
    .with_partial(PartialConstraints::new("both tensors rank 1", |t| {
        t.shape(0).rank() == 1 && t.shape(1).rank() == 1
    }))
    .with_bug(BugPredicate::new("empty vectors", |t| {
        valid(dot_oracle, t) && t.shape(0).numel() == 0
    }))
}

/// Expand semantics: the target has at least as many dims and every aligned
/// input dim equals the target or is 1.
fn expand_error(input: &Shape, target: &[usize]) -> Option<String> {
    if target.len() < input.rank() {
        return Some(format!(
            "the number of sizes provided ({}) must be greater or equal to the number of dimensions in the tensor ({})",
            target.len(),
            input.rank()
        ));
    }
    let offset = target.len() - input.rank();
    for (i, &d) in input.dims().iter().enumerate() {
        let want = target[offset + i];
        if d != want && d != 1 {
            return Some(format!(
                "The expanded size of the tensor ({want}) must match the existing size ({d}) at non-singleton dimension {}.  Target sizes: {}.  Tensor sizes: {input}",
                offset + i,
                Shape::new(target.to_vec())
            ));
        }
    }
    None
}

fn broadcast_to_oracle(t: &InputTuple) -> ValidationOutcome {
    // `shape` is an int list in [0, 10] of length <= 6, carried as a Shape.
    if let Some(msg) = expand_error(t.shape(0), t.shape(1).dims()) {
        return ValidationOutcome::Rejected(msg);
    }
    Valid
}

fn broadcast_to() -> OperatorSpec {
    OperatorSpec::new(
        "broadcast_to",
        space(vec![ParamSpec::tensor("input"), ParamSpec::tensor("shape")]),
        broadcast_to_oracle,
    )
    .with_constraint("len(shape) >= input.dim() and each trailing-aligned input dim equals shape or is 1")
    .with_messages(&[
        "the number of sizes provided (s) must be greater or equal to the number of dimensions in the tensor (r)",
        "The expanded size of the tensor (t) must match the existing size (d) at non-singleton dimension i.  Target sizes: [..].  Tensor sizes: [..]",
    ])
    .with_partial(PartialConstraints::new("len(shape) >= input.dim()", |t| {
        t.shape(1).rank() >= t.shape(0).rank()
    }))
    .with_bug(BugPredicate::new(
        "expansion adds three or more leading dimensions",
        |t| valid(broadcast_to_oracle, t) && t.shape(1).rank() >= t.shape(0).rank() + 3,
    ))
}

fn cartesian_prod_oracle(t: &InputTuple) -> ValidationOutcome {
    for s in t.shapes(0) {
        ensure!(s.rank() == 1, "Expect a 1D vector, but got shape {s}");
    }
    Valid
}

fn cartesian_prod() -> OperatorSpec {
    OperatorSpec::new(
        "cartesian_prod",
        space(vec![ParamSpec::tensor_list("tensors")]),
        cartesian_prod_oracle,
    )
    .with_constraint("all t in tensors: t.dim() = 1")
    .with_messages(&["Expect a 1D vector, but got shape [..]"])
    .with_partial(PartialConstraints::new("first tensor rank 1", |t| {
        t.shapes(0)[0].rank() == 1
    }))
    .with_bug(BugPredicate::new("a zero-length factor", |t| {
        valid(cartesian_prod_oracle, t) && t.shapes(0).iter().any(|s| s.numel() == 0)
    }))
}

fn max_pool2d_check(t: &InputTuple, strict_padding: bool) -> ValidationOutcome {
    let input = t.shape(0);
    let (k, s, p) = (t.int(1), t.int(2), t.int(3));
    ensure!(
        input.rank() == 3 || input.rank() == 4,
        "3D or 4D (batch mode) tensor expected for input, but got: {input}"
    );
    ensure!(
        k > 0,
        "max_pool2d: kernel_size must be greater than zero, but got kH: {k} kW: {k}"
    );
    ensure!(
        s > 0,
        "max_pool2d: stride must be greater than zero, but got dH: {s} dW: {s}"
    );
    ensure!(
        p >= 0,
        "max_pool2d: pad must be non-negative, but got padH: {p} padW: {p}"
    );
    ensure!(
        !strict_padding || 2 * p <= k,
        "pad should be smaller than or equal to half of kernel size, but got padW = {p}, padH = {p}, kW = {k}, kH = {k}"
    );
    let dims = input.dims();
    let r = dims.len();
    let (c, h, w) = (dims[r - 3] as i64, dims[r - 2] as i64, dims[r - 1] as i64);
    let out = |len: i64| (len + 2 * p - k).div_euclid(s) + 1;
    ensure!(
        k <= h.min(w) + 2 * p,
        "Given input size: ({c}x{h}x{w}). Calculated output size: ({c}x{}x{}). Output size is too small",
        out(h),
        out(w)
    );
    Valid
}

fn max_pool2d_oracle(t: &InputTuple) -> ValidationOutcome {
    max_pool2d_check(t, true)
}

/// `strict_padding` adds the library's `padding <= kernel_size / 2` check on
/// top of the output-size constraint.
pub fn max_pool2d(strict_padding: bool) -> OperatorSpec {
    let params = space(vec![
        ParamSpec::tensor("input"),
        ParamSpec::int("kernel_size").with_bounds(-2, 12),
        ParamSpec::int("stride").with_bounds(-2, 6),
        ParamSpec::int("padding").with_bounds(-2, 6),
    ]);
    let op = if strict_padding {
        OperatorSpec::new("max_pool2d", params, max_pool2d_oracle)
            .with_constraint("input.dim() in {3, 4} and 1 <= kernel_size <= min(H, W) + 2 * padding and stride > 0 and padding >= 0 and padding <= kernel_size / 2")
    } else {
        OperatorSpec::new("max_pool2d", params, |t| max_pool2d_check(t, false))
            .with_constraint("input.dim() in {3, 4} and 1 <= kernel_size <= min(H, W) + 2 * padding and stride > 0 and padding >= 0")
    };
    op.with_messages(&[
        "3D or 4D (batch mode) tensor expected for input, but got: [..]",
        "max_pool2d: kernel_size must be greater than zero, but got kH: k kW: k",
        "max_pool2d: stride must be greater than zero, but got dH: s dW: s",
        "max_pool2d: pad must be non-negative, but got padH: p padW: p",
        "pad should be smaller than or equal to half of kernel size, but got padW = p, padH = p, kW = k, kH = k",
        "Given input size: (CxHxW). Calculated output size: (Cxhxw). Output size is too small",
    ])
    .with_partial(PartialConstraints::new(
        "input rank in {3, 4}, kernel_size >= 1, stride >= 1, padding >= 0",
        |t| {
            let r = t.shape(0).rank();
            (r == 3 || r == 4) && t.int(1) >= 1 && t.int(2) >= 1 && t.int(3) >= 0
        },
    ))
    .with_bug(BugPredicate::new(
        "padding exactly half of an even kernel",
        move |t| max_pool2d_check(t, strict_padding).is_valid() && t.int(3) > 0 && 2 * t.int(3) == t.int(1),
    ))
}

fn matrix_inverse_oracle(t: &InputTuple) -> ValidationOutcome {
    let x = t.shape(0);
    ensure!(x.rank() >= 2, "Input must have rank >= 2, got {}", x.rank());
    let d = x.dims();
    let (rows, cols) = (d[d.len() - 2], d[d.len() - 1]);
    ensure!(rows == cols, "Input matrices must be squares, got {rows} != {cols}");
    Valid
}

fn matrix_inverse() -> OperatorSpec {
    OperatorSpec::new(
        "matrix_inverse",
        space(vec![ParamSpec::tensor("tensor")]),
        matrix_inverse_oracle,
    )
    .with_constraint("tensor.shape() = [..., M, M]")
    .with_messages(&[
        "Input must have rank >= 2, got r",
        "Input matrices must be squares, got a != b",
    ])
    .with_partial(PartialConstraints::new("rank >= 2", |t| t.shape(0).rank() >= 2))
    .with_bug(BugPredicate::new("empty 0x0 matrices", |t| {
        valid(matrix_inverse_oracle, t) && t.shape(0).last() == Some(0)
    }))
}

fn top_k_oracle(t: &InputTuple) -> ValidationOutcome {
    let input = t.shape(0);
    let k = t.int(1);
    ensure!(input.rank() >= 1, "input must have rank >= 1");
    ensure!(k >= 0, "Need k >= 0, got {k}");
    let n = input.last().expect("rank >= 1") as i64;
    ensure!(
        n >= k,
        "input must have at least k columns. Had {n}, needed {k}"
    );
    Valid
}

fn top_k() -> OperatorSpec {
    OperatorSpec::new(
        "top_k",
        space(vec![
            ParamSpec::tensor("input"),
            ParamSpec::int("k").with_bounds(-5, 15),
        ]),
        top_k_oracle,
    )
    .with_constraint("input.shape() = [..., N] and 0 <= k <= N")
    .with_messages(&[
        "input must have rank >= 1",
        "Need k >= 0, got k",
        "input must have at least k columns. Had n, needed k",
    ])
    .with_partial(PartialConstraints::new("rank >= 1 and k >= 0", |t| {
        t.shape(0).rank() >= 1 && t.int(1) >= 0
    }))
    .with_bug(BugPredicate::new("k equals the full last dimension", |t| {
        valid(top_k_oracle, t) && t.int(1) > 0 && t.shape(0).last() == Some(t.int(1) as usize)
    }))
}

fn split_oracle(t: &InputTuple) -> ValidationOutcome {
    let value = t.shape(0);
    let (num_splits, axis) = (t.int(1), t.int(2));
    let rank = value.rank() as i64;
    ensure!(
        -rank <= axis && axis < rank,
        "-{rank} <= split_dim < {rank}, but got {axis}"
    );
    ensure!(
        num_splits > 0,
        "Number of ways to split should be > 0, but got {num_splits}"
    );
    let size = value.dim_at(axis).expect("axis in range") as i64;
    ensure!(
        size % num_splits == 0,
        "Number of ways to split should evenly divide the split dimension, but got split_dim {axis} (size = {size}) and num_split {num_splits}"
    );
    Valid
}

fn split() -> OperatorSpec {
    OperatorSpec::new(
        "split",
        space(vec![
            ParamSpec::tensor("value"),
            ParamSpec::int("num_splits").with_bounds(-2, 10),
            ParamSpec::int("axis").with_bounds(-7, 7),
        ]),
        split_oracle,
    )
    .with_constraint("axis in [-value.dim(), value.dim()) and num_splits >= 1 and value.shape()[axis] % num_splits = 0")
    .with_messages(&[
        "-r <= split_dim < r, but got a",
        "Number of ways to split should be > 0, but got n",
        "Number of ways to split should evenly divide the split dimension, but got split_dim a (size = d) and num_split n",
    ])
    .with_partial(PartialConstraints::new(
        "axis in range and num_splits >= 1",
        |t| {
            let rank = t.shape(0).rank() as i64;
            (-rank..rank).contains(&t.int(2)) && t.int(1) >= 1
        },
    ))
    .with_bug(BugPredicate::new("unit-size pieces (num_splits = size > 1)", |t| {
        valid(split_oracle, t)
            && t.int(1) > 1
            && t.shape(0).dim_at(t.int(2)) == Some(t.int(1) as usize)
    }))
}

fn sigmoid_grad_oracle(t: &InputTuple) -> ValidationOutcome {
    let (y, dy) = (t.shape(0), t.shape(1));
    ensure!(y == dy, "Incompatible shapes: {y} vs. {dy}");
    Valid
}

fn sigmoid_grad() -> OperatorSpec {
    OperatorSpec::new(
        "sigmoid_grad",
        space(vec![ParamSpec::tensor("y"), ParamSpec::tensor("dy")]),
        sigmoid_grad_oracle,
    )
    .with_constraint("y.shape() = dy.shape()")
    .with_messages(&["Incompatible shapes: [..] vs. [..]"])
    .with_partial(PartialConstraints::new("equal ranks", |t| {
        t.shape(0).rank() == t.shape(1).rank()
    }))
    .with_bug(BugPredicate::new("empty non-scalar tensors", |t| {
        valid(sigmoid_grad_oracle, t) && t.shape(0).rank() >= 1 && t.shape(0).numel() == 0
    }))
}

fn addr_oracle(t: &InputTuple) -> ValidationOutcome {
    let (input, vec1, vec2) = (t.shape(0), t.shape(1), t.shape(2));
    ensure!(
        vec1.rank() == 1,
        "addr: Expected 1-D argument vec1, but got {}-D",
        vec1.rank()
    );
    ensure!(
        vec2.rank() == 1,
        "addr: Expected 1-D argument vec2, but got {}-D",
        vec2.rank()
    );
    if let Some(msg) = expand_error(input, &[vec1.dims()[0], vec2.dims()[0]]) {
        return ValidationOutcome::Rejected(msg);
    }
    Valid
}

fn addr() -> OperatorSpec {
    OperatorSpec::new(
        "addr",
        space(vec![
            ParamSpec::tensor("input"),
            ParamSpec::tensor("vec1"),
            ParamSpec::tensor("vec2"),
        ]),
        addr_oracle,
    )
    .with_constraint("vec1 = (n), vec2 = (m), input broadcastable to (n, m)")
    .with_messages(&[
        "addr: Expected 1-D argument vec1, but got r-D",
        "addr: Expected 1-D argument vec2, but got r-D",
        "the number of sizes provided (2) must be greater or equal to the number of dimensions in the tensor (r)",
        "The expanded size of the tensor (t) must match the existing size (d) at non-singleton dimension i.  Target sizes: [n, m].  Tensor sizes: [..]",
    ])
    .with_partial(PartialConstraints::new("vec1 and vec2 rank 1", |t| {
        t.shape(1).rank() == 1 && t.shape(2).rank() == 1
    }))
    .with_bug(BugPredicate::new("empty outer product", |t| {
        valid(addr_oracle, t) && (t.shape(1).numel() == 0 || t.shape(2).numel() == 0)
    }))
}

fn pairwise_distance_oracle(t: &InputTuple) -> ValidationOutcome {
    let (x1, x2) = (t.shape(0), t.shape(1));
    for (name, x) in [("x1", x1), ("x2", x2)] {
        ensure!(
            x.rank() == 1 || x.rank() == 2,
            "pairwise_distance: expected 1D or 2D input {name}, got {}D",
            x.rank()
        );
    }
    let (a, b) = (x1.last().unwrap_or(1), x2.last().unwrap_or(1));
    ensure!(
        a == b,
        "pairwise_distance: expected x1 and x2 to have the same last dimension, got {a} and {b}"
    );
    if x1.rank() == 2 && x2.rank() == 2 {
        let (r1, r2) = (x1.dims()[0], x2.dims()[0]);
        ensure!(
            r1 == r2 || r1 == 1 || r2 == 1,
            "The size of tensor a ({r1}) must match the size of tensor b ({r2}) at non-singleton dimension 0"
        );
    }
    Valid
}

fn pairwise_distance() -> OperatorSpec {
    OperatorSpec::new(
        "pairwise_distance",
        space(vec![ParamSpec::tensor("x1"), ParamSpec::tensor("x2")]),
        pairwise_distance_oracle,
    )
    .with_constraint("x1.dim(), x2.dim() in {1, 2}, shapes broadcastable, equal last dims")
    .with_messages(&[
        "pairwise_distance: expected 1D or 2D input x, got rD",
        "pairwise_distance: expected x1 and x2 to have the same last dimension, got a and b",
        "The size of tensor a (a) must match the size of tensor b (b) at non-singleton dimension 0",
    ])
    .with_partial(PartialConstraints::new("both ranks in {1, 2}", |t| {
        (1..=2).contains(&t.shape(0).rank()) && (1..=2).contains(&t.shape(1).rank())
    }))
    .with_bug(BugPredicate::new("matrix against broadcast vector", |t| {
        valid(pairwise_distance_oracle, t) && t.shape(0).rank() == 2 && t.shape(1).rank() == 1
    }))
}

fn index_select_oracle(t: &InputTuple) -> ValidationOutcome {
    let (input, dim, index) = (t.shape(0), t.int(1), t.shape(2));
    ensure!(
        input.rank() >= 1,
        "index_select(): input must have at least one dimension"
    );
    ensure!(
        index.rank() <= 1,
        "index_select(): Index is supposed to be a vector"
    );
    let rank = input.rank() as i64;
    ensure!(
        -rank <= dim && dim < rank,
        "Dimension out of range (expected to be in range of [{}, {}], but got {dim})",
        -rank,
        rank - 1
    );
    Valid
}

fn index_select() -> OperatorSpec {
    OperatorSpec::new(
        "index_select",
        space(vec![
            ParamSpec::tensor("input"),
            ParamSpec::int("dim").with_bounds(-8, 8),
            ParamSpec::tensor("index"),
        ]),
        index_select_oracle,
    )
    .with_constraint("input.dim() >= 1 and dim in [-input.dim(), input.dim()) and index.dim() <= 1")
    .with_messages(&[
        "index_select(): input must have at least one dimension",
        "index_select(): Index is supposed to be a vector",
        "Dimension out of range (expected to be in range of [-r, r-1], but got d)",
    ])
    .with_partial(PartialConstraints::new(
        "input rank >= 1 and index rank <= 1",
        |t| t.shape(0).rank() >= 1 && t.shape(2).rank() <= 1,
    ))
    .with_bug(BugPredicate::new("negative dim on rank >= 3 input", |t| {
        valid(index_select_oracle, t) && t.int(1) < 0 && t.shape(0).rank() >= 3
    }))
}
