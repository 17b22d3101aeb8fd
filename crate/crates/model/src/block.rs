//! Pre-norm transformer block shared by the patch encoder and the decoder.

use rand::Rng;

use crate::autograd::{Mat, Tape, Var};
use crate::params::{normal, Binder, ParamStore};
use crate::ModelError;

pub(crate) struct BlockShape {
    pub width: usize,
    pub hidden: usize,
    pub heads: usize,
    pub causal: bool,
}

/// Inserts frozen block weights under `prefix`.
///
/// `std_in` scales the input projections and `std_out` the two residual
/// write-back projections.
pub(crate) fn init_block(
    store: &mut ParamStore,
    rng: &mut impl Rng,
    prefix: &str,
    width: usize,
    hidden: usize,
    std_in: f64,
    std_out: f64,
) {
    let ones = Mat::ones((1, width));
    let zeros = Mat::zeros((1, width));
    store.insert(format!("{prefix}.ln1_g"), ones.clone(), true);
    store.insert(format!("{prefix}.ln1_b"), zeros.clone(), true);
    for w in ["wq", "wk", "wv"] {
        store.insert(format!("{prefix}.{w}"), normal(rng, width, width, std_in), true);
    }
    store.insert(format!("{prefix}.wo"), normal(rng, width, width, std_out), true);
    store.insert(format!("{prefix}.ln2_g"), ones, true);
    store.insert(format!("{prefix}.ln2_b"), zeros.clone(), true);
    store.insert(format!("{prefix}.w1"), normal(rng, width, hidden, std_in), true);
    store.insert(format!("{prefix}.b1"), Mat::zeros((1, hidden)), true);
    store.insert(
        format!("{prefix}.w2"),
        normal(rng, hidden, width, std_out * (width as f64 / hidden as f64).sqrt()),
        true,
    );
    store.insert(format!("{prefix}.b2"), zeros, true);
}

/// `x·W`, plus the low-rank route `scale·(x·B)·A` when adapters are active.
fn adapted_projection(
    tape: &mut Tape,
    binder: &mut Binder<'_>,
    x: Var,
    weight: &str,
    adapter: Option<(&str, f64)>,
) -> Result<Var, ModelError> {
    let w = binder.bind(tape, weight)?;
    let base = tape.matmul(x, w);
    let Some((prefix, scale)) = adapter else {
        return Ok(base);
    };
    let a = binder.bind(tape, &format!("{prefix}.a"))?;
    let b = binder.bind(tape, &format!("{prefix}.b"))?;
    let down = tape.matmul(x, b);
    let up = tape.matmul(down, a);
    let up = tape.scale(up, scale);
    Ok(tape.add(base, up))
}

pub(crate) fn block_forward(
    tape: &mut Tape,
    binder: &mut Binder<'_>,
    prefix: &str,
    x: Var,
    shape: &BlockShape,
    lora_scale: Option<f64>,
) -> Result<Var, ModelError> {
    let p = |n: &str| format!("{prefix}.{n}");
    let (g1, b1) = (binder.bind(tape, &p("ln1_g"))?, binder.bind(tape, &p("ln1_b"))?);
    let n1 = tape.layer_norm(x, g1, b1);
    let lq = p("lora_q");
    let lv = p("lora_v");
    let q = adapted_projection(tape, binder, n1, &p("wq"), lora_scale.map(|s| (lq.as_str(), s)))?;
    let k = adapted_projection(tape, binder, n1, &p("wk"), None)?;
    let v = adapted_projection(tape, binder, n1, &p("wv"), lora_scale.map(|s| (lv.as_str(), s)))?;
    let attn = tape.attention(q, k, v, shape.heads, shape.causal);
    let wo = binder.bind(tape, &p("wo"))?;
    let attn = tape.matmul(attn, wo);
    let x = tape.add(x, attn);

    let (g2, b2) = (binder.bind(tape, &p("ln2_g"))?, binder.bind(tape, &p("ln2_b"))?);
    let n2 = tape.layer_norm(x, g2, b2);
    let w1 = binder.bind(tape, &p("w1"))?;
    let bias1 = binder.bind(tape, &p("b1"))?;
    let h = tape.matmul(n2, w1);
    let h = tape.add_row(h, bias1);
    let h = tape.gelu(h);
    let w2 = binder.bind(tape, &p("w2"))?;
    let bias2 = binder.bind(tape, &p("b2"))?;
    let h = tape.matmul(h, w2);
    let h = tape.add_row(h, bias2);
    debug_assert_eq!(tape.value(h).ncols(), shape.width);
    debug_assert_eq!(tape.value(w1).ncols(), shape.hidden);
    Ok(tape.add(x, h))
}
