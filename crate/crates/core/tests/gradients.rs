#[allow(dead_code)]
#[path = "common/graphs.rs"]
mod graphs;

use graphs::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sinco::tensor::{finite_difference_check, LossGraph, Scalar, Tape, Tensor, TensorError, UnaryOp, Var};

const RTOL: f64 = 1e-3;

/// Every tape primitive in one scalar graph.
struct Primitives;

impl LossGraph for Primitives {
    fn build<T: Scalar>(&self, tape: &mut Tape<T>, p: &[Var]) -> Result<Var, TensorError> {
        // p: a [3×4], b [4×2], bias [2], img [2×4×4], k [3×2×3×3], kb [3], pos [6]
        let h = tape.matmul(p[0], p[1])?;
        let h = tape.add_row_bias(h, p[2])?;
        let s = tape.sin(h);
        let g = tape.sigmoid(h);
        let m = tape.mul(s, g)?;
        let l1 = tape.mean(m);

        let c = tape.conv2d(p[3], p[4], 1, 1)?;
        let c = tape.add_channel_bias(c, p[5])?;
        let r = tape.relu(c);
        let d = tape.conv2d(p[3], p[4], 2, 1)?;
        let up = tape.upsample2x(d)?;
        let cat = tape.concat_channels(r, up)?;
        let sq = tape.square(cat);
        let l2 = tape.sum(sq);
        let l2 = tape.scale(l2, 1e-2);

        let q = tape.unary(p[6], UnaryOp::Clamp(0.05, 0.95));
        let lq = tape.ln(q);
        let shifted = tape.add_scalar(p[6], 2.0);
        let ratio = tape.div(lq, shifted)?;
        let flat = tape.reshape(ratio, vec![2, 3])?;
        let l3 = tape.mean(flat);

        let t = tape.add(l1, l2)?;
        tape.sub(t, l3)
    }
}

#[test]
fn primitives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = vec![
        random_tensor(&[3, 4], -1.0, 1.0, &mut rng),
        random_tensor(&[4, 2], -1.0, 1.0, &mut rng),
        random_tensor(&[2], -1.0, 1.0, &mut rng),
        random_tensor(&[2, 4, 4], -1.0, 1.0, &mut rng),
        random_tensor(&[3, 2, 3, 3], -1.0, 1.0, &mut rng),
        random_tensor(&[3], -0.5, 0.5, &mut rng),
        random_tensor(&[6], 0.1, 0.9, &mut rng),
    ];
    let r = finite_difference_check(&Primitives, &params, FD_STEP).unwrap();
    assert!(r.within(RTOL), "{r:?}");
    assert_eq!(r.checked, params.iter().map(Tensor::numel).sum::<usize>());
}

#[test]
fn network_suite_matches_finite_differences() {
    for (name, r) in gradient_suite() {
        println!("{name}: {r:?}");
        assert!(r.within(RTOL), "{name}: {r:?}");
    }
}

#[test]
fn higher_frequency_pemlp_matches() {
    let r = InrGraph::new("pemlp", sinco::nets::InrConfig::pemlp(3, 6, 8), 5, 4).check();
    assert!(r.within(RTOL), "{r:?}");
}

#[test]
fn zero_lambda_objective_matches() {
    let mut g = SincoGraph::new(3);
    g.lambda = 0.0;
    assert!(g.check().within(RTOL));
}
