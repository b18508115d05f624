//! Small recorded programs whose path profiles illustrate how recurrent and
//! attention models route information.

use std::fmt::Write as _;
use std::sync::Arc;

use diffprog_core::analysis::{path_profile, PathProfile};
use diffprog_core::primitives::{rnn_cell, self_attention, AttentionParams, AttentionPattern, RnnParams};
use diffprog_core::{NodeId, Op, ParamStore, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ExpError, Result};

const INPUT_DIM: usize = 3;
const HIDDEN_DIM: usize = 4;

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
    Tensor::vector((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Unrolls an RNN over `steps` inputs and profiles paths from every input to
/// the final hidden state.
pub fn rnn_profile(steps: usize, seed: u64) -> Result<(Tape, Vec<NodeId>, PathProfile)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    RnnParams::init(&mut store, "rnn", INPUT_DIM, HIDDEN_DIM, &mut rng)?;
    let mut tape = Tape::new();
    let p = RnnParams::bind(&mut tape, &store, "rnn")?;
    let mut h = tape.input(Tensor::zeros(&[HIDDEN_DIM]));
    let mut xs = Vec::with_capacity(steps);
    for _ in 0..steps {
        let x = tape.input(random_vector(&mut rng, INPUT_DIM));
        xs.push(x);
        h = rnn_cell(&mut tape, h, x, &p)?;
    }
    let profile = path_profile(&tape, &xs, h)?;
    Ok((tape, xs, profile))
}

/// Full self-attention over `n` stacked inputs. Returns one profile per
/// output row.
pub fn attention_profiles(n: usize, seed: u64) -> Result<(Tape, Vec<NodeId>, Vec<PathProfile>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    AttentionParams::init(&mut store, "att", HIDDEN_DIM, &mut rng)?;
    let mut tape = Tape::new();
    let xs: Vec<NodeId> = (0..n)
        .map(|_| tape.input(random_vector(&mut rng, HIDDEN_DIM)))
        .collect();
    let x = tape.record(Op::Stack, &xs)?;
    let p = AttentionParams::bind(&mut tape, &store, "att")?;
    let y = self_attention(&mut tape, x, &Arc::new(AttentionPattern::full(n)), &p)?;
    let mut profiles = Vec::with_capacity(n);
    for t in 0..n {
        let out = tape.record(Op::Row(t), &[y])?;
        profiles.push(path_profile(&tape, &xs, out)?);
    }
    Ok((tape, xs, profiles))
}

fn cell(len: Option<usize>) -> String {
    len.map_or_else(|| "-".to_string(), |l| l.to_string())
}

/// Text table for `paths --demo`.
pub fn render(demo: &str) -> Result<String> {
    let mut out = String::new();
    match demo {
        "rnn" => {
            let steps = 6;
            let (_, xs, profile) = rnn_profile(steps, 0)?;
            writeln!(out, "rnn, T = {steps}: shortest path from x_t to h_T").unwrap();
            writeln!(out, "{:>4} {:>9} {:>6}", "t", "distance", "path").unwrap();
            for (t, x) in xs.iter().enumerate() {
                writeln!(out, "{:>4} {:>9} {:>6}", t + 1, steps - t - 1, cell(profile.lengths[x])).unwrap();
            }
            writeln!(out, "uniform: {}", profile.is_uniform()).unwrap();
        }
        "attention" => {
            let n = 5;
            let (_, xs, profiles) = attention_profiles(n, 0)?;
            writeln!(out, "self-attention, N = {n}: shortest path from input j to output i").unwrap();
            write!(out, "{:>4}", "i\\j").unwrap();
            for j in 0..n {
                write!(out, " {j:>4}").unwrap();
            }
            writeln!(out).unwrap();
            for (i, profile) in profiles.iter().enumerate() {
                write!(out, "{i:>4}").unwrap();
                for x in &xs {
                    write!(out, " {:>4}", cell(profile.lengths[x])).unwrap();
                }
                writeln!(out).unwrap();
            }
            writeln!(out, "uniform: {}", profiles.iter().all(PathProfile::is_uniform)).unwrap();
        }
        other => return Err(ExpError::Spec(format!("unknown demo {other:?} (rnn or attention)"))),
    }
    Ok(out)
}
