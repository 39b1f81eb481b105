//! Gated recurrent decoder cell.

use super::tape::{NodeId, Tape};
use crate::error::Result;

/// Tape handles for one cell's weights: gate order input, forget,
/// output, candidate. Each weight maps the concatenated `[x; h]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams {
    pub w_input: NodeId,
    pub b_input: NodeId,
    pub w_forget: NodeId,
    pub b_forget: NodeId,
    pub w_output: NodeId,
    pub b_output: NodeId,
    pub w_cell: NodeId,
    pub b_cell: NodeId,
}

/// One step of the standard cell:
///
/// ```text
/// z  = [x; h]
/// i, f, o = sigmoid(z W_* + b_*),   g = tanh(z W_g + b_g)
/// c' = f ⊙ c + i ⊙ g
/// h' = o ⊙ tanh(c')
/// ```
pub fn lstm_cell(
    tape: &mut Tape,
    x: NodeId,
    h: NodeId,
    c: NodeId,
    params: &LstmParams,
) -> Result<(NodeId, NodeId)> {
    let z = tape.concat_cols(x, h)?;
    let i = {
        let a = tape.affine(z, params.w_input, params.b_input)?;
        tape.sigmoid(a)?
    };
    let f = {
        let a = tape.affine(z, params.w_forget, params.b_forget)?;
        tape.sigmoid(a)?
    };
    let o = {
        let a = tape.affine(z, params.w_output, params.b_output)?;
        tape.sigmoid(a)?
    };
    let g = {
        let a = tape.affine(z, params.w_cell, params.b_cell)?;
        tape.tanh(a)?
    };
    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c_next = tape.add(fc, ig)?;
    let tanh_c = tape.tanh(c_next)?;
    let h_next = tape.mul(o, tanh_c)?;
    Ok((h_next, c_next))
}
