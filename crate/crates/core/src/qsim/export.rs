use std::io::Write;

use super::encoder::ActionEncoder;
use crate::error::Result;
use crate::nn::{ParamSet, Tensor};
use crate::scalar::Real;

/// Writes `agent,action,e0,…,e{d-1}` rows: the embedding of every action of
/// every agent at one `(obs, state)` context.
pub fn export_embeddings<T: Real>(
    encoder: &ActionEncoder,
    params: &ParamSet<T>,
    obs: &[Vec<T>],
    state: &[T],
    out: impl Write,
) -> Result<()> {
    let spec = encoder.spec();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["agent".to_string(), "action".to_string()];
    header.extend((0..spec.embed).map(|k| format!("e{k}")));
    w.write_record(&header).map_err(csv_err)?;
    for (agent, o) in obs.iter().enumerate() {
        let ctx = encoder.context(o, state)?;
        let rows = vec![ctx; spec.n_actions];
        let actions: Vec<usize> = (0..spec.n_actions).collect();
        let f = encoder.encode_batch(params, Tensor::from_rows(&rows)?, &actions)?;
        for a in actions {
            let mut rec = vec![agent.to_string(), a.to_string()];
            rec.extend(f.row(a).iter().map(|x| x.as_f64().to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| crate::error::Error::io("embeddings", e))?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Data { path: "embeddings".into(), message: e.to_string() }
}
