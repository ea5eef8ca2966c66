//! Binary model container.
//!
//! Layout: magic `AMF1`, one kind byte (1 linsvr, 2 gsvr, 3 gpr), then a
//! sequence of arrays, each a `u64` LE element count followed by that many
//! `f64` LE values. Matrices are stored row-major; their row count is implied
//! by the length of a companion array.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::gpr::{GprModel, RationalQuadratic};
use super::svr::{SvrKernel, SvrModel};
use super::{RegressionError, RegressionModel, Standardizer};

pub const MODEL_MAGIC: &[u8; 4] = b"AMF1";

const KIND_LINEAR_SVR: u8 = 1;
const KIND_GAUSSIAN_SVR: u8 = 2;
const KIND_GPR: u8 = 3;

fn put(w: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get(r: &mut impl Read) -> Result<Vec<f64>, RegressionError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(truncated)?;
    let len = u64::from_le_bytes(buf);
    if len > (1 << 32) {
        return Err(RegressionError::MalformedModel(format!("implausible array length {len}")));
    }
    let mut out = Vec::with_capacity(len as usize);
    for _ in 0..len {
        r.read_exact(&mut buf).map_err(truncated)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn truncated(e: std::io::Error) -> RegressionError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        RegressionError::MalformedModel("unexpected end of file".into())
    } else {
        RegressionError::Io(e)
    }
}

fn split_rows(flat: Vec<f64>, rows: usize, dim: usize, what: &str) -> Result<Vec<Vec<f64>>, RegressionError> {
    if flat.len() != rows * dim {
        return Err(RegressionError::MalformedModel(format!(
            "{what} has {} values, expected {rows} x {dim}",
            flat.len()
        )));
    }
    if dim == 0 {
        return Ok(vec![Vec::new(); rows]);
    }
    Ok(flat.chunks(dim).map(<[f64]>::to_vec).collect())
}

fn scalars<const N: usize>(v: Vec<f64>, what: &str) -> Result<[f64; N], RegressionError> {
    v.try_into()
        .map_err(|v: Vec<f64>| RegressionError::MalformedModel(format!("{what}: expected {N} values, got {}", v.len())))
}

pub fn write_model(w: &mut impl Write, model: &RegressionModel) -> Result<(), RegressionError> {
    w.write_all(MODEL_MAGIC)?;
    match model {
        RegressionModel::Svr(m) => {
            let kind = match m.kernel {
                SvrKernel::Linear => KIND_LINEAR_SVR,
                SvrKernel::Rbf { .. } => KIND_GAUSSIAN_SVR,
            };
            w.write_all(&[kind])?;
            put(w, &[m.c, m.epsilon, m.gamma, m.y_center, m.y_scale, m.bias])?;
            put(w, m.standardizer.means())?;
            put(w, m.standardizer.scales())?;
            put(w, &m.coefficients)?;
            put(w, &m.support_vectors.concat())?;
        }
        RegressionModel::Gpr(m) => {
            w.write_all(&[KIND_GPR])?;
            let k = m.kernel;
            put(w, &[k.signal_variance, k.length_scale, k.mixture, m.noise])?;
            put(w, m.standardizer.means())?;
            put(w, m.standardizer.scales())?;
            put(w, &m.weights)?;
            put(w, &m.inputs.concat())?;
            put(w, &m.cholesky)?;
        }
    }
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<RegressionModel, RegressionError> {
    let mut head = [0u8; 5];
    r.read_exact(&mut head).map_err(truncated)?;
    if &head[..4] != MODEL_MAGIC {
        return Err(RegressionError::MalformedModel("bad magic bytes".into()));
    }
    let kind = head[4];
    if !matches!(kind, KIND_LINEAR_SVR | KIND_GAUSSIAN_SVR | KIND_GPR) {
        return Err(RegressionError::MalformedModel(format!("unknown model kind {kind}")));
    }
    let params = get(r)?;
    let means = get(r)?;
    let scales = get(r)?;
    if means.len() != scales.len() {
        return Err(RegressionError::MalformedModel("standardizer arrays differ in length".into()));
    }
    let dim = means.len();
    let standardizer = Standardizer::from_parts(means, scales);
    let weights = get(r)?;
    let rows = split_rows(get(r)?, weights.len(), dim, "training rows")?;

    if kind == KIND_GPR {
        let [signal_variance, length_scale, mixture, noise] = scalars(params, "GPR parameters")?;
        let cholesky = get(r)?;
        let n = weights.len();
        if cholesky.len() != n * n {
            return Err(RegressionError::MalformedModel(format!("Cholesky factor has {} values", cholesky.len())));
        }
        return Ok(RegressionModel::Gpr(GprModel {
            kernel: RationalQuadratic { signal_variance, length_scale, mixture },
            noise,
            standardizer,
            inputs: rows,
            cholesky,
            weights,
        }));
    }

    let [c, epsilon, gamma, y_center, y_scale, bias] = scalars(params, "SVR parameters")?;
    let kernel = if kind == KIND_LINEAR_SVR { SvrKernel::Linear } else { SvrKernel::Rbf { gamma: Some(gamma) } };
    Ok(RegressionModel::Svr(SvrModel {
        kernel,
        gamma,
        c,
        epsilon,
        standardizer,
        y_center,
        y_scale,
        support_vectors: rows,
        coefficients: weights,
        bias,
    }))
}

pub fn save_model(path: impl AsRef<Path>, model: &RegressionModel) -> Result<(), RegressionError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RegressionModel, RegressionError> {
    read_model(&mut BufReader::new(File::open(path)?))
}
