//! Synthetic graph-sparse regression instances.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::graph::{random_walk_support, Graph, Support};
use crate::loss::{sigmoid, Instance};

/// How the `N(0, 1/√m)` design entries are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DesignScale {
    /// Standard deviation `1/√m` (unit expected column norm).
    StdInvSqrtM,
    /// Variance `1/√m`. With the `1/m`-normalized loss and unit step this
    /// gives an effective per-iteration step of `1/√m`.
    #[default]
    VarInvSqrtM,
}

impl DesignScale {
    pub fn std_dev(self, m: usize) -> f64 {
        let m = m as f64;
        match self {
            DesignScale::StdInvSqrtM => 1.0 / m.sqrt(),
            DesignScale::VarInvSqrtM => m.powf(-0.25),
        }
    }
}

pub fn gaussian_design<R: Rng + ?Sized>(m: usize, p: usize, scale: DesignScale, rng: &mut R) -> Array2<f64> {
    let sd = scale.std_dev(m);
    Array2::from_shape_simple_fn((m, p), || {
        let z: f64 = StandardNormal.sample(rng);
        z * sd
    })
}

#[derive(Debug, Clone)]
pub struct SynthSpec<'a> {
    pub graph: &'a Graph,
    /// Node the random walk starts from.
    pub start: usize,
    pub sparsity: usize,
    pub num_obs: usize,
    pub noise_norm: f64,
    pub design_scale: DesignScale,
}

impl SynthSpec<'_> {
    fn validate(&self) -> Result<()> {
        if self.num_obs == 0 {
            return invalid("need at least one observation");
        }
        if self.sparsity == 0 || self.sparsity > self.graph.num_nodes() {
            return invalid(format!(
                "sparsity {} must be in 1..={}",
                self.sparsity,
                self.graph.num_nodes()
            ));
        }
        if !(self.noise_norm >= 0.0) {
            return invalid(format!("noise norm must be nonnegative, got {}", self.noise_norm));
        }
        Ok(())
    }
}

fn nonzero_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z != 0.0 {
            return z;
        }
    }
}

/// Draws the support by random walk, the nonzeros from `N(0, 1)`, the design
/// and, when `noise_norm > 0`, Gaussian noise rescaled to exactly that norm.
pub fn synth_instance(spec: &SynthSpec<'_>, rng: &mut ChaCha8Rng) -> Result<Instance> {
    spec.validate()?;
    let support = random_walk_support(spec.graph, spec.start, spec.sparsity, rng)?;
    synth_on_support(spec.graph.num_nodes(), &support, spec.num_obs, spec.noise_norm, spec.design_scale, rng)
}

/// As [`synth_instance`] but on a given support.
pub fn synth_on_support(
    p: usize,
    support: &Support,
    num_obs: usize,
    noise_norm: f64,
    design_scale: DesignScale,
    rng: &mut ChaCha8Rng,
) -> Result<Instance> {
    support.check_bounds(p)?;
    if num_obs == 0 {
        return invalid("need at least one observation");
    }
    if !(noise_norm >= 0.0) {
        return invalid(format!("noise norm must be nonnegative, got {noise_norm}"));
    }
    let mut truth = Array1::zeros(p);
    for &i in support.indices() {
        truth[i] = nonzero_normal(rng);
    }
    let design = gaussian_design(num_obs, p, design_scale, rng);
    let mut targets = design.dot(&truth);
    let mut inst;
    if noise_norm > 0.0 {
        let mut noise = Array1::from_shape_simple_fn(num_obs, || {
            let z: f64 = StandardNormal.sample(rng);
            z
        });
        let norm = noise.dot(&noise).sqrt();
        noise *= noise_norm / norm;
        targets += &noise;
        inst = Instance::new(design, targets)?.with_noise(noise)?;
    } else {
        inst = Instance::new(design, targets)?;
    }
    inst = inst.with_truth(truth)?;
    Ok(inst)
}

/// Logistic-model instance with a planted connected support: standard normal
/// features, weights `±signal` on a random-walk support, and `±1` labels with
/// `P(y = 1) = σ(⟨a, x*⟩)`.
pub fn planted_logistic(
    graph: &Graph,
    start: usize,
    sparsity: usize,
    num_obs: usize,
    signal: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Instance> {
    if num_obs == 0 {
        return invalid("need at least one observation");
    }
    if !(signal > 0.0 && signal.is_finite()) {
        return invalid(format!("signal must be positive, got {signal}"));
    }
    let p = graph.num_nodes();
    let support = random_walk_support(graph, start, sparsity, rng)?;
    let mut truth = Array1::zeros(p);
    for &i in support.indices() {
        truth[i] = if rng.gen::<bool>() { signal } else { -signal };
    }
    let design = Array2::from_shape_simple_fn((num_obs, p), || {
        let z: f64 = StandardNormal.sample(rng);
        z
    });
    let margins = design.dot(&truth);
    let labels = margins.mapv(|z| if rng.gen::<f64>() < sigmoid(z) { 1.0 } else { -1.0 });
    Instance::new(design, labels)?.with_truth(truth)
}

pub fn truth_support(inst: &Instance) -> Option<Support> {
    inst.truth
        .as_ref()
        .map(|t| Support::of_nonzeros(t.as_slice().expect("contiguous truth")))
}

const MATRIX_MAGIC: &[u8; 8] = b"GSMAT001";
const VECTOR_MAGIC: &[u8; 8] = b"GSVEC001";

fn write_f64s(out: &mut impl Write, values: impl Iterator<Item = f64>) -> Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(input: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64s(input: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    input.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn check_magic(input: &mut impl Read, magic: &[u8; 8], path: &Path) -> Result<()> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: "unrecognized binary header".into(),
        });
    }
    Ok(())
}

/// Matrix file: magic, `m`, `p` as little-endian u64, then row-major
/// little-endian f64 entries.
pub fn write_matrix(path: &Path, a: &Array2<f64>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    out.write_all(MATRIX_MAGIC)?;
    out.write_all(&(a.nrows() as u64).to_le_bytes())?;
    out.write_all(&(a.ncols() as u64).to_le_bytes())?;
    write_f64s(&mut out, a.iter().copied())?;
    out.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut input = std::io::BufReader::new(fs::File::open(path)?);
    check_magic(&mut input, MATRIX_MAGIC, path)?;
    let m = read_u64(&mut input)? as usize;
    let p = read_u64(&mut input)? as usize;
    let data = read_f64s(&mut input, m * p)?;
    Array2::from_shape_vec((m, p), data).map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn write_vector(path: &Path, v: &Array1<f64>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    out.write_all(VECTOR_MAGIC)?;
    out.write_all(&(v.len() as u64).to_le_bytes())?;
    write_f64s(&mut out, v.iter().copied())?;
    out.flush()?;
    Ok(())
}

pub fn read_vector(path: &Path) -> Result<Array1<f64>> {
    let mut input = std::io::BufReader::new(fs::File::open(path)?);
    check_magic(&mut input, VECTOR_MAGIC, path)?;
    let n = read_u64(&mut input)? as usize;
    Ok(Array1::from(read_f64s(&mut input, n)?))
}

/// Writes `design.bin`, `targets.bin`, optional `truth.bin` / `noise.bin`
/// and a `manifest.txt` of `key = value` lines.
pub fn save_instance(dir: &Path, inst: &Instance, manifest: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix(&dir.join("design.bin"), &inst.design)?;
    write_vector(&dir.join("targets.bin"), &inst.targets)?;
    if let Some(t) = &inst.truth {
        write_vector(&dir.join("truth.bin"), t)?;
    }
    if let Some(e) = &inst.noise {
        write_vector(&dir.join("noise.bin"), e)?;
    }
    let mut text = format!("m = {}\np = {}\n", inst.len(), inst.dim());
    for (k, v) in manifest {
        text.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(dir.join("manifest.txt"), text)?;
    Ok(())
}

pub fn load_instance(dir: &Path) -> Result<Instance> {
    let design = read_matrix(&dir.join("design.bin"))?;
    let targets = read_vector(&dir.join("targets.bin"))?;
    let mut inst = Instance::new(design, targets)?;
    let truth = dir.join("truth.bin");
    if truth.exists() {
        inst = inst.with_truth(read_vector(&truth)?)?;
    }
    let noise = dir.join("noise.bin");
    if noise.exists() {
        inst = inst.with_noise(read_vector(&noise)?)?;
    }
    Ok(inst)
}
