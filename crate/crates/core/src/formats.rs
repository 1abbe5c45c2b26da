//! On-disk formats: binary sample files, moment JSON, pole and correlation CSV.
//! Every file carries the digest of the run configuration and the code version.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpu_model::{FpuParams, PhasePoint};
use crate::gibbs::{PointSource, SampleSet};
use crate::moments::MomentSequence;
use crate::stieltjes::{Atom, SpectralApproximant};

pub const SAMPLE_MAGIC: &[u8; 4] = b"ACSM";
pub const SAMPLE_VERSION: u32 = 1;
pub const MOMENT_FORMAT: &str = "acsm-moments";
pub const MOMENT_VERSION: u32 = 1;
pub const POLE_COLUMNS: &str = "order,k,omega,one_over_omega,rho,rho_normalized,omega_stderr,rho_stderr";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub config_digest: String,
    pub code_version: String,
}

impl Provenance {
    fn comment_lines(&self) -> String {
        format!(
            "# config_digest={}\n# code_version={}\n",
            self.config_digest, self.code_version
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleHeader {
    pub params: FpuParams,
    pub seed: u64,
    pub n_samples: usize,
    pub generator_id: String,
    pub provenance: Provenance,
}

/// Bytes before the point data.
pub fn sample_header_len(header: &SampleHeader) -> Result<usize> {
    Ok(12 + serde_json::to_vec(header)?.len())
}

/// `"ACSM"`, `u32` version, `u32` header length, JSON header, then per point
/// `N` positions followed by `N` momenta, all little-endian `f64`.
pub fn write_sample_file<S: PointSource + ?Sized>(path: &Path, header: &SampleHeader, sample: &S) -> Result<()> {
    if header.n_samples != sample.len() {
        return Err(Error::Format(format!(
            "header declares {} points, sample has {}",
            header.n_samples,
            sample.len()
        )));
    }
    let json = serde_json::to_vec(header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SAMPLE_MAGIC)?;
    w.write_all(&SAMPLE_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let n = header.params.n_particles;
    for i in 0..sample.len() {
        let x = sample.point(i);
        if x.len() != n {
            return Err(Error::Format(format!("point {i} has {} particles, expected {n}", x.len())));
        }
        for v in x.q.iter().chain(&x.p) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_sample_file(path: &Path) -> Result<(SampleHeader, SampleSet)> {
    let len = std::fs::metadata(path)?.len() as usize;
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("file too short for a sample header".into()))?;
    if &magic != SAMPLE_MAGIC {
        return Err(Error::Format("not a sample file (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != SAMPLE_VERSION {
        return Err(Error::Format(format!("unsupported sample file version {version}")));
    }
    let hlen = read_u32(&mut r)? as usize;
    if 12 + hlen > len {
        return Err(Error::Format("truncated sample header".into()));
    }
    let mut json = vec![0u8; hlen];
    r.read_exact(&mut json)?;
    let header: SampleHeader = serde_json::from_slice(&json)?;
    header.params.validate()?;
    let n = header.params.n_particles;
    let expected = 12 + hlen + header.n_samples * 2 * n * 8;
    if len != expected {
        return Err(Error::Format(format!("sample file has {len} bytes, header implies {expected}")));
    }
    let mut buf = vec![0u8; 2 * n * 8];
    let mut points = Vec::with_capacity(header.n_samples);
    for _ in 0..header.n_samples {
        r.read_exact(&mut buf)?;
        let vals: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        points.push(PhasePoint::from_qp(vals[..n].to_vec(), vals[n..].to_vec()));
    }
    let set = SampleSet {
        points,
        seed: header.seed,
        params: header.params,
        generator_id: header.generator_id.clone(),
    };
    Ok((header, set))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentFile {
    pub format: String,
    pub version: u32,
    pub provenance: Provenance,
    pub moments: MomentSequence,
}

impl MomentFile {
    pub fn new(moments: MomentSequence, provenance: Provenance) -> Self {
        Self {
            format: MOMENT_FORMAT.to_string(),
            version: MOMENT_VERSION,
            provenance,
            moments,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MOMENT_FORMAT {
            return Err(Error::Format(format!("expected format {MOMENT_FORMAT:?}, got {:?}", self.format)));
        }
        if self.version != MOMENT_VERSION {
            return Err(Error::Format(format!("unsupported moment file version {}", self.version)));
        }
        self.moments.validate()
    }
}

pub fn write_moment_file(path: &Path, file: &MomentFile) -> Result<()> {
    file.validate()?;
    std::fs::write(path, serde_json::to_string_pretty(file)?)?;
    Ok(())
}

pub fn parse_moment_file(text: &str) -> Result<MomentFile> {
    let file: MomentFile = serde_json::from_str(text).map_err(|e| Error::Format(format!("moment file: {e}")))?;
    file.validate()?;
    Ok(file)
}

pub fn read_moment_file(path: &Path) -> Result<MomentFile> {
    parse_moment_file(&std::fs::read_to_string(path)?)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

pub fn pole_csv(ladder: &[SpectralApproximant], provenance: &Provenance) -> String {
    let mut s = provenance.comment_lines();
    s.push_str(POLE_COLUMNS);
    s.push('\n');
    for a in ladder {
        let norm = a.normalized_residues();
        for (k, at) in a.atoms.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:e},{},{}\n",
                a.order,
                k + 1,
                at.omega,
                1.0 / at.omega,
                at.rho,
                norm[k],
                opt(at.omega_stderr),
                opt(at.rho_stderr)
            ));
        }
    }
    s
}

fn parse_opt(field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        field
            .parse()
            .map(Some)
            .map_err(|_| Error::Format(format!("bad number {field:?}")))
    }
}

/// Approximants by order from a pole CSV.
pub fn parse_pole_csv(text: &str) -> Result<Vec<SpectralApproximant>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == POLE_COLUMNS => {}
        _ => return Err(Error::Format(format!("pole file must start with header {POLE_COLUMNS}"))),
    }
    let mut out: Vec<(usize, Vec<(f64, f64, Option<f64>, Option<f64>)>)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Format(format!("pole row {} has {} fields", i + 1, f.len())));
        }
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Format(format!("bad number {s:?}"))) };
        let order: usize = f[0].parse().map_err(|_| Error::Format(format!("bad order {:?}", f[0])))?;
        let omega = num(f[2])?;
        let rho = num(f[4])?;
        if !(omega > 0.0 && omega.is_finite() && rho.is_finite() && rho >= 0.0) {
            return Err(Error::Format(format!("pole row {} has invalid omega or rho", i + 1)));
        }
        let entry = (omega, rho, parse_opt(f[6])?, parse_opt(f[7])?);
        match out.last_mut() {
            Some((o, atoms)) if *o == order => atoms.push(entry),
            _ => out.push((order, vec![entry])),
        }
    }
    if out.is_empty() {
        return Err(Error::Format("pole file has no rows".into()));
    }
    Ok(out
        .into_iter()
        .map(|(order, atoms)| {
            let pairs: Vec<(f64, f64)> = atoms.iter().map(|a| (a.0, a.1)).collect();
            let mut a = SpectralApproximant::from_atoms(&pairs);
            a.order = order;
            for (at, src) in a.atoms.iter_mut().zip(&atoms) {
                *at = Atom {
                    omega_stderr: src.2,
                    rho_stderr: src.3,
                    ..at.clone()
                };
            }
            a
        })
        .collect())
}

pub fn read_pole_file(path: &Path) -> Result<Vec<SpectralApproximant>> {
    parse_pole_csv(&std::fs::read_to_string(path)?)
}

/// Columns `t, C, stderr` and one `S_n` column per truncation order.
pub fn correlation_csv(
    times: &[f64],
    values: &[f64],
    stderr: &[f64],
    orders: &[usize],
    partial_sums: &[Vec<f64>],
    provenance: &Provenance,
) -> String {
    let mut s = provenance.comment_lines();
    s.push_str("t,C,stderr");
    for n in orders {
        s.push_str(&format!(",S_{n}"));
    }
    s.push('\n');
    for i in 0..times.len() {
        s.push_str(&format!("{:e},{:e},{:e}", times[i], values[i], stderr[i]));
        for v in partial_sums.get(i).map(Vec::as_slice).unwrap_or(&[]) {
            s.push_str(&format!(",{v:e}"));
        }
        s.push('\n');
    }
    s
}

/// `(header, rows)` of a CSV file, skipping `#` comment lines.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let r = BufReader::new(File::open(path)?);
    let mut header = None;
    let mut rows = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(line.split(',').map(str::to_string).collect());
            continue;
        }
        rows.push(
            line.split(',')
                .map(|v| if v.is_empty() { Ok(f64::NAN) } else { v.parse() })
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| Error::Format(format!("bad CSV row {line:?}")))?,
        );
    }
    Ok((header.unwrap_or_default(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::generate;

    fn prov() -> Provenance {
        Provenance {
            config_digest: "abc".into(),
            code_version: "0.1.0".into(),
        }
    }

    #[test]
    fn sample_roundtrip_and_length() {
        let params = FpuParams::new(5, 0.25, 0.25, 0.01).unwrap();
        let set = generate(params, 9, 17).unwrap();
        let header = SampleHeader {
            params,
            seed: 9,
            n_samples: 17,
            generator_id: set.generator_id.clone(),
            provenance: prov(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        write_sample_file(&path, &header, &set).unwrap();
        let len = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(len, sample_header_len(&header).unwrap() + 2 * 5 * 17 * 8);
        let (h, back) = read_sample_file(&path).unwrap();
        assert_eq!(h, header);
        for (a, b) in back.points.iter().zip(&set.points) {
            assert_eq!(a.q, b.q);
            assert_eq!(a.p, b.p);
        }
        std::fs::write(&path, &std::fs::read(&path).unwrap()[..len - 3]).unwrap();
        assert!(matches!(read_sample_file(&path), Err(Error::Format(_))));
    }

    #[test]
    fn moment_file_roundtrip_and_schema() {
        let m = MomentSequence::exact("x", vec![1.0, 2.0]);
        let f = MomentFile::new(m, prov());
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(parse_moment_file(&text).unwrap(), f);
        assert!(parse_moment_file(&text.replace("\"format\"", "\"formats\"")).is_err());
        assert!(parse_moment_file(r#"{"format":"acsm-moments"}"#).is_err());
    }

    #[test]
    fn pole_csv_roundtrip() {
        let mut a = SpectralApproximant::from_atoms(&[(1.0, 0.7), (2.0, 0.3)]);
        a.atoms[0].rho_stderr = Some(0.01);
        let b = SpectralApproximant::from_atoms(&[(1.2, 1.0)]);
        let text = pole_csv(&[b.clone(), a.clone()], &prov());
        let back = parse_pole_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].atoms, a.atoms);
        assert_eq!(back[0].order, 1);
        assert!(parse_pole_csv("omega,rho\n1,2\n").is_err());
    }
}
