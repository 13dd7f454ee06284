//! Checkpoints: a flat little-endian binary of named tensors plus a text manifest.
//!
//! Binary layout: magic `WFCK`, format version (u32), tensor count (u32), then
//! per tensor rows (u32), cols (u32) and `rows·cols` f64 values. The manifest
//! (`<stem>.manifest`) lists `key=value` metadata followed by one
//! `tensor <name> <rows> <cols>` line per tensor, in binary order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::nn::{Mlp, RunningNorm};
use super::policy::GaussianPolicy;
use super::tensor::Mat;
use super::trainer::{Algo, Learner, MultiAgentPolicy};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WFCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Mat)>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        b.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (_, m) in &self.tensors {
            b.extend_from_slice(&(m.rows as u32).to_le_bytes());
            b.extend_from_slice(&(m.cols as u32).to_le_bytes());
            for v in &m.data {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        b
    }

    pub fn manifest(&self) -> String {
        let mut s = format!("format_version={FORMAT_VERSION}\n");
        for (k, v) in &self.meta {
            s.push_str(&format!("{k}={v}\n"));
        }
        for (name, m) in &self.tensors {
            s.push_str(&format!("tensor {name} {} {}\n", m.rows, m.cols));
        }
        s
    }

    pub fn from_parts(manifest: &str, bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::Parse { line: 0, msg };
        let mut meta = BTreeMap::new();
        let mut names = Vec::new();
        for (n, line) in manifest.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("tensor ") {
                let f: Vec<&str> = rest.split_whitespace().collect();
                let shape = (f.len() == 3).then(|| (f[1].parse::<usize>(), f[2].parse::<usize>()));
                match shape {
                    Some((Ok(r), Ok(c))) => names.push((f[0].to_string(), r, c)),
                    _ => return Err(Error::Parse { line: n + 1, msg: format!("bad tensor line `{line}`") }),
                }
            } else if let Some((k, v)) = line.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            } else {
                return Err(Error::Parse { line: n + 1, msg: format!("bad manifest line `{line}`") });
            }
        }
        match meta.remove("format_version").map(|v| v.parse::<u32>()) {
            Some(Ok(FORMAT_VERSION)) => {}
            other => return Err(bad(format!("unsupported checkpoint version {other:?}"))),
        }

        let mut pos = 0usize;
        let mut take = |k: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + k).ok_or_else(|| bad("checkpoint binary truncated".into()))?;
            pos += k;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(bad("bad checkpoint magic".into()));
        }
        let u32_of = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
        let version = u32_of(take(4)?);
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported checkpoint binary version {version}")));
        }
        let count = u32_of(take(4)?) as usize;
        if count != names.len() {
            return Err(bad(format!("binary holds {count} tensors, manifest lists {}", names.len())));
        }
        let mut tensors = Vec::with_capacity(count);
        for (name, r, c) in names {
            let (rows, cols) = (u32_of(take(4)?) as usize, u32_of(take(4)?) as usize);
            if (rows, cols) != (r, c) {
                return Err(bad(format!("tensor {name}: binary shape {rows}×{cols}, manifest {r}×{c}")));
            }
            let data = take(8 * rows * cols)?
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            tensors.push((name, Mat { rows, cols, data }));
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes after the last tensor".into()));
        }
        Ok(Self { meta, tensors })
    }

    /// Writes `<stem>.bin` and `<stem>.manifest`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let (bin, man) = paths(stem);
        write_atomic(&bin, &self.to_bytes())?;
        write_atomic(&man, self.manifest().as_bytes())?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let (bin, man) = paths(stem);
        Self::from_parts(&fs::read_to_string(man)?, &fs::read(bin)?)
    }

    pub fn get(&self, name: &str) -> Result<&Mat> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("checkpoint has no tensor `{name}`") })
    }

    pub fn meta_value<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.meta
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("checkpoint metadata `{key}` missing or invalid") })
    }
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("manifest"))
}

/// Writes via a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn push_mlp(t: &mut Vec<(String, Mat)>, prefix: &str, net: &Mlp) {
    for (k, p) in net.params.iter().enumerate() {
        let kind = if k % 2 == 0 { "w" } else { "b" };
        t.push((format!("{prefix}.{kind}{}", k / 2), p.clone()));
    }
}

fn read_mlp(c: &Checkpoint, prefix: &str) -> Result<Mlp> {
    let mut params = Vec::new();
    for l in 0.. {
        match (c.get(&format!("{prefix}.w{l}")), c.get(&format!("{prefix}.b{l}"))) {
            (Ok(w), Ok(b)) => {
                params.push(w.clone());
                params.push(b.clone());
            }
            _ => break,
        }
    }
    Mlp::from_params(params)
}

fn push_norm(t: &mut Vec<(String, Mat)>, prefix: &str, n: &RunningNorm) {
    t.push((format!("{prefix}.mean"), Mat { rows: 1, cols: n.dim(), data: n.mean.clone() }));
    t.push((format!("{prefix}.var"), Mat { rows: 1, cols: n.dim(), data: n.var.clone() }));
    t.push((format!("{prefix}.count"), Mat::filled(1, 1, n.count)));
    t.push((format!("{prefix}.min_std"), Mat::filled(1, 1, n.min_std)));
}

fn read_norm(c: &Checkpoint, prefix: &str) -> Result<RunningNorm> {
    Ok(RunningNorm {
        mean: c.get(&format!("{prefix}.mean"))?.data.clone(),
        var: c.get(&format!("{prefix}.var"))?.data.clone(),
        count: c.get(&format!("{prefix}.count"))?.data[0],
        min_std: c.get(&format!("{prefix}.min_std"))?.data[0],
    })
}

impl Learner {
    /// Parameters and normalizers; optimizer state is not stored.
    pub fn to_checkpoint(&self, extra: &[(&str, String)]) -> Checkpoint {
        let p = &self.policy;
        let mut meta = BTreeMap::new();
        meta.insert("algo".to_string(), self.algo.to_string());
        meta.insert("agents".to_string(), p.num_agents().to_string());
        meta.insert("obs_dim".to_string(), p.obs_dim().to_string());
        meta.insert("act_dim".to_string(), p.act_dim().to_string());
        meta.insert("normalize_obs".to_string(), p.normalize_obs.to_string());
        meta.insert(
            "action_high".to_string(),
            p.action_high.iter().map(f64::to_string).collect::<Vec<_>>().join(" "),
        );
        for (k, v) in extra {
            meta.insert(k.to_string(), v.clone());
        }
        let mut t = Vec::new();
        for (i, a) in p.actors.iter().enumerate() {
            push_mlp(&mut t, &format!("actor{i}"), &a.net);
            t.push((format!("actor{i}.log_std"), a.log_std.clone()));
            push_norm(&mut t, &format!("obs_norm{i}"), &p.obs_norms[i]);
        }
        for (c, net) in self.critics.iter().enumerate() {
            push_mlp(&mut t, &format!("critic{c}"), net);
        }
        push_norm(&mut t, "critic_norm", &self.critic_norm);
        Checkpoint { meta, tensors: t }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let algo: Algo = c.meta.get("algo").map(String::as_str).unwrap_or("").parse()?;
        let agents: usize = c.meta_value("agents")?;
        let normalize_obs: bool = c.meta_value("normalize_obs")?;
        let action_high = c
            .meta
            .get("action_high")
            .map(|s| s.split_whitespace().map(str::parse).collect::<std::result::Result<Vec<f64>, _>>())
            .and_then(|r| r.ok())
            .ok_or_else(|| Error::Parse { line: 0, msg: "checkpoint metadata `action_high` invalid".into() })?;
        let mut actors = Vec::with_capacity(agents);
        let mut obs_norms = Vec::with_capacity(agents);
        for i in 0..agents {
            let net = read_mlp(c, &format!("actor{i}"))?;
            let log_std = c.get(&format!("actor{i}.log_std"))?.clone();
            if log_std.cols != net.output_dim() || action_high.len() != net.output_dim() {
                return Err(Error::Parse { line: 0, msg: format!("actor {i}: inconsistent action dimension") });
            }
            actors.push(GaussianPolicy { net, log_std });
            obs_norms.push(read_norm(c, &format!("obs_norm{i}"))?);
        }
        let n_critics = if algo == Algo::Ippo { agents } else { 1 };
        let critics = (0..n_critics).map(|k| read_mlp(c, &format!("critic{k}"))).collect::<Result<Vec<_>>>()?;
        let policy = MultiAgentPolicy { actors, obs_norms, normalize_obs, action_high };
        Ok(Learner::assemble(algo, policy, critics, read_norm(c, "critic_norm")?))
    }

    pub fn save(&self, stem: &Path, extra: &[(&str, String)]) -> Result<()> {
        self.to_checkpoint(extra).save(stem)
    }

    pub fn load(stem: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(stem)?)
    }
}
