//! Public states, demonstrations and abstracted-state projection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{relative_pose, Pose, PoseVec7, Quat};

pub const DEFAULT_HAND_ID: &str = "hand";

/// Externally observable poses at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicState {
    pub hand_id: String,
    pub hand: Pose,
    pub objects: BTreeMap<String, Pose>,
}

impl PublicState {
    pub fn new(hand_id: impl Into<String>, hand: Pose, objects: BTreeMap<String, Pose>) -> Result<Self> {
        let hand_id = hand_id.into();
        if objects.contains_key(&hand_id) {
            return Err(Error::InvalidDemonstration(format!("object id `{hand_id}` collides with the hand id")));
        }
        Ok(Self { hand_id, hand, objects })
    }

    pub fn pose(&self, id: &str) -> Result<&Pose> {
        if id == self.hand_id {
            Ok(&self.hand)
        } else {
            self.objects.get(id).ok_or_else(|| Error::UnknownEntity(id.to_string()))
        }
    }

    pub fn location(&self, id: &str) -> Result<[f64; 3]> {
        self.pose(id).map(|p| p.location)
    }

    /// Hand id followed by object ids in ascending order.
    pub fn entity_ids(&self) -> Vec<String> {
        std::iter::once(self.hand_id.clone()).chain(self.objects.keys().cloned()).collect()
    }
}

/// State abstraction ⟨O_rel, o_ref⟩.
///
/// `relevant` is kept in canonical order: hand first, then object ids ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Abstraction {
    pub relevant: Vec<String>,
    pub reference: String,
}

impl Abstraction {
    pub fn new<I, S>(hand_id: &str, relevant_objects: I, reference: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let reference = reference.into();
        if reference == hand_id {
            return Err(Error::InvalidConfig("the hand cannot be the reference entity".into()));
        }
        let objects: BTreeSet<String> = relevant_objects.into_iter().map(Into::into).collect();
        if objects.contains(&reference) {
            return Err(Error::InvalidConfig(format!("reference `{reference}` cannot also be relevant")));
        }
        if objects.contains(hand_id) {
            return Err(Error::InvalidConfig("hand listed among relevant objects".into()));
        }
        let relevant = std::iter::once(hand_id.to_string()).chain(objects).collect();
        Ok(Self { relevant, reference })
    }

    pub fn hand_id(&self) -> &str {
        &self.relevant[0]
    }

    /// Relevant entities other than the hand.
    pub fn objects(&self) -> &[String] {
        &self.relevant[1..]
    }

    pub fn state_dim(&self) -> usize {
        7 * self.relevant.len()
    }
}

impl std::fmt::Display for Abstraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<{{{}}}, {}>", self.relevant.join(", "), self.reference)
    }
}

/// Concatenated poses of every relevant entity in the reference frame.
pub fn abstract_state(s: &PublicState, m: &Abstraction) -> Result<Vec<f64>> {
    let reference = s.pose(&m.reference)?;
    let mut out = Vec::with_capacity(m.state_dim());
    for id in &m.relevant {
        out.extend_from_slice(relative_pose(s.pose(id)?, reference)?.as_slice());
    }
    Ok(out)
}

/// Central second differences; endpoints copy the nearest interior sample.
pub fn finite_diff_accel(traj: &[Vec<f64>], dt: f64) -> Result<Vec<Vec<f64>>> {
    if traj.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: traj.len() });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    let dim = traj[0].len();
    if let Some(bad) = traj.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let n = traj.len();
    let inv = 1.0 / (dt * dt);
    let mut out = vec![vec![0.0; dim]; n];
    for k in 1..n - 1 {
        for d in 0..dim {
            out[k][d] = (traj[k - 1][d] - 2.0 * traj[k][d] + traj[k + 1][d]) * inv;
        }
    }
    out[0] = out[1].clone();
    out[n - 1] = out[n - 2].clone();
    Ok(out)
}

/// Frame-rate sequence of public states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub dt: f64,
    pub frames: Vec<PublicState>,
}

impl Demonstration {
    pub fn new(dt: f64, frames: Vec<PublicState>) -> Result<Self> {
        let demo = Self { dt, frames };
        demo.validate()?;
        Ok(demo)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidDemonstration(format!("dt must be positive, got {}", self.dt)));
        }
        if self.frames.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: self.frames.len() });
        }
        let ids = self.frames[0].entity_ids();
        for (k, f) in self.frames.iter().enumerate() {
            if f.hand_id != self.frames[0].hand_id || f.entity_ids() != ids {
                return Err(Error::InvalidDemonstration(format!("frame {k} has a different entity set")));
            }
            f.hand.validate()?;
            for p in f.objects.values() {
                p.validate()?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn hand_id(&self) -> &str {
        &self.frames[0].hand_id
    }

    pub fn object_ids(&self) -> Vec<String> {
        self.frames[0].objects.keys().cloned().collect()
    }

    pub fn entity_ids(&self) -> Vec<String> {
        self.frames[0].entity_ids()
    }

    /// Location track of one entity over all frames.
    pub fn track(&self, id: &str) -> Result<Vec<[f64; 3]>> {
        self.frames.iter().map(|f| f.location(id)).collect()
    }

    pub fn to_csv(&self) -> String {
        let ids = self.entity_ids();
        let mut out = String::new();
        writeln!(out, "dt={}", format_number(self.dt)).unwrap();
        writeln!(out, "{}", ids.join(",")).unwrap();
        for (k, f) in self.frames.iter().enumerate() {
            out.push_str(&k.to_string());
            for id in &ids {
                let p = f.pose(id).expect("entity sets validated");
                let q = p.orientation;
                for v in [p.location[0], p.location[1], p.location[2], q.x, q.y, q.z, q.w] {
                    out.push(',');
                    out.push_str(&format_number(v));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parse [`Demonstration::to_csv`] output; blank lines and `#` comment lines are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (_, first) = lines.next().ok_or(Error::Parse { line: 1, message: "empty file".into() })?;
        let dt = first
            .trim()
            .strip_prefix("dt=")
            .ok_or(Error::Parse { line: 1, message: "expected `dt=<seconds>`".into() })?;
        let dt: f64 = dt.trim().parse().map_err(|e| Error::Parse { line: 1, message: format!("bad dt: {e}") })?;
        let (_, header) = lines.next().ok_or(Error::Parse { line: 2, message: "missing entity header".into() })?;
        let ids: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        if ids.len() < 2 || ids.iter().any(String::is_empty) {
            return Err(Error::Parse { line: 2, message: "need a hand id and at least one object id".into() });
        }
        let unique: BTreeSet<&String> = ids.iter().collect();
        if unique.len() != ids.len() {
            return Err(Error::Parse { line: 2, message: "duplicate entity id".into() });
        }
        let mut frames = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 1 + 7 * ids.len() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {} columns, got {}", 1 + 7 * ids.len(), cols.len()),
                });
            }
            let index: usize = cols[0]
                .parse()
                .map_err(|e| Error::Parse { line: lineno, message: format!("bad frame index: {e}") })?;
            if index != frames.len() {
                return Err(Error::Parse { line: lineno, message: format!("frame index {index} out of sequence") });
            }
            let vals = cols[1..]
                .iter()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse { line: lineno, message: format!("bad number: {e}") })?;
            let mut poses = ids.iter().zip(vals.chunks(7)).map(|(id, c)| {
                let pose = Pose::new([c[0], c[1], c[2]], Quat::new(c[3], c[4], c[5], c[6]))
                    .map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
                Ok((id.clone(), pose))
            });
            let (hand_id, hand) = poses.next().unwrap()?;
            let objects = poses.collect::<Result<BTreeMap<_, _>>>()?;
            frames.push(PublicState::new(hand_id, hand, objects)?);
        }
        Self::new(dt, frames)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    /// Poses of `id` in the frame of `reference`, for frames `start..=end`.
    pub fn relative_track(&self, id: &str, reference: &str, start: usize, end: usize) -> Result<Vec<PoseVec7>> {
        if end >= self.len() || start > end {
            return Err(Error::InvalidDemonstration(format!(
                "frame range {start}..={end} outside 0..{}",
                self.len()
            )));
        }
        self.frames[start..=end]
            .iter()
            .map(|f| relative_pose(f.pose(id)?, f.pose(reference)?))
            .collect()
    }
}

/// Shortest round-trip decimal, padded with zeros to at least nine significant digits.
pub fn format_number(v: f64) -> String {
    let mut s = format!("{v}");
    if !v.is_finite() {
        return s;
    }
    let digits: String = s.chars().filter(char::is_ascii_digit).collect();
    let significant = if v == 0.0 { 1 } else { digits.trim_start_matches('0').len() };
    if significant < 9 {
        if !s.contains('.') {
            s.push('.');
        }
        s.extend(std::iter::repeat_n('0', 9 - significant));
    }
    s
}
