//! The 13 tactile patterns as timed temple-contact keyframes.

use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const WORKSPACE_MM: f64 = 70.0;
pub const CENTER_MM: f64 = 35.0;
pub const TAP_DURATION_MS: u64 = 400;
pub const FAST_SLIDE_MS: u64 = 1000;
pub const SLOW_SLIDE_MS: u64 = 1500;
/// Length of the first-temple press in a lateral handoff.
pub const HANDOFF_FIRST_MS: u64 = 300;
/// Overlap between the two presses of a lateral handoff.
pub const HANDOFF_OVERLAP_MS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Temple {
    Left,
    Right,
}

impl Temple {
    pub const BOTH: [Temple; 2] = [Temple::Left, Temple::Right];

    pub fn wire_code(self) -> char {
        match self {
            Temple::Left => 'L',
            Temple::Right => 'R',
        }
    }

    pub fn opposite(self) -> Temple {
        match self {
            Temple::Left => Temple::Right,
            Temple::Right => Temple::Left,
        }
    }
}

impl fmt::Display for Temple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Temple::Left => "left",
            Temple::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Speed {
    Fast,
    Slow,
}

impl Speed {
    pub fn duration_ms(self) -> u64 {
        match self {
            Speed::Fast => FAST_SLIDE_MS,
            Speed::Slow => SLOW_SLIDE_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Front,
    Back,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternKind {
    Tap(TapSite),
    Slide(Direction, Speed),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TapSite {
    Front,
    Center,
    Back,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HapticPatternId {
    TapFront,
    TapCenter,
    TapBack,
    TapLeft,
    TapRight,
    SlideFrontFast,
    SlideBackFast,
    SlideLeftFast,
    SlideRightFast,
    SlideFrontSlow,
    SlideBackSlow,
    SlideLeftSlow,
    SlideRightSlow,
}

impl HapticPatternId {
    pub const ALL: [HapticPatternId; 13] = [
        Self::TapFront,
        Self::TapCenter,
        Self::TapBack,
        Self::TapLeft,
        Self::TapRight,
        Self::SlideFrontFast,
        Self::SlideBackFast,
        Self::SlideLeftFast,
        Self::SlideRightFast,
        Self::SlideFrontSlow,
        Self::SlideBackSlow,
        Self::SlideLeftSlow,
        Self::SlideRightSlow,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|p| *p == self).unwrap_or(0)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::TapFront => "TapFront",
            Self::TapCenter => "TapCenter",
            Self::TapBack => "TapBack",
            Self::TapLeft => "TapLeft",
            Self::TapRight => "TapRight",
            Self::SlideFrontFast => "SlideFrontFast",
            Self::SlideBackFast => "SlideBackFast",
            Self::SlideLeftFast => "SlideLeftFast",
            Self::SlideRightFast => "SlideRightFast",
            Self::SlideFrontSlow => "SlideFrontSlow",
            Self::SlideBackSlow => "SlideBackSlow",
            Self::SlideLeftSlow => "SlideLeftSlow",
            Self::SlideRightSlow => "SlideRightSlow",
        }
    }

    pub fn kind(self) -> PatternKind {
        use Direction as D;
        use PatternKind::{Slide, Tap};
        use Speed::{Fast, Slow};
        match self {
            Self::TapFront => Tap(TapSite::Front),
            Self::TapCenter => Tap(TapSite::Center),
            Self::TapBack => Tap(TapSite::Back),
            Self::TapLeft => Tap(TapSite::Left),
            Self::TapRight => Tap(TapSite::Right),
            Self::SlideFrontFast => Slide(D::Front, Fast),
            Self::SlideBackFast => Slide(D::Back, Fast),
            Self::SlideLeftFast => Slide(D::Left, Fast),
            Self::SlideRightFast => Slide(D::Right, Fast),
            Self::SlideFrontSlow => Slide(D::Front, Slow),
            Self::SlideBackSlow => Slide(D::Back, Slow),
            Self::SlideLeftSlow => Slide(D::Left, Slow),
            Self::SlideRightSlow => Slide(D::Right, Slow),
        }
    }

    pub fn duration_ms(self) -> u64 {
        match self.kind() {
            PatternKind::Tap(_) => TAP_DURATION_MS,
            PatternKind::Slide(_, speed) => speed.duration_ms(),
        }
    }
}

impl fmt::Display for HapticPatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HapticPatternId {
    type Err = String;

    /// Accepts `SlideBackSlow`, `slide_back_slow` or `slide-back-slow`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| *c != '_' && *c != '-').collect();
        Self::ALL.iter().copied().find(|p| p.name().eq_ignore_ascii_case(&key)).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|p| p.name()).collect();
            format!("unknown pattern `{s}`; valid patterns: {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactKeyframe {
    pub t_ms: u64,
    pub temple: Temple,
    pub position_mm: f64,
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternTrajectory {
    pub pattern: HapticPatternId,
    pub keyframes: Vec<ContactKeyframe>,
    pub duration_ms: u64,
}

impl PatternTrajectory {
    /// Temples touched by this pattern, left first.
    pub fn temples(&self) -> Vec<Temple> {
        Temple::BOTH.into_iter().filter(|t| self.keyframes.iter().any(|k| k.temple == *t)).collect()
    }

    pub fn keyframes_for(&self, temple: Temple) -> impl Iterator<Item = &ContactKeyframe> {
        self.keyframes.iter().filter(move |k| k.temple == temple)
    }

    /// Linear interpolation of (position, pressure) on one temple; `None`
    /// outside that temple's keyframe span.
    pub fn sample(&self, temple: Temple, t_ms: f64) -> Option<(f64, f64)> {
        let kf: Vec<&ContactKeyframe> = self.keyframes_for(temple).collect();
        let first = kf.first()?;
        let last = kf.last()?;
        if t_ms < first.t_ms as f64 || t_ms > last.t_ms as f64 {
            return None;
        }
        for w in kf.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ta, tb) = (a.t_ms as f64, b.t_ms as f64);
            if t_ms >= ta && t_ms <= tb {
                if tb == ta {
                    return Some((b.position_mm, b.pressure));
                }
                let u = (t_ms - ta) / (tb - ta);
                return Some((
                    a.position_mm + u * (b.position_mm - a.position_mm),
                    a.pressure + u * (b.pressure - a.pressure),
                ));
            }
        }
        Some((first.position_mm, first.pressure))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.keyframes.is_empty() {
            return Err("trajectory has no keyframes".into());
        }
        for w in self.keyframes.windows(2) {
            if w[1].t_ms < w[0].t_ms {
                return Err(format!("keyframes not time-sorted at t={}", w[1].t_ms));
            }
        }
        for k in &self.keyframes {
            if !(0.0..=WORKSPACE_MM).contains(&k.position_mm) {
                return Err(format!("position {} mm outside workspace", k.position_mm));
            }
            if !(0.0..=1.0).contains(&k.pressure) {
                return Err(format!("pressure {} outside [0, 1]", k.pressure));
            }
        }
        let max_t = self.keyframes.iter().map(|k| k.t_ms).max().unwrap_or(0);
        if max_t != self.duration_ms {
            return Err(format!("duration {} differs from last keyframe {}", self.duration_ms, max_t));
        }
        Ok(())
    }

    /// CSV export with columns t_ms, temple, position_mm, pressure.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_ms", "temple", "position_mm", "pressure"])?;
        for k in &self.keyframes {
            w.write_record([k.t_ms.to_string(), k.temple.to_string(), k.position_mm.to_string(), k.pressure.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn kf(t_ms: u64, temple: Temple, position_mm: f64, pressure: f64) -> ContactKeyframe {
    ContactKeyframe { t_ms, temple, position_mm, pressure }
}

fn tap(temples: &[Temple], position_mm: f64) -> Vec<ContactKeyframe> {
    let half = TAP_DURATION_MS / 2;
    temples
        .iter()
        .flat_map(|&t| {
            [kf(0, t, position_mm, 0.0), kf(half, t, position_mm, 1.0), kf(TAP_DURATION_MS, t, position_mm, 0.0)]
        })
        .collect()
}

fn longitudinal(from_mm: f64, to_mm: f64, duration: u64) -> Vec<ContactKeyframe> {
    Temple::BOTH
        .iter()
        .flat_map(|&t| [kf(0, t, from_mm, 1.0), kf(duration, t, to_mm, 1.0)])
        .collect()
}

/// Press on `first`, then an overlapping press on the opposite temple that
/// holds until the end.
fn handoff(first: Temple, duration: u64) -> Vec<ContactKeyframe> {
    let second = first.opposite();
    let rise = HANDOFF_FIRST_MS - HANDOFF_OVERLAP_MS;
    vec![
        kf(0, first, CENTER_MM, 0.0),
        kf(HANDOFF_OVERLAP_MS, first, CENTER_MM, 1.0),
        kf(HANDOFF_FIRST_MS, first, CENTER_MM, 0.0),
        kf(rise, second, CENTER_MM, 0.0),
        kf(HANDOFF_FIRST_MS, second, CENTER_MM, 1.0),
        kf(duration - HANDOFF_OVERLAP_MS, second, CENTER_MM, 1.0),
        kf(duration, second, CENTER_MM, 0.0),
    ]
}

pub fn compile_pattern(id: HapticPatternId) -> PatternTrajectory {
    let mut keyframes = match id.kind() {
        PatternKind::Tap(site) => match site {
            TapSite::Front => tap(&Temple::BOTH, WORKSPACE_MM),
            TapSite::Center => tap(&Temple::BOTH, CENTER_MM),
            TapSite::Back => tap(&Temple::BOTH, 0.0),
            TapSite::Left => tap(&[Temple::Left], CENTER_MM),
            TapSite::Right => tap(&[Temple::Right], CENTER_MM),
        },
        PatternKind::Slide(dir, speed) => {
            let d = speed.duration_ms();
            match dir {
                Direction::Front => longitudinal(0.0, WORKSPACE_MM, d),
                Direction::Back => longitudinal(WORKSPACE_MM, 0.0, d),
                Direction::Left => handoff(Temple::Right, d),
                Direction::Right => handoff(Temple::Left, d),
            }
        }
    };
    keyframes.sort_by_key(|k| (k.t_ms, k.temple));
    let duration_ms = keyframes.iter().map(|k| k.t_ms).max().unwrap_or(0);
    PatternTrajectory { pattern: id, keyframes, duration_ms }
}
