//! Deterministic in-process stand-ins for every service port.

use alloc::format;
use alloc::string::String;
use core::sync::atomic::{AtomicUsize, Ordering};

use super::ports::{
    Describer, DetectedObject, Detections, Detector, Generator, ImageRef, Paraphraser, PortError, PortResult,
    RegionAnswer, RegionQuery, RegionVerifier, ServicePorts, TextVerifier,
};
use super::prompt::prompt_prefix;
use crate::model::{BBox, HoiClass};

/// 64-bit FNV-1a over `text` followed by the seed bytes.
pub fn fnv1a(text: &str, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes().chain(seed.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

const SCENES: &[&str] = &[
    "in a sunny park with trees in the background",
    "on a quiet street in the early morning",
    "inside a bright room with large windows",
    "near a lake under a cloudy sky",
    "at a busy market surrounded by people",
    "on a wide field at sunset",
];

/// Fills the template with a scene picked from the image reference. The first
/// `violations` calls answer off-template.
#[derive(Debug, Default)]
pub struct MockDescriber {
    pub violations: AtomicUsize,
}

impl MockDescriber {
    pub fn violating(n: usize) -> Self {
        Self {
            violations: AtomicUsize::new(n),
        }
    }
}

impl Describer for MockDescriber {
    fn describe(&self, image: &ImageRef, class: &HoiClass, _query: &str, seed: u64) -> PortResult<String> {
        let broken = self
            .violations
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        if broken {
            return Ok(format!("There is a {} in this picture", class.object_text()));
        }
        let scene = SCENES[(fnv1a(image.as_str(), seed) % SCENES.len() as u64) as usize];
        Ok(format!("{} {}.", prompt_prefix(class), scene))
    }
}

#[derive(Debug, Default)]
pub struct MockGenerator {
    pub fail: bool,
}

impl Generator for MockGenerator {
    fn generate(&self, prompt: &str, seed: u64) -> PortResult<ImageRef> {
        if self.fail {
            return Err(PortError::new("generator", "mock generator configured to fail"));
        }
        Ok(ImageRef(format!("mock://generated/{:016x}.jpg", fnv1a(prompt, seed))))
    }
}

/// Reports `persons` people and `objects` boxes labelled with the queried
/// object on a 512x512 canvas.
#[derive(Debug)]
pub struct MockDetector {
    pub persons: usize,
    pub objects: usize,
    pub fail: bool,
}

impl Default for MockDetector {
    fn default() -> Self {
        Self {
            persons: 1,
            objects: 1,
            fail: false,
        }
    }
}

pub const MOCK_CANVAS: u32 = 512;

impl Detector for MockDetector {
    fn detect(&self, image: &ImageRef, object_query: &str, seed: u64) -> PortResult<Detections> {
        if self.fail {
            return Err(PortError::new("detector", "mock detector configured to fail"));
        }
        let h = fnv1a(image.as_str(), seed);
        let jitter = (h % 32) as f64;
        let slot = |i: usize, top: f64| {
            let x = 20.0 + jitter + 100.0 * i as f64;
            BBox::new(x, top, x + 80.0, top + 160.0)
        };
        Ok(Detections {
            width: MOCK_CANVAS,
            height: MOCK_CANVAS,
            persons: (0..self.persons).map(|i| slot(i, 40.0)).collect(),
            objects: (0..self.objects)
                .map(|i| DetectedObject {
                    label: object_query.into(),
                    bbox: slot(i, 240.0),
                })
                .collect(),
        })
    }
}

/// Answers every region query by `rule`.
pub struct MockRegionVerifier {
    rule: fn(&RegionQuery) -> bool,
}

impl MockRegionVerifier {
    pub fn always(yes: bool) -> Self {
        fn y(_: &RegionQuery) -> bool {
            true
        }
        fn n(_: &RegionQuery) -> bool {
            false
        }
        Self {
            rule: if yes { y } else { n },
        }
    }

    pub fn with_rule(rule: fn(&RegionQuery) -> bool) -> Self {
        Self { rule }
    }
}

impl core::fmt::Debug for MockRegionVerifier {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("MockRegionVerifier")
    }
}

impl RegionVerifier for MockRegionVerifier {
    fn verify_region(&self, q: &RegionQuery) -> PortResult<RegionAnswer> {
        let yes = (self.rule)(q);
        let description = if yes {
            format!("The person is {} the {}.", q.class.verb_text(), q.class.object_text())
        } else {
            format!("The person is standing apart from the {}.", q.class.object_text())
        };
        Ok(RegionAnswer { yes, description })
    }
}

/// Accepts, rejects, or cycles with a fixed period: with period `p` the
/// `p`-th, `2p`-th, ... calls accept and all others reject. The call counter
/// is shared, so a periodic verifier should serve one class at a time.
#[derive(Debug)]
pub struct MockTextVerifier {
    period: usize,
    calls: AtomicUsize,
}

impl MockTextVerifier {
    pub fn accept_all() -> Self {
        Self::periodic(1)
    }

    pub fn reject_all() -> Self {
        Self::periodic(0)
    }

    /// `period == 0` rejects everything.
    pub fn periodic(period: usize) -> Self {
        Self {
            period,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl TextVerifier for MockTextVerifier {
    fn verify_text(&self, _description: &str, _class: &HoiClass, _query: &str, _seed: u64) -> PortResult<bool> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        Ok(self.period != 0 && n.is_multiple_of(self.period))
    }
}

/// Swaps the scene of a templated prompt for another one.
#[derive(Debug, Default)]
pub struct MockParaphraser;

impl Paraphraser for MockParaphraser {
    fn paraphrase(&self, prompt: &str, seed: u64) -> PortResult<String> {
        let head = prompt.split_once(", ").map_or(prompt, |(h, _)| h);
        let scene = SCENES[(fnv1a(prompt, seed) % SCENES.len() as u64) as usize];
        Ok(format!("{head}, seen again {scene}."))
    }
}

/// All six mocks in one place.
#[derive(Debug)]
pub struct MockPorts {
    pub describer: MockDescriber,
    pub generator: MockGenerator,
    pub detector: MockDetector,
    pub region_verifier: MockRegionVerifier,
    pub text_verifier: MockTextVerifier,
    pub paraphraser: MockParaphraser,
}

impl MockPorts {
    pub fn new(text_verifier: MockTextVerifier) -> Self {
        Self {
            describer: MockDescriber::default(),
            generator: MockGenerator::default(),
            detector: MockDetector::default(),
            region_verifier: MockRegionVerifier::always(true),
            text_verifier,
            paraphraser: MockParaphraser,
        }
    }

    pub fn ports(&self) -> ServicePorts<'_> {
        ServicePorts::none()
            .with_describer(&self.describer)
            .with_generator(&self.generator)
            .with_detector(&self.detector)
            .with_region_verifier(&self.region_verifier)
            .with_text_verifier(&self.text_verifier)
            .with_paraphraser(&self.paraphraser)
    }
}

impl Default for MockPorts {
    fn default() -> Self {
        Self::new(MockTextVerifier::accept_all())
    }
}
