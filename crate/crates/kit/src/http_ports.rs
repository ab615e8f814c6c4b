//! JSON-over-HTTP clients for the augmentation service ports.
//!
//! Each port is a `POST {base}/{port}` whose request body mirrors the port
//! signature:
//!
//! | port              | request                                   | response                              |
//! |-------------------|-------------------------------------------|---------------------------------------|
//! | `describe`        | `image`, `class`, `query`, `seed`         | `text`                                |
//! | `generate`        | `prompt`, `seed`                          | `image`                               |
//! | `detect`          | `image`, `object_query`, `seed`           | `width`, `height`, `persons`, `objects` |
//! | `verify_region`   | `image`, `class`, `human_box`, `object_box`, `prompt`, `seed` | `yes` + `description`, or `answer` |
//! | `verify_text`     | `description`, `class`, `query`, `seed`   | `yes`, or `answer`                    |
//! | `paraphrase`      | `prompt`, `seed`                          | `text`                                |
//!
//! Free-text `answer` fields are read as yes/no from their first word.

use std::time::Duration;

use bright_core::augment::prompt::parse_yes_no;
use bright_core::augment::{
    Describer, Detections, Detector, Generator, ImageRef, Paraphraser, PortError, PortResult, RegionAnswer,
    RegionQuery, RegionVerifier, ServicePorts, TextVerifier,
};
use bright_core::HoiClass;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub struct HttpPorts {
    agent: ureq::Agent,
    base: String,
}

impl HttpPorts {
    pub fn new(base: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            agent,
            base: base.trim_end_matches('/').to_string(),
        }
    }

    pub fn ports(&self) -> ServicePorts<'_> {
        ServicePorts::none()
            .with_describer(self)
            .with_generator(self)
            .with_detector(self)
            .with_region_verifier(self)
            .with_text_verifier(self)
            .with_paraphraser(self)
    }

    fn call<T: DeserializeOwned>(&self, port: &'static str, body: serde_json::Value) -> PortResult<T> {
        let url = format!("{}/{port}", self.base);
        log::debug!("POST {url}");
        let err = |e: ureq::Error| PortError::new(port, e.to_string());
        self.agent
            .post(&url)
            .send_json(&body)
            .map_err(err)?
            .body_mut()
            .read_json::<T>()
            .map_err(err)
    }
}

#[derive(Deserialize)]
struct TextReply {
    text: String,
}

#[derive(Deserialize)]
struct ImageReply {
    image: String,
}

#[derive(Deserialize)]
struct VerdictReply {
    yes: Option<bool>,
    answer: Option<String>,
    description: Option<String>,
}

impl VerdictReply {
    fn verdict(&self, port: &'static str) -> PortResult<bool> {
        if let Some(y) = self.yes {
            return Ok(y);
        }
        let answer = self.answer.as_deref().unwrap_or_default();
        parse_yes_no(answer).ok_or_else(|| PortError::new(port, format!("no yes/no verdict in {answer:?}")))
    }
}

#[derive(Serialize)]
struct ClassBody<'a> {
    class_id: u32,
    verb: &'a str,
    object: &'a str,
}

fn class_body(c: &HoiClass) -> ClassBody<'_> {
    ClassBody {
        class_id: c.class_id,
        verb: &c.verb_name,
        object: &c.object_name,
    }
}

impl Describer for HttpPorts {
    fn describe(&self, image: &ImageRef, class: &HoiClass, query: &str, seed: u64) -> PortResult<String> {
        let r: TextReply = self.call(
            "describe",
            json!({"image": image, "class": class_body(class), "query": query, "seed": seed}),
        )?;
        Ok(r.text)
    }
}

impl Generator for HttpPorts {
    fn generate(&self, prompt: &str, seed: u64) -> PortResult<ImageRef> {
        let r: ImageReply = self.call("generate", json!({"prompt": prompt, "seed": seed}))?;
        Ok(ImageRef(r.image))
    }
}

impl Detector for HttpPorts {
    fn detect(&self, image: &ImageRef, object_query: &str, seed: u64) -> PortResult<Detections> {
        self.call(
            "detect",
            json!({"image": image, "object_query": object_query, "seed": seed}),
        )
    }
}

impl RegionVerifier for HttpPorts {
    fn verify_region(&self, q: &RegionQuery) -> PortResult<RegionAnswer> {
        let r: VerdictReply = self.call(
            "verify_region",
            json!({
                "image": q.image,
                "class": class_body(&q.class),
                "human_box": q.human_box,
                "object_box": q.object_box,
                "prompt": q.prompt,
                "seed": q.seed,
            }),
        )?;
        let yes = r.verdict("verify_region")?;
        let description = r.description.or(r.answer).unwrap_or_default();
        Ok(RegionAnswer { yes, description })
    }
}

impl TextVerifier for HttpPorts {
    fn verify_text(&self, description: &str, class: &HoiClass, query: &str, seed: u64) -> PortResult<bool> {
        let r: VerdictReply = self.call(
            "verify_text",
            json!({"description": description, "class": class_body(class), "query": query, "seed": seed}),
        )?;
        r.verdict("verify_text")
    }
}

impl Paraphraser for HttpPorts {
    fn paraphrase(&self, prompt: &str, seed: u64) -> PortResult<String> {
        let r: TextReply = self.call("paraphrase", json!({"prompt": prompt, "seed": seed}))?;
        Ok(r.text)
    }
}
