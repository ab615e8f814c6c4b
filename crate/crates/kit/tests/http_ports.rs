//! The HTTP ports against a tiny in-process server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use bright_core::augment::{
    Describer, Detector, Generator, ImageRef, Paraphraser, RegionQuery, RegionVerifier, TextVerifier,
};
use bright_core::{BBox, HoiClass};
use bright_kit::http_ports::HttpPorts;
use serde_json::{json, Value};

type Seen = Arc<Mutex<Vec<(String, Value)>>>;

/// Serves `n` requests, answering each path from `reply` and recording the bodies.
fn serve(n: usize, reply: fn(&str) -> (u16, Value)) -> (String, Seen) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let seen: Seen = Arc::default();
    let log = seen.clone();
    thread::spawn(move || {
        for stream in listener.incoming().take(n) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
            let mut len = 0;
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                if h == "\r\n" || h.is_empty() {
                    break;
                }
                if let Some(v) = h.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock()
                .unwrap()
                .push((path.clone(), serde_json::from_slice(&body).unwrap_or(Value::Null)));
            let (status, v) = reply(&path);
            let text = v.to_string();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{text}",
                text.len()
            )
            .unwrap();
        }
    });
    (base, seen)
}

fn class() -> HoiClass {
    HoiClass::new(7, 1, 2, "ride", "horse")
}

#[test]
fn every_port_round_trips() {
    let (base, seen) = serve(6, |path| match path {
        "/describe" => (200, json!({"text": "A photo of a person riding a horse, on a beach."})),
        "/generate" => (200, json!({"image": "gen/1.png"})),
        "/detect" => (
            200,
            json!({"width": 100, "height": 80,
                   "persons": [[1, 1, 40, 70]],
                   "objects": [{"label": "horse", "bbox": [30, 20, 90, 75]}]}),
        ),
        "/verify_region" => (200, json!({"answer": "Yes, the person rides it."})),
        "/verify_text" => (200, json!({"yes": false})),
        _ => (200, json!({"text": "A person on horseback."})),
    });
    let ports = HttpPorts::new(&format!("{base}/"), Duration::from_secs(5));
    let img = ImageRef("ref.jpg".into());
    assert!(ports.describe(&img, &class(), "q", 1).unwrap().starts_with("A photo"));
    let gen = ports.generate("p", 2).unwrap();
    assert_eq!(gen, ImageRef("gen/1.png".into()));
    let det = ports.detect(&gen, "horse", 3).unwrap();
    assert_eq!(det.persons.len(), 1);
    assert_eq!(det.target_objects(&class()).count(), 1);
    let q = RegionQuery {
        image: gen.clone(),
        class: class(),
        human_box: BBox::new(1.0, 1.0, 40.0, 70.0),
        object_box: BBox::new(30.0, 20.0, 90.0, 75.0),
        prompt: "p".into(),
        seed: 4,
    };
    let ans = ports.verify_region(&q).unwrap();
    assert!(ans.yes);
    assert!(!ports.verify_text("d", &class(), "q", 5).unwrap());
    assert_eq!(ports.paraphrase("p", 6).unwrap(), "A person on horseback.");

    let seen = seen.lock().unwrap();
    let paths: Vec<&str> = seen.iter().map(|(p, _)| p.as_str()).collect();
    assert_eq!(
        paths,
        [
            "/describe",
            "/generate",
            "/detect",
            "/verify_region",
            "/verify_text",
            "/paraphrase"
        ]
    );
    assert_eq!(seen[0].1["class"]["verb"], "ride");
    assert_eq!(seen[2].1["object_query"], "horse");
    assert_eq!(seen[3].1["human_box"], json!([1.0, 1.0, 40.0, 70.0]));
    assert_eq!(seen[5].1["seed"], 6);
}

#[test]
fn server_errors_become_port_errors() {
    let (base, _) = serve(2, |path| match path {
        "/generate" => (500, json!({"error": "boom"})),
        _ => (200, json!({"answer": "maybe"})),
    });
    let ports = HttpPorts::new(&base, Duration::from_secs(5));
    let err = ports.generate("p", 1).unwrap_err();
    assert_eq!(err.port, "generate");
    let err = ports.verify_text("d", &class(), "q", 1).unwrap_err();
    assert_eq!(err.port, "verify_text");
    assert!(err.message.contains("maybe"));
}

#[test]
fn unreachable_service_is_a_port_error() {
    let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let ports = HttpPorts::new(&format!("http://{addr}"), Duration::from_secs(2));
    assert_eq!(ports.paraphrase("p", 1).unwrap_err().port, "paraphrase");
}
