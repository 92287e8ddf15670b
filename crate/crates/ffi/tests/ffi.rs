use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use genrelab::audio::{encode_wav, synthesize, Partial, SynthSpec};
use genrelab::classify::train_all;
use genrelab::features::N_FEATURES;
use genrelab::Genre;
use genrelab_ffi::*;

fn bundle_file(dir: &Path) -> PathBuf {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for g in Genre::ALL {
        for j in 0..3 {
            rows.push((0..N_FEATURES).map(|i| (g.code() * 10 + (i % 5) + j) as f64).collect());
            labels.push(g);
        }
    }
    let path = dir.join("model.bundle.json");
    train_all(&rows, &labels, 4).unwrap().save(&path).unwrap();
    path
}

fn tone(seconds: f64) -> genrelab::audio::AudioClip {
    let spec = SynthSpec {
        genre: Genre::Blues,
        tempo_bpm: Some(96.0),
        harmonic_profile: vec![Partial { freq_hz: 196.0, amplitude: 1.0 }, Partial { freq_hz: 392.0, amplitude: 0.5 }],
        noise_level: 0.02,
        duration_s: seconds,
        sample_rate: 16000,
    };
    synthesize(&spec, 8).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(gl_last_error_message()) }.to_string_lossy().into_owned()
}

fn load(path: &Path) -> *mut GlBundle {
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { gl_bundle_load(c.as_ptr(), &mut b) }, GlStatus::Ok, "{}", last_error());
    b
}

#[test]
fn classify_wav_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = load(&bundle_file(dir.path()));
    let wav = encode_wav(&tone(5.0));
    let mut report = ptr::null_mut();
    let status = unsafe { gl_classify_wav(bundle, wav.as_ptr(), wav.len(), &mut report) };
    assert_eq!(status, GlStatus::Ok, "{}", last_error());

    let mut consensus = [0.0; 11];
    assert_eq!(unsafe { gl_report_consensus(report, consensus.as_mut_ptr(), 11) }, GlStatus::Ok);
    assert!((consensus.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let mut mean = [0.0; 11];
    for code in 0..5u32 {
        let mut probs = [0.0; 11];
        assert_eq!(unsafe { gl_report_algorithm(report, code, probs.as_mut_ptr(), 11) }, GlStatus::Ok);
        for (m, p) in mean.iter_mut().zip(probs) {
            *m += p / 5.0;
        }
    }
    for (a, b) in mean.iter().zip(consensus) {
        assert!((a - b).abs() < 1e-12);
    }
    let mut probs = [0.0; 11];
    assert_eq!(unsafe { gl_report_algorithm(report, 7, probs.as_mut_ptr(), 11) }, GlStatus::OutOfRange);
    assert_eq!(unsafe { gl_report_consensus(report, probs.as_mut_ptr(), 10) }, GlStatus::OutOfRange);

    let (mut top, mut confidence) = (usize::MAX, 0.0);
    assert_eq!(unsafe { gl_report_top(report, &mut top, &mut confidence) }, GlStatus::Ok);
    assert!(top < gl_genre_count());
    assert_eq!(confidence, consensus[top]);

    let (mut bpm, mut has) = (0.0, false);
    assert_eq!(unsafe { gl_report_tempo(report, &mut bpm, &mut has) }, GlStatus::Ok);
    assert!(has && (bpm - 96.0).abs() < 3.0, "{bpm}");

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { gl_report_to_json(report, &mut json) }, GlStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { gl_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["per_algorithm"].as_object().unwrap().len(), 5);

    unsafe {
        gl_report_free(report);
        gl_bundle_free(bundle);
    }
}

#[test]
fn samples_and_features() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = load(&bundle_file(dir.path()));
    let clip = tone(4.0);
    let mut report = ptr::null_mut();
    let status =
        unsafe { gl_classify_samples(bundle, clip.samples().as_ptr(), clip.len(), clip.sample_rate(), &mut report) };
    assert_eq!(status, GlStatus::Ok, "{}", last_error());
    unsafe { gl_report_free(report) };

    let mut fv = vec![0.0; gl_feature_count()];
    let status =
        unsafe { gl_extract_features(clip.samples().as_ptr(), clip.len(), clip.sample_rate(), fv.as_mut_ptr(), fv.len()) };
    assert_eq!(status, GlStatus::Ok);
    assert!((fv[N_FEATURES - 1] - 96.0).abs() < 3.0);

    let short = tone(1.0);
    let status =
        unsafe { gl_extract_features(short.samples().as_ptr(), short.len(), 16000, fv.as_mut_ptr(), fv.len()) };
    assert_eq!(status, GlStatus::TooShort);
    assert!(last_error().contains("at least 3 s"), "{}", last_error());
    unsafe { gl_bundle_free(bundle) };
}

#[test]
fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = ptr::null_mut();
    let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { gl_bundle_load(missing.as_ptr(), &mut b) }, GlStatus::Io);
    assert!(b.is_null());
    assert_eq!(unsafe { gl_bundle_load(ptr::null(), &mut b) }, GlStatus::NullPointer);

    let future = CString::new(r#"{"schema_version": 2}"#).unwrap();
    assert_eq!(unsafe { gl_bundle_from_json(future.as_ptr(), &mut b) }, GlStatus::SchemaVersionMismatch);
    let garbage = CString::new("{not json").unwrap();
    assert_eq!(unsafe { gl_bundle_from_json(garbage.as_ptr(), &mut b) }, GlStatus::CorruptBundle);

    let bundle = load(&bundle_file(dir.path()));
    let mut report = ptr::null_mut();
    let junk = b"definitely not audio";
    let status = unsafe { gl_classify_wav(bundle, junk.as_ptr(), junk.len(), &mut report) };
    assert_eq!(status, GlStatus::MalformedAudio);
    assert!(report.is_null());
    assert_eq!(unsafe { gl_classify_wav(ptr::null(), junk.as_ptr(), 3, &mut report) }, GlStatus::NullPointer);
    unsafe {
        gl_bundle_free(bundle);
        gl_bundle_free(ptr::null_mut());
        gl_report_free(ptr::null_mut());
        gl_string_free(ptr::null_mut());
    }
}

const C_SMOKE: &str = r#"
#include <stdio.h>
#include <string.h>
#include "genrelab.h"

int main(int argc, char **argv) {
    if (gl_genre_count() != 11 || strcmp(gl_genre_name(5), "Hip-hop") != 0) return 10;
    if (gl_genre_name(11) != NULL) return 11;
    GlBundle *bundle = NULL;
    if (gl_bundle_load(argv[1], &bundle) != GL_STATUS_OK) {
        fprintf(stderr, "%s\n", gl_last_error_message());
        return 12;
    }
    GlReport *report = NULL;
    const unsigned char junk[4] = {1, 2, 3, 4};
    if (gl_classify_wav(bundle, junk, sizeof junk, &report) != GL_STATUS_MALFORMED_AUDIO) return 13;
    if (strlen(gl_last_error_message()) == 0) return 14;
    gl_bundle_free(bundle);
    printf("ok %d\n", (int)GL_ALGORITHM_MLP);
    return 0;
}
"#;

/// Compiles a C program against the generated header and links the static
/// library. Skipped when no C compiler is on PATH.
#[test]
fn c_header_compiles_and_links() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler ({cc})");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, C_SMOKE).unwrap();
    // target/<profile>/deps/ffi-<hash> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libgenrelab_ffi.a");
    assert!(lib.is_file(), "static library not built at {}", lib.display());
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let bin = dir.path().join("smoke");
    let out = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).arg(bundle_file(dir.path())).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout), "ok 4\n");
}
