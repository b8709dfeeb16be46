use std::ffi::{c_char, CStr, CString};
use std::ptr;

use stepcheck_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    stepcheck_string_free(s);
    out
}

fn last_error() -> String {
    let p = stepcheck_last_error();
    assert!(!p.is_null(), "no error recorded");
    unsafe { CStr::from_ptr(p).to_str().unwrap().to_string() }
}

#[test]
fn metrics_hand_case() {
    let mut m = StepcheckMetrics::default();
    let status = unsafe { stepcheck_metrics(2, 1, 1, 0, &mut m) };
    assert_eq!(status, StepcheckStatus::Ok);
    assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
    assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    let status = unsafe { stepcheck_metrics(0, 0, 0, 4, &mut m) };
    assert_eq!(status, StepcheckStatus::Ok);
    assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    assert_eq!(unsafe { stepcheck_metrics(1, 1, 1, 1, ptr::null_mut()) }, StepcheckStatus::NullArgument);
}

#[test]
fn predicate_as_json() {
    let mut out = ptr::null_mut();
    let text = c("Genre(Superdrag, rock) ::: Verify Superdrag is a rock band");
    assert_eq!(unsafe { stepcheck_parse_predicate(text.as_ptr(), &mut out) }, StepcheckStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&unsafe { take(out) }).unwrap();
    assert_eq!(v["verb"], "Genre");
    assert_eq!(v["arguments"], serde_json::json!(["Superdrag", "rock"]));
    assert_eq!(v["instruction"], "Verify Superdrag is a rock band");

    let bad = c("no parentheses here");
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { stepcheck_parse_predicate(bad.as_ptr(), &mut out) }, StepcheckStatus::ParseError);
    assert!(out.is_null());
    assert!(last_error().contains("parenthesis"));
}

#[test]
fn verdict_and_explanation() {
    let text = c("The claim is [REFUTED].\nExplanation: Trials found no effect.");
    let mut verdict = StepcheckVerdict::Supported;
    let mut explanation = ptr::null_mut();
    assert_eq!(
        unsafe { stepcheck_parse_verdict(text.as_ptr(), &mut verdict, &mut explanation) },
        StepcheckStatus::Ok
    );
    assert_eq!(verdict, StepcheckVerdict::Refuted);
    assert_eq!(unsafe { take(explanation) }, "Trials found no effect.");
    // explanation is optional
    assert_eq!(unsafe { stepcheck_parse_verdict(text.as_ptr(), &mut verdict, ptr::null_mut()) }, StepcheckStatus::Ok);
    let none = c("I am not sure.");
    assert_eq!(unsafe { stepcheck_parse_verdict(none.as_ptr(), &mut verdict, ptr::null_mut()) }, StepcheckStatus::ParseError);
}

#[test]
fn bad_arguments_are_reported() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { stepcheck_parse_predicate(ptr::null(), &mut out) }, StepcheckStatus::NullArgument);
    assert_eq!(last_error(), "text is NULL");
    let invalid = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { stepcheck_parse_predicate(invalid.as_ptr().cast(), &mut out) },
        StepcheckStatus::InvalidUtf8
    );
    // A later success clears the message.
    let mut m = StepcheckMetrics::default();
    assert_eq!(unsafe { stepcheck_metrics(1, 0, 0, 0, &mut m) }, StepcheckStatus::Ok);
    assert!(stepcheck_last_error().is_null());
}

#[test]
fn config_setters_and_fingerprint() {
    let config = stepcheck_config_new();
    let mut fp = ptr::null_mut();
    assert_eq!(unsafe { stepcheck_config_fingerprint(config, &mut fp) }, StepcheckStatus::Ok);
    // same value as the default configuration in the core crate
    assert_eq!(unsafe { take(fp) }, stepcheck::RunConfig::default().fingerprint());

    unsafe {
        assert_eq!(stepcheck_config_set_source(config, c("internal").as_ptr()), StepcheckStatus::Ok);
        assert_eq!(stepcheck_config_set_predicate_mode(config, true), StepcheckStatus::Ok);
        assert_eq!(stepcheck_config_set_source(config, c("dreams").as_ptr()), StepcheckStatus::InvalidArgument);
        assert_eq!(stepcheck_config_set_max_questions(config, 0), StepcheckStatus::InvalidArgument);
        assert_eq!(stepcheck_config_set_model(config, c("  ").as_ptr()), StepcheckStatus::InvalidArgument);
        let mut fp = ptr::null_mut();
        assert_eq!(stepcheck_config_fingerprint(config, &mut fp), StepcheckStatus::Ok);
        let expected = stepcheck::RunConfig {
            source_kind: stepcheck::SourceKind::Internal,
            predicate_mode: true,
            ..Default::default()
        };
        assert_eq!(take(fp), expected.fingerprint());
        stepcheck_config_free(config);
        stepcheck_config_free(ptr::null_mut());
    }
}

#[test]
fn config_from_json() {
    let mut config = ptr::null_mut();
    let json = c(r#"{"max_questions": 3, "source_kind": "Internal"}"#);
    assert_eq!(unsafe { stepcheck_config_from_json(json.as_ptr(), &mut config) }, StepcheckStatus::Ok);
    unsafe { stepcheck_config_free(config) };
    let zero = c(r#"{"max_questions": 0}"#);
    let mut config = ptr::null_mut();
    assert_eq!(unsafe { stepcheck_config_from_json(zero.as_ptr(), &mut config) }, StepcheckStatus::InvalidArgument);
    assert!(config.is_null());
    let broken = c("{");
    assert_eq!(unsafe { stepcheck_config_from_json(broken.as_ptr(), &mut config) }, StepcheckStatus::InvalidArgument);
}

const SCRIPT: &str = r#"[
  "Question = Can honey cure the common cold?",
  "Honey eases coughs but does not cure colds.",
  "Prediction = Yes, we can know.",
  "The claim is [REFUTED].\nExplanation: Honey only relieves symptoms."
]"#;

const SEARCH: &str = r#"{"Can honey cure the common cold?": [
  {"title": "Honey and colds", "url": "https://evidence.example/1", "snippet": "Honey may ease coughs."}
]}"#;

#[test]
fn scripted_verification() {
    let config = stepcheck_config_new();
    let mut engine = ptr::null_mut();
    let status = unsafe { stepcheck_engine_new_scripted(config, c(SCRIPT).as_ptr(), c(SEARCH).as_ptr(), &mut engine) };
    assert_eq!(status, StepcheckStatus::Ok);
    let mut out = ptr::null_mut();
    let status = unsafe {
        stepcheck_engine_verify(engine, c("honey").as_ptr(), c("Honey can cure a common cold.").as_ptr(), &mut out)
    };
    assert_eq!(status, StepcheckStatus::Ok);
    let trace = stepcheck::VerificationTrace::from_record(&unsafe { take(out) }).unwrap();
    assert_eq!(trace.verdict, stepcheck::Verdict::Refuted);
    assert_eq!(trace.steps.len(), 1);
    assert_eq!(trace.steps[0].snippets.len(), 1);
    assert_eq!(trace.explanation, "Honey only relieves symptoms.");

    // The shared script is used up now: the next claim aborts.
    let mut out = ptr::null_mut();
    let status = unsafe { stepcheck_engine_verify(engine, c("again").as_ptr(), c("Honey again.").as_ptr(), &mut out) };
    assert_eq!(status, StepcheckStatus::Aborted);
    assert!(out.is_null());
    assert!(last_error().contains("again"));

    let status = unsafe { stepcheck_engine_verify(engine, c("x").as_ptr(), c("   ").as_ptr(), &mut out) };
    assert_eq!(status, StepcheckStatus::InvalidArgument);
    unsafe {
        stepcheck_engine_free(engine);
        stepcheck_config_free(config);
    }
}

#[test]
fn bad_script_is_rejected() {
    let config = stepcheck_config_new();
    let mut engine = ptr::null_mut();
    let status = unsafe { stepcheck_engine_new_scripted(config, c("[1, 2]").as_ptr(), ptr::null(), &mut engine) };
    assert_eq!(status, StepcheckStatus::InvalidArgument);
    assert!(engine.is_null());
    unsafe { stepcheck_config_free(config) };
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(stepcheck_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
