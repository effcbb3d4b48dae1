use std::ffi::{c_char, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use hsigen_ffi::*;

const ROOM: &str = r#"
format = 1
units = "meters"

[floor]
min = [-2.5, -2.5]
max = [2.5, 2.5]

[[objects]]
id = "chair_0"
category = "chair"
position = [0.0, 0.0, 0.0]
rotation = [0.0, 0.0, 3.14159]

[[objects.primitives]]
shape = "box"
position = [0.0, 0.0, 0.225]
dimensions = [0.45, 0.45, 0.45]

[[objects.primitives]]
shape = "box"
position = [0.0, 0.2, 0.7]
dimensions = [0.45, 0.05, 0.5]

[[objects]]
id = "table_0"
category = "table"
position = [1.2, 0.0, 0.0]

[[objects.primitives]]
shape = "box"
position = [0.0, 0.0, 0.375]
dimensions = [0.8, 0.8, 0.75]
"#;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { hsigen_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|c| *c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn scene() -> *mut HsigenScene {
    let doc = CString::new(ROOM).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { hsigen_scene_new(doc.as_ptr(), &mut s) }, HsigenStatus::Ok);
    s
}

fn tiny_generator() -> *mut HsigenGenerator {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { hsigen_generator_new(3, true, &mut g) }, HsigenStatus::Ok);
    g
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let mut s = ptr::null_mut();
    let broken = CString::new("format = 2").unwrap();
    assert_eq!(unsafe { hsigen_scene_new(broken.as_ptr(), &mut s) }, HsigenStatus::Scene);
    assert!(s.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { hsigen_scene_new(ptr::null(), &mut s) }, HsigenStatus::NullPointer);
    let invalid = [0xffu8 as c_char, 0];
    let mut n = 0usize;
    assert_eq!(unsafe { hsigen_count_people(invalid.as_ptr(), &mut n) }, HsigenStatus::InvalidUtf8);
    let nothing = CString::new("").unwrap();
    assert_eq!(unsafe { hsigen_count_people(nothing.as_ptr(), &mut n) }, HsigenStatus::Parse);
    let two = CString::new("A man sits on the chair. A woman stands near the table.").unwrap();
    assert_eq!(unsafe { hsigen_count_people(two.as_ptr(), &mut n) }, HsigenStatus::Ok);
    assert_eq!(n, 2);
    assert!(last_error().is_empty());
}

#[test]
fn generate_and_export() {
    let (s, g) = (scene(), tiny_generator());
    let text = CString::new("a person sits on the chair").unwrap();
    let mut it = ptr::null_mut();
    assert_eq!(unsafe { hsigen_generate(g, s, text.as_ptr(), 0, &mut it) }, HsigenStatus::Ok, "{}", last_error());

    let mut count = 0usize;
    assert_eq!(unsafe { hsigen_interaction_vertices(it, ptr::null_mut(), 0, &mut count) }, HsigenStatus::Ok);
    assert_eq!(count, 642);
    let mut small = vec![0.0; 3];
    assert_eq!(unsafe { hsigen_interaction_vertices(it, small.as_mut_ptr(), 3, &mut count) }, HsigenStatus::OutOfRange);
    let mut xyz = vec![f64::NAN; 3 * count];
    assert_eq!(unsafe { hsigen_interaction_vertices(it, xyz.as_mut_ptr(), xyz.len(), &mut count) }, HsigenStatus::Ok);
    assert!(xyz.iter().all(|v| v.is_finite()));

    let (mut contact, mut free, mut total, mut accepted) = (-1.0, -1.0, -1.0, false);
    assert_eq!(unsafe { hsigen_interaction_scores(it, s, 0.02, &mut contact, &mut free) }, HsigenStatus::Ok);
    assert!((0.0..=1.0).contains(&contact) && (0.0..=1.0).contains(&free));
    assert_eq!(unsafe { hsigen_interaction_total_loss(it, &mut total) }, HsigenStatus::Ok);
    assert!(total >= 0.0);
    assert_eq!(unsafe { hsigen_interaction_accepted(it, &mut accepted) }, HsigenStatus::Ok);

    let dir = tempfile::tempdir().unwrap();
    let obj = CString::new(dir.path().join("body.obj").to_str().unwrap()).unwrap();
    let json = CString::new(dir.path().join("body.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { hsigen_interaction_write_obj(it, obj.as_ptr()) }, HsigenStatus::Ok);
    assert_eq!(unsafe { hsigen_interaction_write_json(it, json.as_ptr()) }, HsigenStatus::Ok);
    let obj_text = std::fs::read_to_string(dir.path().join("body.obj")).unwrap();
    assert_eq!(obj_text.lines().filter(|l| l.starts_with("v ")).count(), 642);
    let record: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("body.json")).unwrap()).unwrap();
    assert_eq!(record["accepted"].as_bool(), Some(accepted));

    unsafe {
        hsigen_interaction_free(it);
        hsigen_generator_free(g);
        hsigen_scene_free(s);
    }
}

#[test]
fn unbound_object_is_a_match_error() {
    let (s, g) = (scene(), tiny_generator());
    let text = CString::new("a person stands by the window").unwrap();
    let mut it = ptr::null_mut();
    assert_eq!(unsafe { hsigen_generate(g, s, text.as_ptr(), 0, &mut it) }, HsigenStatus::Match);
    assert!(it.is_null());
    unsafe {
        hsigen_generator_free(g);
        hsigen_scene_free(s);
    }
}

#[test]
fn mhsi_handles() {
    let (s, g) = (scene(), tiny_generator());
    let text = CString::new("A man sits on the chair. A woman stands near the table.").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hsigen_mhsi(g, s, text.as_ptr(), 1, &mut m) }, HsigenStatus::Ok, "{}", last_error());
    let mut n = 0usize;
    assert_eq!(unsafe { hsigen_mhsi_len(m, &mut n) }, HsigenStatus::Ok);
    assert!(n <= 2);
    let mut it = ptr::null_mut();
    assert_eq!(unsafe { hsigen_mhsi_get(m, n, &mut it) }, HsigenStatus::OutOfRange);
    if n > 0 {
        assert_eq!(unsafe { hsigen_mhsi_get(m, 0, &mut it) }, HsigenStatus::Ok);
        unsafe { hsigen_interaction_free(it) };
    }
    unsafe {
        hsigen_mhsi_free(m);
        hsigen_generator_free(g);
        hsigen_scene_free(s);
    }
}

#[test]
fn free_accepts_null() {
    unsafe {
        hsigen_scene_free(ptr::null_mut());
        hsigen_generator_free(ptr::null_mut());
        hsigen_interaction_free(ptr::null_mut());
        hsigen_mhsi_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hsigen.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["hsigen_generate", "hsigen_last_error", "HSIGEN_STATUS_MATCH", "typedef struct HsigenScene HsigenScene"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(&src, "#include \"hsigen.h\"\nint main(void) { HsigenScene *s = 0; return hsigen_scene_new(\"\", &s) == HSIGEN_STATUS_OK; }\n")
        .unwrap();
    match Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(header.parent().unwrap()).arg(&src).status() {
        Ok(status) => assert!(status.success()),
        Err(e) => eprintln!("no C compiler, skipping the compile step: {e}"),
    }
}
