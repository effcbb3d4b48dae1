use hsigen::body::{assign_contact_labels, body_mesh};
use hsigen::pipeline::{read_dataset, synth_dataset, write_dataset, PoseKind, SynthConfig};
use hsigen::pla::ActionMention;
use hsigen::textparse::parse_description;

fn hundred(seed: u64) -> Vec<hsigen::pipeline::SynthSample> {
    synth_dataset(&SynthConfig { samples: 100, ..Default::default() }, seed).unwrap()
}

#[test]
fn every_description_parses_to_one_person() {
    let data = hundred(3);
    assert_eq!(data.len(), 100);
    for s in &data {
        let people = parse_description(&s.text).unwrap_or_else(|e| panic!("{}: {e}", s.text));
        assert_eq!(people.len(), 1, "{}", s.text);
    }
}

#[test]
fn same_seed_same_data() {
    let (a, b) = (hundred(9), hundred(9));
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((&x.text, &x.params, &x.target), (&y.text, &y.params, &y.target));
    }
    assert_ne!(a.iter().map(|s| &s.text).collect::<Vec<_>>(), hundred(10).iter().map(|s| &s.text).collect::<Vec<_>>());
}

#[test]
fn sitters_rest_on_their_seat() {
    let labels = assign_contact_labels(&[ActionMention::new("sit")]).unwrap();
    let mut sitters = 0;
    for s in hundred(5).iter().filter(|s| s.pose == PoseKind::Sit) {
        sitters += 1;
        let mesh = body_mesh(&s.params).unwrap().with_contact(labels.clone());
        let seat = s.scene.object(&s.target).unwrap();
        let closest = mesh.contact_vertices().map(|v| seat.sdf(v).abs()).fold(f64::INFINITY, f64::min);
        let lowest = mesh.contact_vertices().map(|v| seat.sdf(v)).fold(f64::INFINITY, f64::min);
        assert!(closest <= 0.01, "{}: seat region {closest} m from {}", s.text, s.target);
        assert!(lowest > -0.01, "{}: seat region {lowest} m inside {}", s.text, s.target);
    }
    assert!(sitters >= 10, "only {sitters} sitters");
}

#[test]
fn jsonl_round_trip() {
    let data = hundred(2);
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf).unwrap();
    assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), data.len());
    let back = read_dataset(buf.as_slice()).unwrap();
    assert_eq!(back.len(), data.len());
    for (x, y) in data.iter().zip(&back) {
        assert_eq!((x.template, x.pose, &x.target, &x.text, &x.params), (y.template, y.pose, &y.target, &y.text, &y.params));
        assert_eq!(x.scene.objects.len(), y.scene.objects.len());
        let p = hsigen::geom::Vec3::new(0.1, 0.2, 0.3);
        assert!((x.scene.sdf(&p) - y.scene.sdf(&p)).abs() < 1e-12);
    }
    assert!(read_dataset("{not json}\n".as_bytes()).is_err());
}
