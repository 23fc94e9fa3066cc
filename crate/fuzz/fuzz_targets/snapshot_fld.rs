#![no_main]
use libfuzzer_sys::fuzz_target;
use spectralkit::output::{Snapshot, SnapshotHeader};
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    let path = Path::new("fuzz.fld");
    let _ = SnapshotHeader::decode(data, path);
    if let Ok(snap) = Snapshot::from_bytes(data, path) {
        let bytes = snap.to_bytes();
        let again = Snapshot::from_bytes(&bytes, path).expect("encoded snapshot decodes");
        assert_eq!(again.to_bytes(), bytes);
    }
});
