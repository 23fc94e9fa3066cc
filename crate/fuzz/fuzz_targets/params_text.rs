#![no_main]
use libfuzzer_sys::fuzz_target;
use spectralkit::params::{deserialize, serialize};

// Whatever parses must print back to text that parses to the same tree.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(tree) = deserialize(text) {
        let again = deserialize(&serialize(&tree)).expect("printed tree parses");
        assert!(again.bit_eq(&tree));
    }
});
