#![no_main]
use libfuzzer_sys::fuzz_target;
use spectralkit::output::StdoutLine;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(parsed) = StdoutLine::parse(line) {
        let printed = parsed.to_string();
        let again = StdoutLine::parse(&printed).expect("printed line parses");
        assert_eq!(again.to_string(), printed);
    }
});
