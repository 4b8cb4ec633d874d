// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use tcforge::model::Bytes;

fuzz_target!(|data: &[u8]| {
    if let Ok(b) = serde_json::from_slice::<Bytes>(data) {
        let text = serde_json::to_string(&b).unwrap();
        assert_eq!(serde_json::from_str::<Bytes>(&text).unwrap(), b);
    }
    // Every byte string survives a round trip.
    let b = Bytes(data.to_vec());
    let text = serde_json::to_string(&b).unwrap();
    assert_eq!(serde_json::from_str::<Bytes>(&text).unwrap(), b);
});
