//! Bundled example partitions (see `fixtures/README.md` for their construction).

use crate::partition::{load_partition, PwaPartition};

pub const SAT1D_JSON: &str = include_str!("../fixtures/sat1d.json");
pub const GAIN2_JSON: &str = include_str!("../fixtures/gain2.json");
pub const BOX2_JSON: &str = include_str!("../fixtures/box2.json");
pub const TILES2_JSON: &str = include_str!("../fixtures/tiles2.json");

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 4] = ["sat1d", "gain2", "box2", "tiles2"];

fn load(json: &str) -> PwaPartition {
    load_partition(json.as_bytes()).expect("bundled fixture is valid")
}

/// Saturated identity on `[-5, 5]`.
pub fn sat1d() -> PwaPartition {
    load(SAT1D_JSON)
}

/// Two 1-D regions with gains 0.1 and 0.9 meeting at 0.
pub fn gain2() -> PwaPartition {
    load(GAIN2_JSON)
}

/// Two unit squares split by `x1 = 1`.
pub fn box2() -> PwaPartition {
    load(BOX2_JSON)
}

/// Six-region saturated feedback on `[-15, 15]^2` with heterogeneous gains.
pub fn tiles2() -> PwaPartition {
    load(TILES2_JSON)
}

/// `u = 0.5x` on `[-1, 1]`, a single region.
pub fn single1d() -> PwaPartition {
    load(r#"{"n":1,"m":1,"state_box":{"lo":[-1],"hi":[1]},
            "regions":[{"H":[[1],[-1]],"K":[1,1],"F":[[0.5]],"G":[0]}]}"#)
}

pub fn by_name(name: &str) -> Option<PwaPartition> {
    match name {
        "sat1d" => Some(sat1d()),
        "gain2" => Some(gain2()),
        "box2" => Some(box2()),
        "tiles2" => Some(tiles2()),
        _ => None,
    }
}
