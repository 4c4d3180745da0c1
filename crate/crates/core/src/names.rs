//! Deterministic two-word proper names for verification signals.
//!
//! The vocabulary is disjoint from the noise-log grammar (lowercase dotted
//! subsystems, hex ids), so a signal name can never appear in padding noise by
//! accident. That disjointness is what makes the verbatim signal audit sound.

use rand::Rng;

const FIRST: [&str; 24] = [
    "Amber", "Birchwood", "Cobalt", "Damson", "Elder", "Foxglove", "Garnet", "Harbor", "Iris",
    "Juniper", "Kestrel", "Larkspur", "Marble", "Nettle", "Oakhill", "Primrose", "Quartz",
    "Rowan", "Saffron", "Thistle", "Umber", "Verbena", "Willow", "Yarrow",
];

const SECOND: [&str; 24] = [
    "Annex", "Atrium", "Ballroom", "Conservatory", "Courtyard", "Gallery", "Garret", "Hall",
    "Kiosk", "Lodge", "Loft", "Mezzanine", "Orangery", "Pavilion", "Parlor", "Quay", "Rotunda",
    "Solarium", "Terrace", "Veranda", "Vestibule", "Wharf", "Windmill", "Yard",
];

pub fn pick_name<R: Rng>(rng: &mut R) -> String {
    let first = FIRST[rng.gen_range(0..FIRST.len())];
    let second = SECOND[rng.gen_range(0..SECOND.len())];
    format!("{first} {second}")
}

/// Picks a name guaranteed to differ from `avoid`. Used for decoy answers.
pub fn pick_name_distinct<R: Rng>(rng: &mut R, avoid: &str) -> String {
    loop {
        let candidate = pick_name(rng);
        if candidate != avoid {
            return candidate;
        }
    }
}
