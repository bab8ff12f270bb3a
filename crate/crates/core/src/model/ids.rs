use std::fmt;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

id_type!(
    /// Identifier of an ordinary peer (`PID`).
    PeerId
);
id_type!(
    /// Identifier of a super-peer.
    SuperPeerId
);
id_type!(
    /// Identifier of a super-super-peer group.
    SspId
);

impl SspId {
    /// The id a group receives when `seed` founds it: `SP3` becomes `SSP3`,
    /// any other id gets an `SSP-` prefix.
    pub fn founded_by(seed: &SuperPeerId) -> Self {
        match seed.as_str().strip_prefix("SP") {
            Some(rest) => SspId(format!("SSP{rest}")),
            None => SspId(format!("SSP-{seed}")),
        }
    }
}

/// Zero-padded ids so that lexicographic and numeric order agree.
pub(crate) fn padded(prefix: &str, index: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len();
    format!("{prefix}{index:0width$}")
}
