//! Identifiers and small value types shared by every module.

use core::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident($inner:ty), $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }

        impl From<$inner> for $name {
            fn from(v: $inner) -> Self {
                Self(v)
            }
        }
    };
}

id_newtype!(
    /// A simulated process. Each process runs at most one transaction at a time.
    ProcessId(u32),
    "p"
);
id_newtype!(
    /// Transaction identifier. `TxId(0)` is the implicit initializing transaction.
    TxId(u64),
    "T"
);
id_newtype!(
    /// Base object identifier.
    ObjId(u32),
    "b"
);
id_newtype!(
    /// Transactional object (t-object) identifier.
    TObj(u32),
    "X"
);

impl TxId {
    /// The implicit transaction that wrote the initial value of every t-object.
    pub const INIT: TxId = TxId(0);
}

/// Contents of a base object.
///
/// Data objects hold a `[value, writer]` pair that is compared and swapped as a
/// unit. Metadata objects (locks, counters) leave `ver` at zero.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word {
    pub val: i64,
    pub ver: u64,
}

impl Word {
    pub const ZERO: Word = Word { val: 0, ver: 0 };

    pub const fn new(val: i64, ver: u64) -> Self {
        Word { val, ver }
    }

    pub const fn plain(val: i64) -> Self {
        Word { val, ver: 0 }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ver == 0 {
            write!(f, "{}", self.val)
        } else {
            write!(f, "[{},T{}]", self.val, self.ver)
        }
    }
}

/// Which code path a transaction runs on.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Path {
    /// Hardware transaction: cached primitives plus one cache-commit.
    Fast,
    /// Software transaction: direct primitives only.
    Slow,
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Path::Fast => "fast",
            Path::Slow => "slow",
        })
    }
}

/// Data/metadata classification of a base object, fixed at creation.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum ObjectKind {
    /// Member of the data partition of exactly one t-object.
    Data { tobj: TObj },
    Metadata,
}

impl ObjectKind {
    pub fn is_metadata(&self) -> bool {
        matches!(self, ObjectKind::Metadata)
    }
}
