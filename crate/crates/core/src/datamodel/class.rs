use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub const N_CLASSES: usize = 7;

/// The six anticyclonic circulation types plus the residual class.
///
/// Integer indices are stable and follow the column order of the reported
/// confusion tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassId {
    /// Zonal ridge across Central Europe.
    Bm = 0,
    /// Norwegian Sea-Iceland high, anticyclonic.
    Hna = 1,
    /// Fennoscandian high, anticyclonic.
    Hfa = 2,
    /// North-easterly anticyclonic.
    Nea = 3,
    /// South-easterly anticyclonic.
    Sea = 4,
    /// Norwegian Sea-Fennoscandian high, anticyclonic.
    Hnfa = 5,
    /// Every other catalog type.
    Res = 6,
}

impl ClassId {
    pub const ALL: [ClassId; N_CLASSES] = [
        ClassId::Bm,
        ClassId::Hna,
        ClassId::Hfa,
        ClassId::Nea,
        ClassId::Sea,
        ClassId::Hnfa,
        ClassId::Res,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<ClassId> {
        Self::ALL.get(index).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            ClassId::Bm => "BM",
            ClassId::Hna => "HNA",
            ClassId::Hfa => "HFA",
            ClassId::Nea => "NEA",
            ClassId::Sea => "SEA",
            ClassId::Hnfa => "HNFA",
            ClassId::Res => "RES",
        }
    }

    /// Column label used in report tables.
    pub fn table_label(self) -> &'static str {
        match self {
            ClassId::Res => "Residual",
            other => other.code(),
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ClassId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassId::ALL
            .iter()
            .copied()
            .find(|c| c.code() == s)
            .ok_or_else(|| Error::invalid(format!("unknown class code {s:?}")))
    }
}
