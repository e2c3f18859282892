//! Basis indices.

use std::fmt;
use std::str::FromStr;

/// A basis index: a positive integer `n`, optionally tagged with a
/// ramification label. Abstract structures use plain integers; structures
/// built from local curve data carry one label per ramification point.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Idx {
    pub label: Option<String>,
    pub n: u32,
}

impl Idx {
    pub fn plain(n: u32) -> Self {
        assert!(n >= 1, "index must be >= 1");
        Idx { label: None, n }
    }

    pub fn labeled(label: impl Into<String>, n: u32) -> Self {
        assert!(n >= 1, "index must be >= 1");
        Idx {
            label: Some(label.into()),
            n,
        }
    }

    pub fn with_n(&self, n: u32) -> Self {
        Idx {
            label: self.label.clone(),
            n,
        }
    }

    pub fn is_odd(&self) -> bool {
        self.n % 2 == 1
    }
}

impl fmt::Display for Idx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            Some(l) => write!(f, "{}:{}", l, self.n),
            None => write!(f, "{}", self.n),
        }
    }
}

impl fmt::Debug for Idx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Parse `7` or `label:7`. Labels may not contain `:` or whitespace.
impl FromStr for Idx {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (label, num) = match s.rsplit_once(':') {
            Some((l, n)) => {
                if l.is_empty() || l.contains(char::is_whitespace) {
                    return Err(format!("bad index label in {s:?}"));
                }
                (Some(l.to_string()), n)
            }
            None => (None, s),
        };
        let n: u32 = num.parse().map_err(|e| format!("bad index {s:?}: {e}"))?;
        if n == 0 {
            return Err(format!("index must be >= 1, got {s:?}"));
        }
        Ok(Idx { label, n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_and_parse() {
        let a = Idx::plain(3);
        let b = Idx::labeled("a", 1);
        assert!(a < b); // unlabeled sorts first
        assert_eq!("a:1".parse::<Idx>().unwrap(), b);
        assert_eq!("3".parse::<Idx>().unwrap(), a);
        assert!("0".parse::<Idx>().is_err());
        assert!(":1".parse::<Idx>().is_err());
    }
}
