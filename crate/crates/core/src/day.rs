use core::fmt;
use core::ops::{Add, Sub};

/// A UTC calendar day, counted from 1970-01-01.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Day(pub i32);

impl Day {
    pub const fn new(days_since_epoch: i32) -> Self {
        Day(days_since_epoch)
    }

    pub const fn index(self) -> i32 {
        self.0
    }
}

impl Add<i32> for Day {
    type Output = Day;

    fn add(self, rhs: i32) -> Day {
        Day(self.0 + rhs)
    }
}

impl Sub<i32> for Day {
    type Output = Day;

    fn sub(self, rhs: i32) -> Day {
        Day(self.0 - rhs)
    }
}

/// Number of days between two days.
impl Sub<Day> for Day {
    type Output = i32;

    fn sub(self, rhs: Day) -> i32 {
        self.0 - rhs.0
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "day {}", self.0)
    }
}
