//! Usage observations and their per-app aggregation.
//!
//! A [`Dataset`] interns app and user identifiers into dense indices (assigned
//! in lexicographic order of the identifier) and keeps one [`Record`] per
//! distinct `(app, day, user)` triple, sorted in that order. Every per-app
//! query is therefore a contiguous slice.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::day::Day;
use crate::error::{Error, Result};

/// Dense index of an app inside a [`Dataset`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AppId(pub u32);

/// Dense index of a user inside a [`Dataset`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub u32);

impl AppId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl UserId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One observation with string identifiers, as read from an event log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UsageRecord {
    pub user: String,
    pub app: String,
    pub day: Day,
}

/// Interned observation. Field order is the dataset sort order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Record {
    pub app: AppId,
    pub day: Day,
    pub user: UserId,
}

/// Leaf category of each app. An app has at most one category.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CategoryMap {
    entries: BTreeMap<String, String>,
}

impl CategoryMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assigns `category` to `app`. Re-assigning the same category is a no-op.
    pub fn insert(&mut self, app: &str, category: &str) -> Result<()> {
        if app.is_empty() {
            return Err(Error::EmptyId("app"));
        }
        if category.is_empty() {
            return Err(Error::EmptyId("category"));
        }
        match self.entries.get(app) {
            Some(existing) if existing != category => Err(Error::CategoryConflict {
                app: app.to_string(),
                first: existing.clone(),
                second: category.to_string(),
            }),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(app.to_string(), category.to_string());
                Ok(())
            }
        }
    }

    pub fn get(&self, app: &str) -> Option<&str> {
        self.entries.get(app).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(a, c)| (a.as_str(), c.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Distinct-user counts of one app for each day from its first to its last
/// observed day. A zero count marks a day without observations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DailySeries {
    pub app_id: String,
    pub start: Day,
    pub counts: Vec<u32>,
}

impl DailySeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn is_missing(&self, i: usize) -> bool {
        self.counts[i] == 0
    }

    pub fn max_count(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

/// First and last observed day of one user for one app.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct UserSpan {
    pub user: UserId,
    pub app: AppId,
    pub first: Day,
    pub last: Day,
    /// Number of distinct days with an observation.
    pub active_days: u32,
}

impl UserSpan {
    /// `last - first`, in days.
    pub fn length(&self) -> i32 {
        self.last - self.first
    }
}

/// Validated, deduplicated and immutable collection of usage records.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    apps: Vec<String>,
    users: Vec<String>,
    records: Vec<Record>,
    app_offsets: Vec<usize>,
    window_start: Day,
    window_end: Day,
    categories: CategoryMap,
}

impl Dataset {
    /// Assembles a dataset from identifier tables and records that index into
    /// them. Identifiers must be unique and non-empty; tables are re-sorted
    /// lexicographically and records remapped, sorted and deduplicated.
    /// Without an explicit `window` it is inferred as `[min day, max day]`.
    pub fn from_parts(
        apps: Vec<String>,
        users: Vec<String>,
        mut records: Vec<Record>,
        categories: CategoryMap,
        window: Option<(Day, Day)>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::NoRecords);
        }
        let (apps, app_map) = sort_names(apps, "app")?;
        let (users, user_map) = sort_names(users, "user")?;
        if let Some(map) = &app_map {
            for r in &mut records {
                r.app = AppId(map[r.app.index()]);
            }
        }
        if let Some(map) = &user_map {
            for r in &mut records {
                r.user = UserId(map[r.user.index()]);
            }
        }
        if records.iter().any(|r| r.app.index() >= apps.len() || r.user.index() >= users.len()) {
            return Err(Error::InvalidParameter {
                name: "records",
                reason: "identifier index out of range",
            });
        }
        records.sort_unstable();
        records.dedup();

        let min_day = records.iter().map(|r| r.day).min().unwrap_or_default();
        let max_day = records.iter().map(|r| r.day).max().unwrap_or_default();
        let (window_start, window_end) = match window {
            Some((start, end)) => {
                if start > end {
                    return Err(Error::InvalidParameter {
                        name: "window",
                        reason: "start must not be after end",
                    });
                }
                if let Some(r) = records.iter().find(|r| r.day < start || r.day > end) {
                    return Err(Error::OutsideWindow {
                        app: apps[r.app.index()].clone(),
                        day: r.day.0,
                    });
                }
                (start, end)
            }
            None => (min_day, max_day),
        };

        let mut app_offsets = vec![0usize; apps.len() + 1];
        for r in &records {
            app_offsets[r.app.index() + 1] += 1;
        }
        for i in 0..apps.len() {
            app_offsets[i + 1] += app_offsets[i];
        }

        Ok(Dataset {
            apps,
            users,
            records,
            app_offsets,
            window_start,
            window_end,
            categories,
        })
    }

    pub fn apps(&self) -> &[String] {
        &self.apps
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn app_name(&self, app: AppId) -> &str {
        &self.apps[app.index()]
    }

    pub fn user_name(&self, user: UserId) -> &str {
        &self.users[user.index()]
    }

    pub fn app_id(&self, name: &str) -> Option<AppId> {
        self.apps
            .binary_search_by(|a| a.as_str().cmp(name))
            .ok()
            .map(|i| AppId(i as u32))
    }

    pub fn user_id(&self, name: &str) -> Option<UserId> {
        self.users
            .binary_search_by(|u| u.as_str().cmp(name))
            .ok()
            .map(|i| UserId(i as u32))
    }

    pub(crate) fn require_app(&self, name: &str) -> Result<AppId> {
        self.app_id(name).ok_or_else(|| Error::UnknownApp(name.to_string()))
    }

    pub fn app_ids(&self) -> impl ExactSizeIterator<Item = AppId> {
        (0..self.apps.len() as u32).map(AppId)
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn window(&self) -> (Day, Day) {
        (self.window_start, self.window_end)
    }

    pub fn categories(&self) -> &CategoryMap {
        &self.categories
    }

    pub fn category_of(&self, app: AppId) -> Option<&str> {
        self.categories.get(self.app_name(app))
    }

    /// Records of one app, sorted by day then user.
    pub fn app_records(&self, app: AppId) -> &[Record] {
        let i = app.index();
        &self.records[self.app_offsets[i]..self.app_offsets[i + 1]]
    }

    /// Records of one app observed on or before `until`.
    pub fn app_records_until(&self, app: AppId, until: Day) -> &[Record] {
        let all = self.app_records(app);
        &all[..all.partition_point(|r| r.day <= until)]
    }

    /// Records of one app observed within `[from, to]`.
    pub fn app_records_between(&self, app: AppId, from: Day, to: Day) -> &[Record] {
        let all = self.app_records(app);
        let lo = all.partition_point(|r| r.day < from);
        let hi = all.partition_point(|r| r.day <= to);
        &all[lo..hi.max(lo)]
    }

    /// Distinct-user counts per day for `app`.
    pub fn daily_usage(&self, app: &str) -> Result<DailySeries> {
        let id = self.require_app(app)?;
        Ok(daily_counts(self.app_name(id), self.app_records(id)).expect("interned apps have records"))
    }

    /// Distinct-user counts per day for `app`, using only records up to `until`.
    /// `None` when the app has no record in that range.
    pub fn daily_usage_until(&self, app: AppId, until: Day) -> Option<DailySeries> {
        daily_counts(self.app_name(app), self.app_records_until(app, until))
    }
}

/// Counts distinct users per day over records of a single app sorted by
/// `(day, user)` without duplicates.
fn daily_counts(app: &str, records: &[Record]) -> Option<DailySeries> {
    let first = records.first()?.day;
    let last = records.last()?.day;
    let mut counts = vec![0u32; (last - first) as usize + 1];
    for r in records {
        counts[(r.day - first) as usize] += 1;
    }
    Some(DailySeries {
        app_id: app.to_string(),
        start: first,
        counts,
    })
}

fn sort_names(names: Vec<String>, what: &'static str) -> Result<(Vec<String>, Option<Vec<u32>>)> {
    if names.iter().any(String::is_empty) {
        return Err(Error::EmptyId(what));
    }
    if names.windows(2).all(|w| w[0] < w[1]) {
        return Ok((names, None));
    }
    let mut order: Vec<u32> = (0..names.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| names[a as usize].cmp(&names[b as usize]));
    if order
        .windows(2)
        .any(|w| names[w[0] as usize] == names[w[1] as usize])
    {
        return Err(Error::InvalidParameter {
            name: what,
            reason: "identifiers must be unique",
        });
    }
    let mut remap = vec![0u32; names.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old as usize] = new as u32;
    }
    let mut slots: Vec<Option<String>> = names.into_iter().map(Some).collect();
    let sorted = order
        .iter()
        .map(|&old| slots[old as usize].take().expect("each index once"))
        .collect();
    Ok((sorted, Some(remap)))
}

/// Incremental construction of a [`Dataset`] from textual observations.
#[derive(Debug, Default)]
pub struct DatasetBuilder {
    apps: BTreeMap<String, u32>,
    users: BTreeMap<String, u32>,
    records: Vec<Record>,
    categories: CategoryMap,
    window: Option<(Day, Day)>,
}

impl DatasetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Overrides the inferred observation window.
    pub fn window(mut self, start: Day, end: Day) -> Self {
        self.window = Some((start, end));
        self
    }

    pub fn push(&mut self, user: &str, app: &str, day: Day) -> Result<()> {
        if user.is_empty() {
            return Err(Error::EmptyId("user"));
        }
        if app.is_empty() {
            return Err(Error::EmptyId("app"));
        }
        let app = intern(&mut self.apps, app);
        let user = intern(&mut self.users, user);
        self.records.push(Record {
            app: AppId(app),
            day,
            user: UserId(user),
        });
        Ok(())
    }

    pub fn push_record(&mut self, record: &UsageRecord) -> Result<()> {
        self.push(&record.user, &record.app, record.day)
    }

    pub fn set_category(&mut self, app: &str, category: &str) -> Result<()> {
        self.categories.insert(app, category)
    }

    pub fn build(self) -> Result<Dataset> {
        let apps = into_table(self.apps);
        let users = into_table(self.users);
        Dataset::from_parts(apps, users, self.records, self.categories, self.window)
    }
}

fn intern(table: &mut BTreeMap<String, u32>, name: &str) -> u32 {
    if let Some(&id) = table.get(name) {
        return id;
    }
    let id = table.len() as u32;
    table.insert(name.to_string(), id);
    id
}

fn into_table(map: BTreeMap<String, u32>) -> Vec<String> {
    let mut table = vec![String::new(); map.len()];
    for (name, id) in map {
        table[id as usize] = name;
    }
    table
}

/// Reusable scratch space for per-app [`UserSpan`] extraction.
#[derive(Debug)]
pub struct SpanScanner {
    slot: Vec<u32>,
}

const NO_SLOT: u32 = u32::MAX;

impl SpanScanner {
    pub fn new(ds: &Dataset) -> Self {
        SpanScanner {
            slot: vec![NO_SLOT; ds.users().len()],
        }
    }

    /// One span per distinct user in `records`, which must all belong to a
    /// single app and be sorted by day. Output is sorted by user.
    pub fn scan(&mut self, records: &[Record]) -> Vec<UserSpan> {
        let mut spans: Vec<UserSpan> = Vec::new();
        for r in records {
            let slot = &mut self.slot[r.user.index()];
            if *slot == NO_SLOT {
                *slot = spans.len() as u32;
                spans.push(UserSpan {
                    user: r.user,
                    app: r.app,
                    first: r.day,
                    last: r.day,
                    active_days: 1,
                });
            } else {
                let span = &mut spans[*slot as usize];
                span.last = r.day;
                span.active_days += 1;
            }
        }
        for span in &spans {
            self.slot[span.user.index()] = NO_SLOT;
        }
        spans.sort_unstable_by_key(|s| s.user);
        spans
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(rows: &[(&str, &str, i32)]) -> Result<Dataset> {
        let mut b = DatasetBuilder::new();
        for &(u, a, d) in rows {
            b.push(u, a, Day(d))?;
        }
        b.build()
    }

    #[test]
    fn duplicates_collapse() {
        let ds = build(&[("u1", "a", 0), ("u1", "a", 0), ("u2", "a", 1)]).unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn empty_builder_has_no_records() {
        assert_eq!(DatasetBuilder::new().build(), Err(Error::NoRecords));
    }

    #[test]
    fn empty_ids_are_rejected() {
        assert_eq!(build(&[("", "a", 0)]), Err(Error::EmptyId("user")));
        assert_eq!(build(&[("u", "", 0)]), Err(Error::EmptyId("app")));
    }

    #[test]
    fn ids_are_lexicographic() {
        let ds = build(&[("u2", "zeta", 0), ("u1", "alpha", 0)]).unwrap();
        assert_eq!(ds.apps(), ["alpha", "zeta"]);
        assert_eq!(ds.users(), ["u1", "u2"]);
        assert_eq!(ds.app_id("zeta"), Some(AppId(1)));
        assert_eq!(ds.app_records(AppId(1))[0].user, UserId(1));
    }

    #[test]
    fn daily_usage_counts_distinct_users_with_gaps() {
        let ds = build(&[("u1", "a", 10), ("u2", "a", 10), ("u1", "a", 12)]).unwrap();
        let s = ds.daily_usage("a").unwrap();
        assert_eq!(s.start, Day(10));
        assert_eq!(s.counts, [2, 0, 1]);
        assert!(s.is_missing(1));
        assert!(!s.is_missing(0));
    }

    #[test]
    fn daily_usage_single_record() {
        let ds = build(&[("u1", "a", 3)]).unwrap();
        assert_eq!(ds.daily_usage("a").unwrap().counts, [1]);
    }

    #[test]
    fn daily_usage_unknown_app() {
        let ds = build(&[("u1", "a", 3)]).unwrap();
        assert_eq!(ds.daily_usage("b"), Err(Error::UnknownApp("b".into())));
    }

    #[test]
    fn window_override_is_validated() {
        let mut b = DatasetBuilder::new().window(Day(0), Day(5));
        b.push("u", "a", Day(6)).unwrap();
        assert!(matches!(b.build(), Err(Error::OutsideWindow { day: 6, .. })));

        let mut b = DatasetBuilder::new().window(Day(0), Day(9));
        b.push("u", "a", Day(6)).unwrap();
        assert_eq!(b.build().unwrap().window(), (Day(0), Day(9)));
    }

    #[test]
    fn inferred_window_spans_records() {
        let ds = build(&[("u", "a", 4), ("u", "b", 9), ("v", "a", 2)]).unwrap();
        assert_eq!(ds.window(), (Day(2), Day(9)));
    }

    #[test]
    fn category_conflicts_are_rejected() {
        let mut cats = CategoryMap::new();
        cats.insert("a", "Tools").unwrap();
        cats.insert("a", "Tools").unwrap();
        assert!(matches!(cats.insert("a", "Games"), Err(Error::CategoryConflict { .. })));
        assert_eq!(cats.insert("b", ""), Err(Error::EmptyId("category")));
    }

    #[test]
    fn from_parts_remaps_unsorted_tables() {
        let apps = vec!["b".into(), "a".into()];
        let users = vec!["y".into(), "x".into()];
        let records = vec![
            Record { app: AppId(0), day: Day(1), user: UserId(0) },
            Record { app: AppId(1), day: Day(0), user: UserId(1) },
        ];
        let ds = Dataset::from_parts(apps, users, records, CategoryMap::new(), None).unwrap();
        assert_eq!(ds.app_name(ds.records()[0].app), "a");
        assert_eq!(ds.user_name(ds.records()[0].user), "x");
        assert_eq!(ds.app_name(ds.records()[1].app), "b");
        assert_eq!(ds.user_name(ds.records()[1].user), "y");
    }

    #[test]
    fn from_parts_rejects_duplicate_names() {
        let r = Dataset::from_parts(
            vec!["b".into(), "a".into(), "b".into()],
            vec!["u".into()],
            vec![Record { app: AppId(0), day: Day(0), user: UserId(0) }],
            CategoryMap::new(),
            None,
        );
        assert!(matches!(r, Err(Error::InvalidParameter { name: "app", .. })));
    }

    #[test]
    fn span_scanner_tracks_first_last_and_days() {
        let ds = build(&[("u1", "a", 0), ("u1", "a", 5), ("u2", "a", 3), ("u1", "a", 2)]).unwrap();
        let mut scanner = SpanScanner::new(&ds);
        let spans = scanner.scan(ds.app_records(AppId(0)));
        assert_eq!(spans.len(), 2);
        assert_eq!((spans[0].first, spans[0].last, spans[0].active_days), (Day(0), Day(5), 3));
        assert_eq!((spans[1].first, spans[1].last, spans[1].active_days), (Day(3), Day(3), 1));
        // scratch is reset between calls
        assert_eq!(scanner.scan(ds.app_records(AppId(0))), spans);
    }

    #[test]
    fn record_slices_by_day() {
        let ds = build(&[("u1", "a", 0), ("u1", "a", 5), ("u2", "a", 3)]).unwrap();
        assert_eq!(ds.app_records_until(AppId(0), Day(3)).len(), 2);
        assert_eq!(ds.app_records_between(AppId(0), Day(1), Day(5)).len(), 2);
        assert_eq!(ds.app_records_between(AppId(0), Day(6), Day(9)).len(), 0);
        assert!(ds.daily_usage_until(AppId(0), Day(-1)).is_none());
        assert_eq!(ds.daily_usage_until(AppId(0), Day(3)).unwrap().counts, [1, 0, 0, 1]);
    }
}
