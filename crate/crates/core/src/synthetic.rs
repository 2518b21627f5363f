//! Synthetic VuFind-style interaction logs with known ground truth.
//!
//! The catalog below defines fifty actions, each with a disjoint URL (and sometimes referrer)
//! pattern. [`generate`] emits log rows whose URLs map to exactly one intended action under
//! [`mapping_csv`], so counts seen after the full pipeline can be checked against the
//! generator's own bookkeeping.

use std::fmt::Write as _;
use std::io::{self, Write};

use chrono::{FixedOffset, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::LogRow;

pub const SITE: &str = "https://xy.example";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticAction {
    pub action_id: &'static str,
    pub label_en: &'static str,
    pub label_de: &'static str,
    /// Empty when the rule ignores the referrer.
    pub referrer_pattern: &'static str,
    pub url_pattern: &'static str,
}

const fn act(
    action_id: &'static str,
    label_en: &'static str,
    label_de: &'static str,
    referrer_pattern: &'static str,
    url_pattern: &'static str,
) -> SyntheticAction {
    SyntheticAction {
        action_id,
        label_en,
        label_de,
        referrer_pattern,
        url_pattern,
    }
}

pub const ACTIONS: [SyntheticAction; 50] = [
    act(
        "view_record",
        "View record",
        "Datensatz ansehen",
        "",
        r"^/Record/[^/?]+$",
    ),
    act(
        "simple_search_home",
        "Simple search from the homepage",
        "Einfache Suche von der Startseite",
        r"^https?://xy\.example/$",
        r"^/Search/Results\?lookfor=",
    ),
    act(
        "simple_search",
        "Simple search",
        "Einfache Suche",
        r"^https?://xy\.example/.+",
        r"^/Search/Results\?lookfor=",
    ),
    act("home", "Homepage", "Startseite", "", r"^/$"),
    act(
        "view_abstract",
        "View abstract",
        "Abstract ansehen",
        "",
        r"^/Record/[^/]+/Description$",
    ),
    act(
        "view_comments",
        "View comments",
        "Kommentare ansehen",
        "",
        r"^/Record/[^/]+/UserComments$",
    ),
    act(
        "facet_filter",
        "Filter by facet",
        "Facette filtern",
        "",
        r"^/Search/Results\?filter",
    ),
    act(
        "paginate",
        "Next result page",
        "Nächste Trefferseite",
        "",
        r"^/Search/Results\?page=\d+",
    ),
    act(
        "sort_results",
        "Sort results",
        "Treffer sortieren",
        "",
        r"^/Search/Results\?sort=",
    ),
    act(
        "advanced_search_form",
        "Advanced search form",
        "Erweiterte Suche (Formular)",
        "",
        r"^/Search/Advanced$",
    ),
    act(
        "advanced_search",
        "Advanced search",
        "Erweiterte Suche",
        "",
        r"^/Search/Results\?join=",
    ),
    act(
        "export_record",
        "Export record",
        "Datensatz exportieren",
        "",
        r"^/Record/[^/]+/Export\?style=",
    ),
    act(
        "view_details",
        "View details",
        "Details ansehen",
        "",
        r"^/Record/[^/]+/Details$",
    ),
    act(
        "view_references",
        "View references",
        "Literaturangaben ansehen",
        "",
        r"^/Record/[^/]+/References$",
    ),
    act(
        "view_similar",
        "View similar records",
        "Ähnliche Datensätze",
        "",
        r"^/Record/[^/]+/Similar$",
    ),
    act(
        "cite_record",
        "Cite record",
        "Datensatz zitieren",
        "",
        r"^/Record/[^/]+/Cite$",
    ),
    act(
        "email_record",
        "E-mail record",
        "Datensatz mailen",
        "",
        r"^/Record/[^/]+/Email$",
    ),
    act(
        "save_record",
        "Add to favorites",
        "Zu Favoriten hinzufügen",
        "",
        r"^/Record/[^/]+/Save$",
    ),
    act(
        "add_comment",
        "Add comment",
        "Kommentar hinzufügen",
        "",
        r"^/Record/[^/]+/AddComment$",
    ),
    act(
        "add_tag",
        "Add tag",
        "Schlagwort hinzufügen",
        "",
        r"^/Record/[^/]+/AddTag$",
    ),
    act(
        "print_record",
        "Print record",
        "Datensatz drucken",
        "",
        r"^/Record/[^/?]+\?print=1$",
    ),
    act(
        "fulltext_link",
        "Open full text",
        "Volltext öffnen",
        "",
        r"^/Record/[^/]+/Fulltext$",
    ),
    act(
        "view_holdings",
        "View holdings",
        "Bestand ansehen",
        "",
        r"^/Record/[^/]+/Holdings$",
    ),
    act(
        "permalink",
        "Permalink",
        "Permalink",
        "",
        r"^/Record/[^/]+/Permalink$",
    ),
    act(
        "login_form",
        "Login form",
        "Anmeldeformular",
        "",
        r"^/MyResearch/UserLogin$",
    ),
    act(
        "login",
        "Log in",
        "Anmelden",
        "",
        r"^/MyResearch/Home\?auth_method=",
    ),
    act("logout", "Log out", "Abmelden", "", r"^/MyResearch/Logout$"),
    act(
        "register",
        "Create account",
        "Konto anlegen",
        "",
        r"^/MyResearch/Account$",
    ),
    act(
        "favorites_list",
        "Favorites list",
        "Favoritenliste",
        "",
        r"^/MyResearch/Favorites$",
    ),
    act(
        "search_history",
        "Search history",
        "Suchverlauf",
        "",
        r"^/Search/History$",
    ),
    act(
        "save_search",
        "Save search",
        "Suche speichern",
        "",
        r"^/MyResearch/SaveSearch\?save=",
    ),
    act(
        "delete_favorite",
        "Delete favorite",
        "Favorit löschen",
        "",
        r"^/MyResearch/Delete\?id=",
    ),
    act(
        "my_profile",
        "Profile",
        "Profil",
        "",
        r"^/MyResearch/Profile$",
    ),
    act(
        "language_switch",
        "Switch language",
        "Sprache wechseln",
        "",
        r"^/MyResearch/Language\?lng=",
    ),
    act(
        "cart_add",
        "Add to cart",
        "In Merkliste",
        "",
        r"^/Cart/Add\?id=",
    ),
    act(
        "cart_view",
        "View cart",
        "Merkliste ansehen",
        "",
        r"^/Cart/Home$",
    ),
    act(
        "cart_export",
        "Export cart",
        "Merkliste exportieren",
        "",
        r"^/Cart/Export$",
    ),
    act(
        "browse_classification",
        "Browse classification",
        "Klassifikation durchsuchen",
        "",
        r"^/Browse/Classification\?",
    ),
    act(
        "browse_journal",
        "Browse journals",
        "Zeitschriften durchsuchen",
        "",
        r"^/Browse/Journal\?",
    ),
    act(
        "browse_author",
        "Author page",
        "Autorenseite",
        "",
        r"^/Author/Home\?author=",
    ),
    act(
        "thesaurus",
        "Thesaurus lookup",
        "Thesaurus",
        "",
        r"^/Thesaurus/Search\?term=",
    ),
    act(
        "recommendations",
        "Search term recommender",
        "Suchbegriffsempfehlung",
        "",
        r"^/AJAX/JSON\?method=getRecommendations",
    ),
    act(
        "autocomplete",
        "Autocomplete",
        "Autovervollständigung",
        "",
        r"^/AJAX/JSON\?method=getACSuggestions",
    ),
    act(
        "rss_feed",
        "RSS feed",
        "RSS-Feed",
        "",
        r"^/Search/Results\?view=rss",
    ),
    act(
        "openurl",
        "OpenURL resolver",
        "OpenURL-Auflösung",
        "",
        r"^/OpenURL\?",
    ),
    act("help", "Help", "Hilfe", "", r"^/Help/Home\?topic="),
    act("about", "About", "Über uns", "", r"^/Content/about$"),
    act("contact", "Feedback", "Kontakt", "", r"^/Feedback/Home$"),
    act(
        "project_view",
        "View research project",
        "Forschungsprojekt ansehen",
        "",
        r"^/Project/[^/?]+$",
    ),
    act(
        "institution_view",
        "View institution",
        "Institution ansehen",
        "",
        r"^/Institution/[^/?]+$",
    ),
];

pub const EXTRACTION_CSV: &str = "action_id,entity_name,kind,source,pattern\n\
*,search_term,text,url,[?&]lookfor=([^&]*)\n\
thesaurus,search_term,text,url,[?&]term=([^&]*)\n\
view_record,document_id,text,url,^/Record/([^/?]+)\n\
*,result_ids,field,resultlist_ids,\n";

/// Mapping table text for `actions`, with `rule_order` = position.
pub fn mapping_csv(actions: &[SyntheticAction]) -> String {
    let mut out = String::from("rule_order,action_id,label_en,label_de,referrer_param,url_param\n");
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for (i, a) in actions.iter().enumerate() {
        wtr.write_record([
            i.to_string().as_str(),
            a.action_id,
            a.label_en,
            a.label_de,
            a.referrer_pattern,
            a.url_pattern,
        ])
        .expect("in-memory write");
    }
    out.push_str(std::str::from_utf8(&wtr.into_inner().expect("flush")).expect("utf-8"));
    out
}

const SEARCH_TERMS: &[&str] = &[
    "religion",
    "migration",
    "social%20capital",
    "education",
    "inequality",
    "gender",
    "labour%20market",
    "democracy",
    "political%20participation",
    "youth",
    "poverty",
    "integration",
];

/// First actions for sessions that do not start with `view_record`.
const ENTRY_ACTIONS: &[&str] = &[
    "home",
    "simple_search_home",
    "login_form",
    "project_view",
    "browse_journal",
    "institution_view",
    "help",
];

/// (action, weight) for follow-up actions; everything else in the catalog gets weight 1.
const FOLLOW_WEIGHTS: &[(&str, u32)] = &[
    ("view_record", 28),
    ("simple_search", 12),
    ("view_abstract", 8),
    ("view_comments", 7),
    ("paginate", 5),
    ("facet_filter", 5),
    ("home", 3),
];

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub sessions: usize,
    pub seed: u64,
    /// Earliest session start (epoch ms).
    pub start_ts: i64,
    /// Session starts are spread uniformly over this many milliseconds.
    pub window_ms: i64,
    /// Exactly `round(share * sessions)` sessions begin with `view_record`.
    pub view_record_first_share: f64,
    pub logged_in_share: f64,
    /// Probability of one more action after each action.
    pub continue_prob: f64,
    pub max_actions: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            sessions: 1_000,
            seed: 42,
            start_ts: Utc
                .with_ymd_and_hms(2014, 4, 1, 0, 0, 0)
                .unwrap()
                .timestamp_millis(),
            window_ms: 153 * 86_400_000,
            view_record_first_share: 0.7,
            logged_in_share: 0.25,
            continue_prob: 0.8,
            max_actions: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticRow {
    pub row: LogRow,
    pub intended_action: &'static str,
}

#[derive(Debug, Clone)]
pub struct SyntheticLog {
    /// Time-ordered, row ids `0..n`.
    pub rows: Vec<SyntheticRow>,
    pub sessions: usize,
    pub view_record_first: usize,
    pub logged_in_sessions: usize,
}

impl SyntheticLog {
    pub fn log_rows(&self) -> Vec<LogRow> {
        self.rows.iter().map(|r| r.row.clone()).collect()
    }
}

fn pick_follow_up(rng: &mut ChaCha8Rng) -> &'static str {
    let extra: u32 = ACTIONS.len() as u32 - FOLLOW_WEIGHTS.len() as u32;
    let total: u32 = FOLLOW_WEIGHTS.iter().map(|(_, w)| w).sum::<u32>() + extra;
    let mut ticket = rng.gen_range(0..total);
    for (action, w) in FOLLOW_WEIGHTS {
        if ticket < *w {
            return action;
        }
        ticket -= w;
    }
    ACTIONS
        .iter()
        .map(|a| a.action_id)
        .filter(|id| !FOLLOW_WEIGHTS.iter().any(|(f, _)| f == id))
        .nth(ticket as usize)
        .expect("ticket within catalog")
}

fn doc_id(rng: &mut ChaCha8Rng) -> String {
    format!("gesis-solis-{:08}", rng.gen_range(0..100_000_000u32))
}

fn url_for(action: &str, rng: &mut ChaCha8Rng) -> String {
    let term = SEARCH_TERMS[rng.gen_range(0..SEARCH_TERMS.len())];
    let doc = doc_id(rng);
    match action {
        "view_record" => format!("/Record/{doc}"),
        "simple_search_home" | "simple_search" => {
            if rng.gen_bool(0.1) {
                let second = SEARCH_TERMS[rng.gen_range(0..SEARCH_TERMS.len())];
                format!("/Search/Results?lookfor={term}&type=AllFields&lookfor={second}")
            } else {
                format!("/Search/Results?lookfor={term}&type=AllFields")
            }
        }
        "home" => "/".into(),
        "view_abstract" => format!("/Record/{doc}/Description"),
        "view_comments" => format!("/Record/{doc}/UserComments"),
        "facet_filter" => format!("/Search/Results?filter[]=topic:{term}&lookfor={term}"),
        "paginate" => format!(
            "/Search/Results?page={}&lookfor={term}",
            rng.gen_range(2..20)
        ),
        "sort_results" => format!("/Search/Results?sort=year&lookfor={term}"),
        "advanced_search_form" => "/Search/Advanced".into(),
        "advanced_search" => format!("/Search/Results?join=AND&lookfor0[]={term}"),
        "export_record" => format!("/Record/{doc}/Export?style=BibTeX"),
        "view_details" => format!("/Record/{doc}/Details"),
        "view_references" => format!("/Record/{doc}/References"),
        "view_similar" => format!("/Record/{doc}/Similar"),
        "cite_record" => format!("/Record/{doc}/Cite"),
        "email_record" => format!("/Record/{doc}/Email"),
        "save_record" => format!("/Record/{doc}/Save"),
        "add_comment" => format!("/Record/{doc}/AddComment"),
        "add_tag" => format!("/Record/{doc}/AddTag"),
        "print_record" => format!("/Record/{doc}?print=1"),
        "fulltext_link" => format!("/Record/{doc}/Fulltext"),
        "view_holdings" => format!("/Record/{doc}/Holdings"),
        "permalink" => format!("/Record/{doc}/Permalink"),
        "login_form" => "/MyResearch/UserLogin".into(),
        "login" => "/MyResearch/Home?auth_method=Database".into(),
        "logout" => "/MyResearch/Logout".into(),
        "register" => "/MyResearch/Account".into(),
        "favorites_list" => "/MyResearch/Favorites".into(),
        "search_history" => "/Search/History".into(),
        "save_search" => format!("/MyResearch/SaveSearch?save={}", rng.gen_range(1..10_000)),
        "delete_favorite" => format!("/MyResearch/Delete?id={doc}"),
        "my_profile" => "/MyResearch/Profile".into(),
        "language_switch" => "/MyResearch/Language?lng=de".into(),
        "cart_add" => format!("/Cart/Add?id={doc}"),
        "cart_view" => "/Cart/Home".into(),
        "cart_export" => "/Cart/Export".into(),
        "browse_classification" => format!("/Browse/Classification?code={}", rng.gen_range(1..12)),
        "browse_journal" => "/Browse/Journal?letter=S".into(),
        "browse_author" => "/Author/Home?author=Weber%2C+Max".into(),
        "thesaurus" => format!("/Thesaurus/Search?term={term}"),
        "recommendations" => format!("/AJAX/JSON?method=getRecommendations&lookfor={term}"),
        "autocomplete" => format!("/AJAX/JSON?method=getACSuggestions&q={term}"),
        "rss_feed" => format!("/Search/Results?view=rss&lookfor={term}"),
        "openurl" => format!("/OpenURL?rft_id={doc}"),
        "help" => "/Help/Home?topic=search".into(),
        "about" => "/Content/about".into(),
        "contact" => "/Feedback/Home".into(),
        "project_view" => format!(
            "/Project/gesis-foprojekt-{:06}",
            rng.gen_range(0..1_000_000)
        ),
        "institution_view" => format!("/Institution/gesis-inst-{:05}", rng.gen_range(0..100_000)),
        other => unreachable!("no url template for {other}"),
    }
}

fn is_search(action: &str) -> bool {
    matches!(
        action,
        "simple_search_home"
            | "simple_search"
            | "facet_filter"
            | "paginate"
            | "sort_results"
            | "advanced_search"
    )
}

/// Generates a deterministic log for `cfg`.
pub fn generate(cfg: &SyntheticConfig) -> SyntheticLog {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let view_first = (cfg.view_record_first_share * cfg.sessions as f64).round() as usize;
    let view_first = view_first.min(cfg.sessions);
    let mut starts_with_view: Vec<bool> = (0..cfg.sessions).map(|i| i < view_first).collect();
    starts_with_view.shuffle(&mut rng);
    let user_pool = (cfg.sessions / 3).max(1);

    let mut rows: Vec<(i64, usize, usize, SyntheticRow)> = Vec::new();
    let mut logged_in_sessions = 0;
    for (si, &view_first) in starts_with_view.iter().enumerate() {
        let session_id = format!("sess-{si:07}");
        let user = rng
            .gen_bool(cfg.logged_in_share)
            .then(|| format!("u{:05}", rng.gen_range(0..user_pool)));
        let len = {
            let mut n = 1;
            while n < cfg.max_actions && rng.gen_bool(cfg.continue_prob) {
                n += 1;
            }
            n
        };
        // logged-in users are identified from a random step onward
        let login_step = if user.is_some() && rng.gen_bool(0.5) {
            rng.gen_range(0..len)
        } else {
            0
        };
        if user.is_some() {
            logged_in_sessions += 1;
        }
        let mut ts = cfg.start_ts + rng.gen_range(0..cfg.window_ms.max(1));
        let mut prev_url: Option<String> = None;
        let mut prev_action = "";
        for step in 0..len {
            let mut action: &'static str = if step == 0 {
                if view_first {
                    "view_record"
                } else {
                    ENTRY_ACTIONS[rng.gen_range(0..ENTRY_ACTIONS.len())]
                }
            } else {
                pick_follow_up(&mut rng)
            };
            if step > 0 && matches!(action, "simple_search" | "simple_search_home") {
                action = if prev_action == "home" {
                    "simple_search_home"
                } else {
                    "simple_search"
                };
            }
            let url = url_for(action, &mut rng);
            let referrer = match (&prev_url, action) {
                (Some(prev), _) => format!("{SITE}{prev}"),
                (None, "view_record") => "https://www.google.com/".into(),
                (None, "simple_search_home") => format!("{SITE}/"),
                (None, _) => String::new(),
            };
            let resultlist_ids = if is_search(action) {
                (0..10).map(|_| doc_id(&mut rng)).collect()
            } else {
                Vec::new()
            };
            let row = LogRow {
                row_id: 0,
                session_id: session_id.clone(),
                user_id: user.clone().filter(|_| step >= login_step),
                timestamp: ts,
                resultlist_ids,
                url: url.clone(),
                referrer_url: referrer,
            };
            rows.push((
                ts,
                si,
                step,
                SyntheticRow {
                    row,
                    intended_action: action,
                },
            ));
            ts += rng.gen_range(1_000..180_000);
            prev_url = Some(url);
            prev_action = action;
        }
    }
    rows.sort_by_key(|(ts, si, step, _)| (*ts, *si, *step));
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, (_, _, _, mut r))| {
            r.row.row_id = i as u64;
            r
        })
        .collect();
    SyntheticLog {
        rows,
        sessions: cfg.sessions,
        view_record_first: view_first,
        logged_in_sessions,
    }
}

fn iso(ts: i64) -> String {
    Utc.timestamp_millis_opt(ts)
        .single()
        .expect("timestamp in range")
        .format("%Y-%m-%dT%H:%M:%S%.3fZ")
        .to_string()
}

/// Writes rows as CSV in the default schema (ISO-8601 UTC timestamps, comma-separated lists).
pub fn write_csv<W: Write>(rows: &[LogRow], out: W) -> io::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "session_id",
        "user_id",
        "timestamp",
        "resultlist_ids",
        "url",
        "referrer_url",
    ])?;
    for r in rows {
        wtr.write_record([
            r.session_id.as_str(),
            r.user_id.as_deref().unwrap_or(""),
            &iso(r.timestamp),
            &r.resultlist_ids.join(","),
            &r.url,
            &r.referrer_url,
        ])?;
    }
    wtr.flush()
}

/// Writes rows as JSON Lines in the default schema (epoch-millisecond timestamps).
pub fn write_jsonl<W: Write>(rows: &[LogRow], mut out: W) -> io::Result<()> {
    for r in rows {
        let value = serde_json::json!({
            "session_id": r.session_id,
            "user_id": r.user_id,
            "timestamp": r.timestamp,
            "resultlist_ids": r.resultlist_ids,
            "url": r.url,
            "referrer_url": r.referrer_url,
        });
        serde_json::to_writer(&mut out, &value)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Schema for [`write_legacy_csv`] output.
pub const LEGACY_SCHEMA: &str = "\
# legacy export: semicolon-separated, local time (+02:00), pipe-separated hit lists
csv_delimiter = \";\"
session_id = SID
user_id = UID
timestamp = ZEIT
timestamp_format = %d.%m.%Y %H:%M:%S%.3f
timezone = +02:00
resultlist_ids = TREFFER
list_delimiter = \"|\"
url = ANFRAGE
referrer_url = HERKUNFT
";

/// Writes rows in a legacy layout: different column names and order, local timestamps,
/// `;` separators and `|`-joined result lists.
pub fn write_legacy_csv<W: Write>(rows: &[LogRow], out: W) -> io::Result<()> {
    let zone = FixedOffset::east_opt(2 * 3600).expect("offset");
    let mut wtr = csv::WriterBuilder::new().delimiter(b';').from_writer(out);
    wtr.write_record([
        "ZEIT", "SID", "ANFRAGE", "HERKUNFT", "TREFFER", "UID", "AGENT",
    ])?;
    let mut ts_buf = String::new();
    for r in rows {
        ts_buf.clear();
        let local = zone
            .timestamp_millis_opt(r.timestamp)
            .single()
            .expect("timestamp in range");
        write!(ts_buf, "{}", local.format("%d.%m.%Y %H:%M:%S%.3f")).expect("string write");
        wtr.write_record([
            ts_buf.as_str(),
            &r.session_id,
            &r.url,
            &r.referrer_url,
            &r.resultlist_ids.join("|"),
            r.user_id.as_deref().unwrap_or(""),
            "Mozilla/5.0",
        ])?;
    }
    wtr.flush()
}
