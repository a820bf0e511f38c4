//! Annotation model and I/O: Praat TextGrid (long and short form) and a
//! plain XML tier format. Tiers hold labeled segments (intervals) or events
//! (points); events can be expanded into segment sequences.

use crate::error::{Error, Result};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TierKind {
    Segment,
    Event,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotItem {
    pub label: String,
    pub t_start: f64,
    /// Equal to `t_start` for events.
    pub t_end: f64,
}

impl AnnotItem {
    pub fn segment(t_start: f64, t_end: f64, label: impl Into<String>) -> Self {
        AnnotItem { label: label.into(), t_start, t_end }
    }
    pub fn event(t: f64, label: impl Into<String>) -> Self {
        AnnotItem { label: label.into(), t_start: t, t_end: t }
    }
    pub fn dur(&self) -> f64 {
        self.t_end - self.t_start
    }
    pub fn mid(&self) -> f64 {
        0.5 * (self.t_start + self.t_end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tier {
    pub name: String,
    pub kind: TierKind,
    pub items: Vec<AnnotItem>,
    /// 0-based audio channel the tier belongs to.
    pub channel: usize,
}

impl Tier {
    pub fn new(name: impl Into<String>, kind: TierKind) -> Self {
        Tier { name: name.into(), kind, items: vec![], channel: 0 }
    }
    pub fn is_event(&self) -> bool {
        self.kind == TierKind::Event
    }
    pub fn t_max(&self) -> f64 {
        self.items.last().map(|i| i.t_end).unwrap_or(0.0)
    }
    /// Items that are neither empty- nor pause-labeled.
    pub fn content_items(&self, pause_label: &str) -> Vec<&AnnotItem> {
        self.items.iter().filter(|i| !is_pause_label(&i.label, pause_label)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Annotation {
    pub tiers: Vec<Tier>,
    pub file_duration: f64,
}

impl Annotation {
    pub fn new(file_duration: f64) -> Self {
        Annotation { tiers: vec![], file_duration }
    }

    pub fn tier(&self, name: &str) -> Option<&Tier> {
        self.tiers.iter().find(|t| t.name == name)
    }

    pub fn tier_mut(&mut self, name: &str) -> Option<&mut Tier> {
        self.tiers.iter_mut().find(|t| t.name == name)
    }

    /// Adds a tier, renaming on name collision to keep names unique.
    pub fn push_tier(&mut self, mut tier: Tier) {
        if self.tier(&tier.name).is_some() {
            let base = tier.name.clone();
            let mut k = 2;
            while self.tier(&format!("{base}_{k}")).is_some() {
                k += 1;
            }
            log::warn!("duplicate tier name '{base}' renamed to '{base}_{k}'");
            tier.name = format!("{base}_{k}");
        }
        self.file_duration = self.file_duration.max(tier.t_max());
        self.tiers.push(tier);
    }

    /// Replaces a tier of the same name, or appends.
    pub fn upsert_tier(&mut self, tier: Tier) {
        self.file_duration = self.file_duration.max(tier.t_max());
        match self.tiers.iter_mut().find(|t| t.name == tier.name) {
            Some(slot) => *slot = tier,
            None => self.tiers.push(tier),
        }
    }

    /// Structural equality with a time tolerance.
    pub fn approx_eq(&self, other: &Annotation, tol: f64) -> bool {
        if self.tiers.len() != other.tiers.len()
            || (self.file_duration - other.file_duration).abs() > tol
        {
            return false;
        }
        self.tiers.iter().zip(&other.tiers).all(|(a, b)| {
            a.name == b.name
                && a.kind == b.kind
                && a.items.len() == b.items.len()
                && a.items.iter().zip(&b.items).all(|(x, y)| {
                    x.label == y.label
                        && (x.t_start - y.t_start).abs() <= tol
                        && (x.t_end - y.t_end).abs() <= tol
                })
        })
    }
}

/// Empty or whitespace-only labels mark pauses, as does the configured
/// pause label (exact match after trimming).
pub fn is_pause_label(label: &str, pause_label: &str) -> bool {
    let t = label.trim();
    t.is_empty() || (!pause_label.is_empty() && t == pause_label)
}

/// Symmetric analysis window around an event, clipped to `[0, dur]`.
pub fn event_window(t: f64, win: f64, dur: f64) -> (f64, f64) {
    ((t - win / 2.0).max(0.0), (t + win / 2.0).min(dur))
}

/// Decodes annotation file bytes: UTF-8 (with or without BOM) and UTF-16
/// with byte-order mark.
pub fn decode_bytes(bytes: &[u8]) -> Result<String> {
    if bytes.starts_with(&[0xEF, 0xBB, 0xBF]) {
        return String::from_utf8(bytes[3..].to_vec())
            .map_err(|e| Error::Parse(format!("invalid UTF-8: {e}")));
    }
    let (le, payload) = if bytes.starts_with(&[0xFF, 0xFE]) {
        (true, &bytes[2..])
    } else if bytes.starts_with(&[0xFE, 0xFF]) {
        (false, &bytes[2..])
    } else {
        return String::from_utf8(bytes.to_vec())
            .map_err(|e| Error::Parse(format!("invalid UTF-8: {e}")));
    };
    if payload.len() % 2 != 0 {
        return Err(Error::Parse("UTF-16 text with odd byte count".into()));
    }
    let units: Vec<u16> = payload
        .chunks_exact(2)
        .map(|c| {
            if le {
                u16::from_le_bytes([c[0], c[1]])
            } else {
                u16::from_be_bytes([c[0], c[1]])
            }
        })
        .collect();
    char::decode_utf16(units)
        .collect::<std::result::Result<String, _>>()
        .map_err(|e| Error::Parse(format!("invalid UTF-16: {e}")))
}

// ---------------------------------------------------------------------------
// TextGrid
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Str(String),
    Num(f64),
    Flag(String),
}

/// Reduces both TextGrid forms to one value stream: quoted strings,
/// numbers, and `<...>` flags. Key names, `=`, `:` and bracketed indices
/// carry no information beyond ordering and are dropped.
fn tokenize_textgrid(text: &str) -> Result<Vec<Token>> {
    let mut out = vec![];
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => {
                            if chars.peek() == Some(&'"') {
                                chars.next();
                                s.push('"');
                            } else {
                                break;
                            }
                        }
                        Some(ch) => s.push(ch),
                        None => return Err(Error::Parse("unterminated string in TextGrid".into())),
                    }
                }
                out.push(Token::Str(s));
            }
            '[' => {
                for ch in chars.by_ref() {
                    if ch == ']' {
                        break;
                    }
                }
            }
            '<' => {
                chars.next();
                let mut s = String::new();
                for ch in chars.by_ref() {
                    if ch == '>' {
                        break;
                    }
                    s.push(ch);
                }
                out.push(Token::Flag(s));
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut w = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_whitespace() || ch == '[' || ch == '"' || ch == '<' {
                        break;
                    }
                    w.push(ch);
                    chars.next();
                }
                if let Ok(v) = w.parse::<f64>() {
                    out.push(Token::Num(v));
                }
            }
        }
    }
    Ok(out)
}

struct TokenReader {
    toks: std::vec::IntoIter<Token>,
}

impl TokenReader {
    fn num(&mut self, what: &str) -> Result<f64> {
        match self.toks.next() {
            Some(Token::Num(v)) => Ok(v),
            other => Err(Error::Parse(format!("TextGrid: expected number for {what}, got {other:?}"))),
        }
    }
    fn string(&mut self, what: &str) -> Result<String> {
        match self.toks.next() {
            Some(Token::Str(s)) => Ok(s),
            other => Err(Error::Parse(format!("TextGrid: expected string for {what}, got {other:?}"))),
        }
    }
}

/// Parses a TextGrid in long or short form.
pub fn parse_textgrid(text: &str) -> Result<Annotation> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let toks = tokenize_textgrid(text)?;
    let has_tiers = !toks.iter().any(|t| matches!(t, Token::Flag(f) if f == "absent"));
    let mut r = TokenReader {
        toks: toks
            .into_iter()
            .filter(|t| !matches!(t, Token::Flag(_)))
            .collect::<Vec<_>>()
            .into_iter(),
    };
    let ftype = r.string("file type")?;
    let oclass = r.string("object class")?;
    if ftype != "ooTextFile" || oclass != "TextGrid" {
        return Err(Error::Parse(format!(
            "not a TextGrid (file type '{ftype}', class '{oclass}')"
        )));
    }
    let _xmin = r.num("file xmin")?;
    let xmax = r.num("file xmax")?;
    let mut annot = Annotation::new(xmax);
    if !has_tiers {
        return Ok(annot);
    }
    let size = r.num("tier count")? as usize;
    for ti in 0..size {
        let class = r.string(&format!("class of tier {}", ti + 1))?;
        let name = r.string(&format!("name of tier {}", ti + 1))?;
        let _txmin = r.num(&format!("xmin of tier {}", ti + 1))?;
        let _txmax = r.num(&format!("xmax of tier {}", ti + 1))?;
        let n = r.num(&format!("item count of tier {}", ti + 1))? as usize;
        let kind = match class.as_str() {
            "IntervalTier" => TierKind::Segment,
            "TextTier" | "PointTier" => TierKind::Event,
            other => {
                return Err(Error::Parse(format!(
                    "tier {} '{name}': unsupported class '{other}'",
                    ti + 1
                )))
            }
        };
        let mut tier = Tier::new(name.clone(), kind);
        for ii in 0..n {
            let ctx = format!("tier {} '{name}' item {}", ti + 1, ii + 1);
            let item = match kind {
                TierKind::Segment => {
                    let t0 = r.num(&format!("{ctx} xmin"))?;
                    let t1 = r.num(&format!("{ctx} xmax"))?;
                    let label = r.string(&format!("{ctx} text"))?;
                    if t1 < t0 {
                        return Err(Error::Parse(format!("{ctx}: xmax {t1} < xmin {t0}")));
                    }
                    AnnotItem::segment(t0, t1, label)
                }
                TierKind::Event => {
                    let t = r.num(&format!("{ctx} time"))?;
                    let label = r.string(&format!("{ctx} mark"))?;
                    AnnotItem::event(t, label)
                }
            };
            tier.items.push(item);
        }
        finalize_items(&mut tier);
        annot.push_tier(tier);
    }
    annot.file_duration = annot.file_duration.max(xmax);
    Ok(annot)
}

/// Sorts by onset and drops overlapping segments (keeping the earlier one).
fn finalize_items(tier: &mut Tier) {
    tier.items
        .sort_by(|a, b| a.t_start.partial_cmp(&b.t_start).unwrap());
    if tier.kind != TierKind::Segment {
        return;
    }
    let mut kept: Vec<AnnotItem> = Vec::with_capacity(tier.items.len());
    for it in tier.items.drain(..) {
        if let Some(prev) = kept.last() {
            if it.t_start < prev.t_end - 1e-9 {
                log::warn!(
                    "tier '{}': segment [{}, {}] overlaps previous [{}, {}]; dropped",
                    tier.name, it.t_start, it.t_end, prev.t_start, prev.t_end
                );
                continue;
            }
        }
        kept.push(it);
    }
    tier.items = kept;
}

fn fmt_time(t: f64) -> String {
    format!("{t:.6}")
}

fn tg_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Praat interval tiers must tile the whole time axis; fill gaps wider than
/// a microsecond with empty (pause) intervals.
fn tiled_items(items: &[AnnotItem], dur: f64) -> Vec<AnnotItem> {
    let mut out = vec![];
    let mut cur = 0.0;
    for it in items {
        if it.t_start > cur + 1e-6 {
            out.push(AnnotItem::segment(cur, it.t_start, ""));
        }
        cur = it.t_end.max(cur);
        out.push(it.clone());
    }
    if dur > cur + 1e-6 {
        out.push(AnnotItem::segment(cur, dur, ""));
    }
    out
}

pub fn write_textgrid_long(a: &Annotation) -> String {
    let dur = a.file_duration;
    let mut s = String::new();
    s.push_str("File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\n");
    let _ = writeln!(s, "xmin = {}", fmt_time(0.0));
    let _ = writeln!(s, "xmax = {}", fmt_time(dur));
    if a.tiers.is_empty() {
        s.push_str("tiers? <absent>\n");
        return s;
    }
    s.push_str("tiers? <exists>\n");
    let _ = writeln!(s, "size = {}", a.tiers.len());
    s.push_str("item []:\n");
    for (ti, tier) in a.tiers.iter().enumerate() {
        let _ = writeln!(s, "    item [{}]:", ti + 1);
        match tier.kind {
            TierKind::Segment => {
                let items = tiled_items(&tier.items, dur);
                s.push_str("        class = \"IntervalTier\"\n");
                let _ = writeln!(s, "        name = {}", tg_quote(&tier.name));
                let _ = writeln!(s, "        xmin = {}", fmt_time(0.0));
                let _ = writeln!(s, "        xmax = {}", fmt_time(dur));
                let _ = writeln!(s, "        intervals: size = {}", items.len());
                for (ii, it) in items.iter().enumerate() {
                    let _ = writeln!(s, "        intervals [{}]:", ii + 1);
                    let _ = writeln!(s, "            xmin = {}", fmt_time(it.t_start));
                    let _ = writeln!(s, "            xmax = {}", fmt_time(it.t_end));
                    let _ = writeln!(s, "            text = {}", tg_quote(&it.label));
                }
            }
            TierKind::Event => {
                s.push_str("        class = \"TextTier\"\n");
                let _ = writeln!(s, "        name = {}", tg_quote(&tier.name));
                let _ = writeln!(s, "        xmin = {}", fmt_time(0.0));
                let _ = writeln!(s, "        xmax = {}", fmt_time(dur));
                let _ = writeln!(s, "        points: size = {}", tier.items.len());
                for (ii, it) in tier.items.iter().enumerate() {
                    let _ = writeln!(s, "        points [{}]:", ii + 1);
                    let _ = writeln!(s, "            number = {}", fmt_time(it.t_start));
                    let _ = writeln!(s, "            mark = {}", tg_quote(&it.label));
                }
            }
        }
    }
    s
}

pub fn write_textgrid_short(a: &Annotation) -> String {
    let dur = a.file_duration;
    let mut s = String::new();
    s.push_str("File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\n");
    let _ = writeln!(s, "{}", fmt_time(0.0));
    let _ = writeln!(s, "{}", fmt_time(dur));
    if a.tiers.is_empty() {
        s.push_str("<absent>\n");
        return s;
    }
    s.push_str("<exists>\n");
    let _ = writeln!(s, "{}", a.tiers.len());
    for tier in &a.tiers {
        match tier.kind {
            TierKind::Segment => {
                let items = tiled_items(&tier.items, dur);
                s.push_str("\"IntervalTier\"\n");
                let _ = writeln!(s, "{}", tg_quote(&tier.name));
                let _ = writeln!(s, "{}", fmt_time(0.0));
                let _ = writeln!(s, "{}", fmt_time(dur));
                let _ = writeln!(s, "{}", items.len());
                for it in &items {
                    let _ = writeln!(s, "{}", fmt_time(it.t_start));
                    let _ = writeln!(s, "{}", fmt_time(it.t_end));
                    let _ = writeln!(s, "{}", tg_quote(&it.label));
                }
            }
            TierKind::Event => {
                s.push_str("\"TextTier\"\n");
                let _ = writeln!(s, "{}", tg_quote(&tier.name));
                let _ = writeln!(s, "{}", fmt_time(0.0));
                let _ = writeln!(s, "{}", fmt_time(dur));
                let _ = writeln!(s, "{}", tier.items.len());
                for it in &tier.items {
                    let _ = writeln!(s, "{}", fmt_time(it.t_start));
                    let _ = writeln!(s, "{}", tg_quote(&it.label));
                }
            }
        }
    }
    s
}

// ---------------------------------------------------------------------------
// XML
// ---------------------------------------------------------------------------

/// Parses the XML tier format: `<annotation><tiers><tier>` with a `name`
/// and an `items` list; items carry `label` plus either `t_start`/`t_end`
/// (segments) or `t` (events). Other elements are ignored.
pub fn parse_xml_annotation(text: &str) -> Result<Annotation> {
    let doc = roxmltree::Document::parse(text.trim_start_matches('\u{feff}'))
        .map_err(|e| Error::Parse(format!("XML: {e}")))?;
    let root = doc.root_element();
    if root.tag_name().name() != "annotation" {
        return Err(Error::Parse(format!(
            "XML: expected root element 'annotation', got '{}'",
            root.tag_name().name()
        )));
    }
    let mut annot = Annotation::new(0.0);
    if let Some(d) = root
        .children()
        .find(|n| n.tag_name().name() == "file_duration")
        .and_then(|n| n.text())
    {
        annot.file_duration = d
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("XML: bad file_duration '{}'", d.trim())))?;
    }
    let Some(tiers_el) = root.children().find(|n| n.tag_name().name() == "tiers") else {
        return Err(Error::Parse("XML: missing 'tiers' element under root".into()));
    };
    for (ti, tier_el) in tiers_el
        .children()
        .filter(|n| n.tag_name().name() == "tier")
        .enumerate()
    {
        let name = tier_el
            .children()
            .find(|n| n.tag_name().name() == "name")
            .and_then(|n| n.text())
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Parse(format!("XML: tier {} has no name", ti + 1)))?;
        let Some(items_el) = tier_el.children().find(|n| n.tag_name().name() == "items") else {
            return Err(Error::Parse(format!("XML: tier {} '{name}' has no items element", ti + 1)));
        };
        let mut kind: Option<TierKind> = None;
        let mut items = vec![];
        for (ii, item_el) in items_el
            .children()
            .filter(|n| n.tag_name().name() == "item")
            .enumerate()
        {
            let ctx = format!("XML: tier '{name}' item {}", ii + 1);
            let field = |tag: &str| -> Option<String> {
                item_el
                    .children()
                    .find(|n| n.tag_name().name() == tag)
                    .and_then(|n| n.text())
                    .map(|s| s.trim().to_string())
            };
            let num = |tag: &str| -> Result<Option<f64>> {
                match field(tag) {
                    None => Ok(None),
                    Some(s) => s
                        .parse()
                        .map(Some)
                        .map_err(|_| Error::Parse(format!("{ctx}: bad {tag} '{s}'"))),
                }
            };
            let label = field("label").unwrap_or_default();
            let item = match (num("t_start")?, num("t_end")?, num("t")?) {
                (Some(t0), Some(t1), None) => {
                    if t1 < t0 {
                        return Err(Error::Parse(format!("{ctx}: t_end {t1} < t_start {t0}")));
                    }
                    set_kind(&mut kind, TierKind::Segment, &ctx)?;
                    AnnotItem::segment(t0, t1, label)
                }
                (None, None, Some(t)) => {
                    set_kind(&mut kind, TierKind::Event, &ctx)?;
                    AnnotItem::event(t, label)
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "{ctx}: needs either t_start and t_end, or t"
                    )))
                }
            };
            items.push(item);
        }
        let mut tier = Tier::new(name, kind.unwrap_or(TierKind::Segment));
        tier.items = items;
        finalize_items(&mut tier);
        annot.push_tier(tier);
    }
    Ok(annot)
}

fn set_kind(kind: &mut Option<TierKind>, want: TierKind, ctx: &str) -> Result<()> {
    match kind {
        None => {
            *kind = Some(want);
            Ok(())
        }
        Some(k) if *k == want => Ok(()),
        Some(_) => Err(Error::Parse(format!("{ctx}: mixes segment and event items"))),
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_xml_annotation(a: &Annotation) -> String {
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<annotation>\n");
    let _ = writeln!(s, "  <file_duration>{}</file_duration>", fmt_time(a.file_duration));
    s.push_str("  <tiers>\n");
    for tier in &a.tiers {
        s.push_str("    <tier>\n");
        let _ = writeln!(s, "      <name>{}</name>", xml_escape(&tier.name));
        s.push_str("      <items>\n");
        for it in &tier.items {
            s.push_str("        <item>\n");
            let _ = writeln!(s, "          <label>{}</label>", xml_escape(&it.label));
            match tier.kind {
                TierKind::Segment => {
                    let _ = writeln!(s, "          <t_start>{}</t_start>", fmt_time(it.t_start));
                    let _ = writeln!(s, "          <t_end>{}</t_end>", fmt_time(it.t_end));
                }
                TierKind::Event => {
                    let _ = writeln!(s, "          <t>{}</t>", fmt_time(it.t_start));
                }
            }
            s.push_str("        </item>\n");
        }
        s.push_str("      </items>\n");
        s.push_str("    </tier>\n");
    }
    s.push_str("  </tiers>\n</annotation>\n");
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotFormat {
    TextGridLong,
    TextGridShort,
    Xml,
}

pub fn write_annotation(a: &Annotation, format: AnnotFormat) -> String {
    match format {
        AnnotFormat::TextGridLong => write_textgrid_long(a),
        AnnotFormat::TextGridShort => write_textgrid_short(a),
        AnnotFormat::Xml => write_xml_annotation(a),
    }
}

/// Parses annotation text, sniffing TextGrid vs XML.
pub fn parse_annotation(text: &str) -> Result<Annotation> {
    let head = text.trim_start_matches('\u{feff}').trim_start();
    if head.starts_with('<') {
        parse_xml_annotation(text)
    } else {
        parse_textgrid(text)
    }
}

// ---------------------------------------------------------------------------
// Event expansion
// ---------------------------------------------------------------------------

/// Expands an event tier into segments, reading each event as the right
/// boundary of a segment. Pause-labeled events produce no segment; the next
/// segment starts at the pause stamp. When `chunks` is given, segments are
/// clipped to chunk spans so they never cross a chunk boundary.
pub fn expand_events_to_global_segments(
    tier: &Tier,
    chunks: Option<&Tier>,
    pause_label: &str,
) -> Tier {
    let mut out = Tier::new(tier.name.clone(), TierKind::Segment);
    out.channel = tier.channel;
    let mut segs = vec![];
    let mut cur = 0.0;
    for it in &tier.items {
        if is_pause_label(&it.label, pause_label) {
            cur = it.t_end;
            continue;
        }
        if it.t_end > cur + 1e-9 {
            segs.push(AnnotItem::segment(cur, it.t_end, it.label.clone()));
        }
        cur = it.t_end;
    }
    if let Some(ch) = chunks {
        let spans: Vec<(f64, f64)> = ch
            .items
            .iter()
            .filter(|c| !is_pause_label(&c.label, pause_label))
            .map(|c| (c.t_start, c.t_end))
            .collect();
        if !spans.is_empty() {
            let mut clipped = vec![];
            for s in &segs {
                for &(cs, ce) in &spans {
                    let a = s.t_start.max(cs);
                    let b = s.t_end.min(ce);
                    if b - a > 1e-9 {
                        clipped.push(AnnotItem::segment(a, b, s.label.clone()));
                    }
                }
            }
            clipped.sort_by(|a, b| a.t_start.partial_cmp(&b.t_start).unwrap());
            segs = clipped;
        }
    }
    out.items = segs;
    out
}
