//! Configuration tree: JSON with every leaf defaulted, flexible scalar
//! coercions (0/1 as booleans, single string as one-element list), unknown
//! key warnings, range validation, navigation dependency checks, and
//! channel expansion of tier name stems.

use crate::error::{Error, Result};
use serde::de::Deserializer;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

// --- flexible scalar coercions ---------------------------------------------

fn de_flag<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum V {
        B(bool),
        N(f64),
        S(String),
    }
    Ok(match V::deserialize(d)? {
        V::B(b) => b,
        V::N(n) => n != 0.0,
        V::S(s) => !matches!(s.trim(), "" | "0" | "false" | "False"),
    })
}

fn de_strlist<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum V {
        One(String),
        Many(Vec<String>),
    }
    Ok(match V::deserialize(d)? {
        V::One(s) if s.trim().is_empty() => vec![],
        V::One(s) => vec![s],
        V::Many(v) => v,
    })
}

fn de_floatlist<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum V {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match V::deserialize(d)? {
        V::One(x) => vec![x],
        V::Many(v) => v,
    })
}

fn de_chanmap<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<BTreeMap<String, usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum V {
        N(usize),
        S(String),
    }
    let raw: BTreeMap<String, V> = BTreeMap::deserialize(d)?;
    let mut out = BTreeMap::new();
    for (k, v) in raw {
        let idx = match v {
            V::N(n) => n,
            V::S(s) => s
                .trim()
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("channel index '{s}' is not an integer")))?,
        };
        out.insert(k, idx);
    }
    Ok(out)
}

fn de_winparam<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum V {
        N(f64),
        S(String),
        Null,
    }
    Ok(match Option::<V>::deserialize(d)? {
        None | Some(V::Null) => None,
        Some(V::N(n)) => Some(n),
        Some(V::S(s)) => s.trim().parse().ok(),
    })
}

macro_rules! default_fns {
    ($($name:ident: $ty:ty = $val:expr;)*) => {
        $(fn $name() -> $ty { $val })*
    };
}

default_fns! {
    d_true: bool = true;
    d_fs: f64 = 100.0;
    d_stm: String = "copasul".into();
    d_sep_comma: String = ",".into();
    d_underscore: String = "_".into();
    d_f0_src: String = "f0".into();
    d_wav: String = "wav".into();
    d_tab: String = "tab".into();
    d_textgrid: String = "TextGrid".into();
    d_label_x: String = "x".into();
    d_pau: String = "<P>".into();
    d_vow: String = "[AEIOUYaeiouy29{]".into();
    d_chunk_stm: String = "chunk".into();
    d_syl_stm: String = "syl".into();
    d_glob_stm: String = "glob".into();
    d_acc_stm: String = "acc".into();
    d_base_prct: f64 = 5.0;
    d_skip: String = "skip".into();
    d_nrm_win: f64 = 0.6;
    d_point_win: f64 = 0.3;
    d_out_f: f64 = 2.0;
    d_mean: String = "mean".into();
    d_sgolay: String = "sgolay".into();
    d_ord3: usize = 3;
    d_win7: usize = 7;
    d_e_rel_chunk: f64 = 0.1;
    d_low: String = "low".into();
    d_f8000: Vec<f64> = vec![8000.0];
    d_ord5: usize = 5;
    d_chunk_l: f64 = 0.1524;
    d_l_ref5: f64 = 5.0;
    d_min03: f64 = 0.3;
    d_neg1: i64 = -1;
    d_d_min: f64 = 0.05;
    d_e_min: f64 = 0.16;
    d_e_rel_syl: f64 = 1.07;
    d_band: String = "band".into();
    d_f_band: Vec<f64> = vec![200.0, 4000.0];
    d_syl_l: f64 = 0.08;
    d_syl_lref: f64 = 0.15;
    d_seed_prct: String = "seed_prct".into();
    d_ort: String = "ORT".into();
    d_heur_min_l: f64 = 0.1;
    d_abs: String = "abs".into();
    d_min_l_glob: f64 = 0.5;
    d_prct95: f64 = 95.0;
    d_batch: String = "batch".into();
    d_silhouette: String = "silhouette".into();
    d_max: String = "max".into();
    d_max_l_na: f64 = 0.1;
    d_min_l_a: f64 = 0.6;
    d_min_l_loc: f64 = 0.2;
    d_prct90: f64 = 90.0;
    d_decl_win: f64 = 0.1;
    d_minmax: String = "minmax".into();
    d_rng01: Vec<f64> = vec![0.0, 1.0];
    d_rng11: Vec<f64> = vec![-1.0, 1.0];
    d_prct_bl: f64 = 10.0;
    d_prct_tl: f64 = 90.0;
    d_ml: String = "ml".into();
    d_bnd_win: f64 = 1.0;
    d_alpha: f64 = 0.95;
    d_none: String = "none".into();
    d_time: String = "time".into();
    d_fneg1: Vec<f64> = vec![-1.0];
    d_wneg1: f64 = -1.0;
    d_gnl_win: f64 = 0.3;
    d_sts: f64 = 0.01;
    d_en_win: f64 = 0.05;
    d_hamming: String = "hamming".into();
    d_ub10: f64 = 10.0;
    d_nsm3: usize = 3;
    d_rb1: f64 = 1.0;
    d_kaiser: String = "kaiser".into();
    d_one: Option<f64> = Some(1.0);
    d_fac_max: f64 = 1.3;
    d_t_max: f64 = 0.02;
    d_t_min: f64 = 0.0001;
    d_nsamples: usize = 1000;
    d_quantile: f64 = 0.3;
    d_meanshift: String = "meanShift".into();
    d_maxiter: usize = 300;
    d_ncluster_glob: usize = 3;
    d_ncluster_loc: usize = 5;
    d_ninit: usize = 10;
    d_minbin: usize = 1;
    d_empty_val: serde_json::Value = serde_json::Value::Object(Default::default());
}

// --- tree -------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct Config {
    #[serde(deserialize_with = "de_flag")]
    pub do_preproc: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_augment_chunk: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_augment_syl: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_augment_glob: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_augment_loc: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_styl_glob: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_styl_loc: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_styl_loc_ext: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_styl_gnl_f0: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_styl_gnl_en: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_styl_bnd: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_styl_bnd_win: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_styl_bnd_trend: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_styl_rhy_f0: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_styl_rhy_en: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_styl_voice: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_clst_glob: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_clst_loc: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_export: bool,
    #[serde(deserialize_with = "de_flag")]
    pub do_plot: bool,
    #[serde(deserialize_with = "de_flag")]
    pub from_scratch: bool,
    #[serde(deserialize_with = "de_flag")]
    pub overwrite_config: bool,
}

#[allow(clippy::struct_field_names)]
#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct FileDirCfg {
    pub dir: String,
    pub ext: String,
    pub typ: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ExportCfg {
    pub dir: String,
    #[serde(rename = "stm", default = "d_stm")]
    pub stm: String,
    #[serde(deserialize_with = "de_flag", default = "d_true")]
    pub csv: bool,
    #[serde(default = "d_sep_comma")]
    pub sep: String,
    #[serde(deserialize_with = "de_flag")]
    pub summary: bool,
    #[serde(deserialize_with = "de_flag")]
    pub f0_preproc: bool,
    #[serde(deserialize_with = "de_flag")]
    pub f0_residual: bool,
    #[serde(deserialize_with = "de_flag")]
    pub f0_resyn: bool,
    #[serde(deserialize_with = "de_flag")]
    pub fullpath: bool,
}

impl Default for ExportCfg {
    fn default() -> Self {
        ExportCfg {
            dir: String::new(),
            stm: d_stm(),
            csv: true,
            sep: d_sep_comma(),
            summary: false,
            f0_preproc: false,
            f0_residual: false,
            f0_resyn: false,
            fullpath: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PicCfg {
    pub dir: String,
    #[serde(default = "d_stm")]
    pub stm: String,
}

impl Default for PicCfg {
    fn default() -> Self {
        PicCfg { dir: String::new(), stm: d_stm() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GrpCfg {
    #[serde(deserialize_with = "de_strlist")]
    pub lab: Vec<String>,
    #[serde(default = "d_underscore")]
    pub sep: String,
    #[serde(default = "d_f0_src")]
    pub src: String,
}

impl Default for GrpCfg {
    fn default() -> Self {
        GrpCfg { lab: vec![], sep: d_underscore(), src: d_f0_src() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LabelCfg {
    #[serde(default = "d_label_x")]
    pub chunk: String,
    #[serde(default = "d_pau")]
    pub pau: String,
    #[serde(default = "d_label_x")]
    pub syl: String,
}

impl Default for LabelCfg {
    fn default() -> Self {
        LabelCfg { chunk: d_label_x(), pau: d_pau(), syl: d_label_x() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct TierCfg {
    #[serde(deserialize_with = "de_strlist")]
    pub tier: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct LocTierCfg {
    #[serde(deserialize_with = "de_strlist")]
    pub tier_acc: Vec<String>,
    #[serde(deserialize_with = "de_strlist")]
    pub tier_ag: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct RhyTierCfg {
    #[serde(deserialize_with = "de_strlist")]
    pub tier: Vec<String>,
    #[serde(deserialize_with = "de_strlist")]
    pub tier_rate: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PhoCfg {
    #[serde(deserialize_with = "de_strlist")]
    pub tier: Vec<String>,
    #[serde(default = "d_vow")]
    pub vow: String,
}

impl Default for PhoCfg {
    fn default() -> Self {
        PhoCfg { tier: vec![], vow: d_vow() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FsysAugChunkCfg {
    #[serde(default = "d_chunk_stm")]
    pub tier_out_stm: String,
}

impl Default for FsysAugChunkCfg {
    fn default() -> Self {
        FsysAugChunkCfg { tier_out_stm: d_chunk_stm() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FsysAugSylCfg {
    #[serde(default = "d_syl_stm")]
    pub tier_out_stm: String,
    /// Empty means: the chunk augmentation output stem.
    #[serde(deserialize_with = "de_strlist")]
    pub tier_parent: Vec<String>,
}

impl Default for FsysAugSylCfg {
    fn default() -> Self {
        FsysAugSylCfg { tier_out_stm: d_syl_stm(), tier_parent: vec![] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FsysAugGlobCfg {
    #[serde(default = "d_glob_stm")]
    pub tier_out_stm: String,
    /// Empty means: the chunk augmentation output stem.
    #[serde(deserialize_with = "de_strlist")]
    pub tier_parent: Vec<String>,
    /// Boundary candidate tier; empty means the syllable-boundary output.
    #[serde(deserialize_with = "de_strlist")]
    pub tier: Vec<String>,
}

impl Default for FsysAugGlobCfg {
    fn default() -> Self {
        FsysAugGlobCfg { tier_out_stm: d_glob_stm(), tier_parent: vec![], tier: vec![] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FsysAugLocCfg {
    #[serde(default = "d_acc_stm")]
    pub tier_out_stm: String,
    #[serde(deserialize_with = "de_strlist")]
    pub tier_parent: Vec<String>,
    #[serde(deserialize_with = "de_strlist")]
    pub tier_acc: Vec<String>,
    #[serde(deserialize_with = "de_strlist")]
    pub tier_ag: Vec<String>,
}

impl Default for FsysAugLocCfg {
    fn default() -> Self {
        FsysAugLocCfg {
            tier_out_stm: d_acc_stm(),
            tier_parent: vec![],
            tier_acc: vec![],
            tier_ag: vec![],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct FsysAugmentCfg {
    pub chunk: FsysAugChunkCfg,
    pub syl: FsysAugSylCfg,
    pub glob: FsysAugGlobCfg,
    pub loc: FsysAugLocCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Fsys {
    pub aud: FileDirCfg,
    pub f0: FileDirCfg,
    pub pulse: FileDirCfg,
    pub annot: FileDirCfg,
    pub export: ExportCfg,
    pub pic: PicCfg,
    pub grp: GrpCfg,
    pub label: LabelCfg,
    /// Tier name -> 1-based channel index.
    #[serde(deserialize_with = "de_chanmap")]
    pub channel: BTreeMap<String, usize>,
    pub chunk: TierCfg,
    pub glob: TierCfg,
    pub loc: LocTierCfg,
    pub bnd: TierCfg,
    pub gnl_f0: TierCfg,
    pub gnl_en: TierCfg,
    pub rhy_f0: RhyTierCfg,
    pub rhy_en: RhyTierCfg,
    pub voice: TierCfg,
    pub pho: PhoCfg,
    pub augment: FsysAugmentCfg,
}

impl Default for Fsys {
    fn default() -> Self {
        Fsys {
            aud: FileDirCfg { dir: String::new(), ext: String::new(), typ: d_wav() },
            f0: FileDirCfg { dir: String::new(), ext: String::new(), typ: d_tab() },
            pulse: FileDirCfg { dir: String::new(), ext: String::new(), typ: d_tab() },
            annot: FileDirCfg { dir: String::new(), ext: String::new(), typ: d_textgrid() },
            export: ExportCfg::default(),
            pic: PicCfg::default(),
            grp: GrpCfg::default(),
            label: LabelCfg::default(),
            channel: BTreeMap::new(),
            chunk: TierCfg::default(),
            glob: TierCfg::default(),
            loc: LocTierCfg::default(),
            bnd: TierCfg::default(),
            gnl_f0: TierCfg::default(),
            gnl_en: TierCfg::default(),
            rhy_f0: RhyTierCfg::default(),
            rhy_en: RhyTierCfg::default(),
            voice: TierCfg::default(),
            pho: PhoCfg::default(),
            augment: FsysAugmentCfg::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct OutlierCfg {
    #[serde(default = "d_out_f")]
    pub f: f64,
    #[serde(default = "d_mean")]
    pub m: String,
}

impl Default for OutlierCfg {
    fn default() -> Self {
        OutlierCfg { f: d_out_f(), m: d_mean() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SmoothCfg {
    #[serde(default = "d_sgolay")]
    pub mtd: String,
    #[serde(default = "d_ord3")]
    pub ord: usize,
    #[serde(default = "d_win7")]
    pub win: usize,
}

impl Default for SmoothCfg {
    fn default() -> Self {
        SmoothCfg { mtd: d_sgolay(), ord: d_ord3(), win: d_win7() }
    }
}

/// Per-feature-set window overrides.
#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct WinOverrideCfg {
    pub point_win: Option<f64>,
    pub nrm_win: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Preproc {
    #[serde(default = "d_base_prct")]
    pub base_prct: f64,
    /// Channel index (string, 1-based) -> grouping label whose levels get
    /// separate base values.
    pub base_prct_grp: BTreeMap<String, String>,
    #[serde(default = "d_skip")]
    pub loc_align: String,
    #[serde(deserialize_with = "de_flag")]
    pub loc_sync: bool,
    #[serde(default = "d_nrm_win")]
    pub nrm_win: f64,
    pub out: OutlierCfg,
    #[serde(default = "d_point_win")]
    pub point_win: f64,
    pub smooth: SmoothCfg,
    #[serde(deserialize_with = "de_flag", default = "d_true")]
    pub st: bool,
    pub loc: WinOverrideCfg,
    pub gnl_f0: WinOverrideCfg,
    pub gnl_en: WinOverrideCfg,
    pub rhy_f0: WinOverrideCfg,
    pub rhy_en: WinOverrideCfg,
}

impl Default for Preproc {
    fn default() -> Self {
        Preproc {
            base_prct: d_base_prct(),
            base_prct_grp: BTreeMap::new(),
            loc_align: d_skip(),
            loc_sync: false,
            nrm_win: d_nrm_win(),
            out: OutlierCfg::default(),
            point_win: d_point_win(),
            smooth: SmoothCfg::default(),
            st: true,
            loc: WinOverrideCfg::default(),
            gnl_f0: WinOverrideCfg::default(),
            gnl_en: WinOverrideCfg::default(),
            rhy_f0: WinOverrideCfg::default(),
            rhy_en: WinOverrideCfg::default(),
        }
    }
}

impl Preproc {
    fn set_override(&self, set: &str) -> Option<&WinOverrideCfg> {
        match set {
            "loc" => Some(&self.loc),
            "gnl_f0" => Some(&self.gnl_f0),
            "gnl_en" => Some(&self.gnl_en),
            "rhy_f0" => Some(&self.rhy_f0),
            "rhy_en" => Some(&self.rhy_en),
            _ => None,
        }
    }
    /// Event-to-segment window length for a feature set.
    pub fn point_win_for(&self, set: &str) -> f64 {
        self.set_override(set).and_then(|o| o.point_win).unwrap_or(self.point_win)
    }
    /// Normalization window length for a feature set.
    pub fn nrm_win_for(&self, set: &str) -> f64 {
        self.set_override(set).and_then(|o| o.nrm_win).unwrap_or(self.nrm_win)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FltCfg {
    #[serde(default = "d_low")]
    pub btype: String,
    #[serde(deserialize_with = "de_floatlist", default = "d_f8000")]
    pub f: Vec<f64>,
    #[serde(default = "d_ord5")]
    pub ord: usize,
}

impl Default for FltCfg {
    fn default() -> Self {
        FltCfg { btype: d_low(), f: d_f8000(), ord: d_ord5() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AugChunkCfg {
    #[serde(default = "d_e_rel_chunk")]
    pub e_rel: f64,
    #[serde(deserialize_with = "de_flag", default = "d_true")]
    pub fbnd: bool,
    pub flt: FltCfg,
    #[serde(default = "d_chunk_l")]
    pub l: f64,
    #[serde(default = "d_l_ref5")]
    pub l_ref: f64,
    pub margin: f64,
    #[serde(default = "d_min03")]
    pub min_chunk_l: f64,
    #[serde(default = "d_min03")]
    pub min_pau_l: f64,
    #[serde(default = "d_neg1")]
    pub n: i64,
}

impl Default for AugChunkCfg {
    fn default() -> Self {
        AugChunkCfg {
            e_rel: d_e_rel_chunk(),
            fbnd: true,
            flt: FltCfg::default(),
            l: d_chunk_l(),
            l_ref: d_l_ref5(),
            margin: 0.0,
            min_chunk_l: d_min03(),
            min_pau_l: d_min03(),
            n: d_neg1(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AugSylCfg {
    #[serde(default = "d_d_min")]
    pub d_min: f64,
    #[serde(default = "d_e_min")]
    pub e_min: f64,
    #[serde(default = "d_e_rel_syl")]
    pub e_rel: f64,
    pub flt: FltCfg,
    #[serde(default = "d_syl_l")]
    pub l: f64,
    #[serde(default = "d_syl_lref")]
    pub l_ref: f64,
}

impl Default for AugSylCfg {
    fn default() -> Self {
        AugSylCfg {
            d_min: d_d_min(),
            e_min: d_e_min(),
            e_rel: d_e_rel_syl(),
            flt: FltCfg { btype: d_band(), f: d_f_band(), ord: d_ord5() },
            l: d_syl_l(),
            l_ref: d_syl_lref(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AugGlobCfg {
    #[serde(default = "d_seed_prct")]
    pub cntr_mtd: String,
    #[serde(default = "d_ort")]
    pub heuristics: String,
    /// Minimum word length for the ORT heuristic; boundaries after shorter
    /// words are rejected.
    #[serde(default = "d_heur_min_l")]
    pub heuristic_min_l: f64,
    #[serde(default = "d_abs")]
    pub measure: String,
    #[serde(default = "d_min_l_glob")]
    pub min_l: f64,
    #[serde(default = "d_prct95")]
    pub prct: f64,
    #[serde(default = "d_batch")]
    pub unit: String,
    /// Feature selection and user weights: featset -> register -> feature,
    /// plus the scalar `pho` branch.
    #[serde(default = "d_empty_val")]
    pub wgt: serde_json::Value,
    #[serde(default = "d_silhouette")]
    pub wgt_mtd: String,
}

impl Default for AugGlobCfg {
    fn default() -> Self {
        AugGlobCfg {
            cntr_mtd: d_seed_prct(),
            heuristics: d_ort(),
            heuristic_min_l: d_heur_min_l(),
            measure: d_abs(),
            min_l: d_min_l_glob(),
            prct: d_prct95(),
            unit: d_batch(),
            wgt: d_empty_val(),
            wgt_mtd: d_silhouette(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AugLocCfg {
    #[serde(default = "d_max")]
    pub acc_select: String,
    #[serde(default = "d_max")]
    pub ag_select: String,
    #[serde(default = "d_seed_prct")]
    pub cntr_mtd: String,
    #[serde(default = "d_ort")]
    pub heuristics: String,
    #[serde(default = "d_max_l_na")]
    pub max_l_na: f64,
    #[serde(default = "d_abs")]
    pub measure: String,
    #[serde(default = "d_min_l_a")]
    pub min_l_a: f64,
    #[serde(default = "d_min_l_loc")]
    pub min_l: f64,
    #[serde(default = "d_prct90")]
    pub prct: f64,
    #[serde(default = "d_batch")]
    pub unit: String,
    #[serde(default = "d_empty_val")]
    pub wgt: serde_json::Value,
    #[serde(default = "d_silhouette")]
    pub wgt_mtd: String,
}

impl Default for AugLocCfg {
    fn default() -> Self {
        AugLocCfg {
            acc_select: d_max(),
            ag_select: d_max(),
            cntr_mtd: d_seed_prct(),
            heuristics: d_ort(),
            max_l_na: d_max_l_na(),
            measure: d_abs(),
            min_l_a: d_min_l_a(),
            min_l: d_min_l_loc(),
            prct: d_prct90(),
            unit: d_batch(),
            wgt: d_empty_val(),
            wgt_mtd: d_silhouette(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct Augment {
    pub chunk: AugChunkCfg,
    pub syl: AugSylCfg,
    pub glob: AugGlobCfg,
    pub loc: AugLocCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct NrmCfg {
    #[serde(default = "d_minmax")]
    pub mtd: String,
    #[serde(deserialize_with = "de_floatlist", default = "d_rng01")]
    pub rng: Vec<f64>,
}

impl Default for NrmCfg {
    fn default() -> Self {
        NrmCfg { mtd: d_minmax(), rng: d_rng01() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PrctCfg {
    #[serde(default = "d_prct_bl")]
    pub bl: f64,
    #[serde(default = "d_prct_tl")]
    pub tl: f64,
}

impl Default for PrctCfg {
    fn default() -> Self {
        PrctCfg { bl: d_prct_bl(), tl: d_prct_tl() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct StylGlobCfg {
    #[serde(default = "d_decl_win")]
    pub decl_win: f64,
    pub nrm: NrmCfg,
    pub prct: PrctCfg,
}

impl Default for StylGlobCfg {
    fn default() -> Self {
        StylGlobCfg { decl_win: d_decl_win(), nrm: NrmCfg::default(), prct: PrctCfg::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct StylLocCfg {
    pub nrm: NrmCfg,
    #[serde(default = "d_ord3")]
    pub ord: usize,
}

impl Default for StylLocCfg {
    fn default() -> Self {
        StylLocCfg { nrm: NrmCfg { mtd: d_minmax(), rng: d_rng11() }, ord: d_ord3() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct StylBndCfg {
    #[serde(deserialize_with = "de_flag", default = "d_true")]
    pub cross_chunk: bool,
    #[serde(default = "d_decl_win")]
    pub decl_win: f64,
    pub nrm: NrmCfg,
    pub prct: PrctCfg,
    #[serde(deserialize_with = "de_flag")]
    pub residual: bool,
    #[serde(default = "d_bnd_win")]
    pub win: f64,
}

impl Default for StylBndCfg {
    fn default() -> Self {
        StylBndCfg {
            cross_chunk: true,
            decl_win: d_decl_win(),
            nrm: NrmCfg::default(),
            prct: PrctCfg::default(),
            residual: false,
            win: d_bnd_win(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SbCfg {
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_none")]
    pub btype: String,
    #[serde(default = "d_time")]
    pub domain: String,
    #[serde(deserialize_with = "de_floatlist", default = "d_fneg1")]
    pub f: Vec<f64>,
    #[serde(default = "d_wneg1")]
    pub win: f64,
}

impl Default for SbCfg {
    fn default() -> Self {
        SbCfg { alpha: d_alpha(), btype: d_none(), domain: d_time(), f: d_fneg1(), win: d_wneg1() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct StylGnlCfg {
    pub sb: SbCfg,
    #[serde(default = "d_gnl_win")]
    pub win: f64,
}

impl Default for StylGnlCfg {
    fn default() -> Self {
        StylGnlCfg { sb: SbCfg::default(), win: d_gnl_win() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct StylGnlEnCfg {
    /// Deprecated alias of styl:gnl:sb:alpha.
    pub alpha: Option<f64>,
    #[serde(default = "d_sts")]
    pub sts: f64,
    #[serde(default = "d_en_win")]
    pub win: f64,
    #[serde(default = "d_hamming")]
    pub wintyp: String,
    #[serde(deserialize_with = "de_winparam")]
    pub winparam: Option<f64>,
}

impl Default for StylGnlEnCfg {
    fn default() -> Self {
        StylGnlEnCfg {
            alpha: None,
            sts: d_sts(),
            win: d_en_win(),
            wintyp: d_hamming(),
            winparam: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RhyWgtCfg {
    #[serde(default = "d_rb1")]
    pub rb: f64,
}

impl Default for RhyWgtCfg {
    fn default() -> Self {
        RhyWgtCfg { rb: d_rb1() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RhyCfg {
    pub lb: f64,
    #[serde(default = "d_nsm3")]
    pub nsm: usize,
    #[serde(deserialize_with = "de_flag")]
    pub rmo: bool,
    #[serde(default = "d_ub10")]
    pub ub: f64,
    pub wgt: RhyWgtCfg,
    #[serde(deserialize_with = "de_winparam", default = "d_one")]
    pub winparam: Option<f64>,
    #[serde(default = "d_kaiser")]
    pub wintyp: String,
}

impl Default for RhyCfg {
    fn default() -> Self {
        RhyCfg {
            lb: 0.0,
            nsm: d_nsm3(),
            rmo: false,
            ub: d_ub10(),
            wgt: RhyWgtCfg::default(),
            winparam: d_one(),
            wintyp: d_kaiser(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SigCfg {
    #[serde(deserialize_with = "de_flag", default = "d_true")]
    pub scale: bool,
    #[serde(default = "d_sts")]
    pub sts: f64,
    #[serde(default = "d_en_win")]
    pub win: f64,
    #[serde(default = "d_hamming")]
    pub wintyp: String,
    #[serde(deserialize_with = "de_winparam")]
    pub winparam: Option<f64>,
}

impl Default for SigCfg {
    fn default() -> Self {
        SigCfg { scale: true, sts: d_sts(), win: d_en_win(), wintyp: d_hamming(), winparam: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct StylRhyF0Cfg {
    pub rhy: RhyCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct StylRhyEnCfg {
    pub rhy: RhyCfg,
    pub sig: SigCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct JitCfg {
    #[serde(default = "d_fac_max")]
    pub fac_max: f64,
    #[serde(default = "d_t_max")]
    pub t_max: f64,
    #[serde(default = "d_t_min")]
    pub t_min: f64,
}

impl Default for JitCfg {
    fn default() -> Self {
        JitCfg { fac_max: d_fac_max(), t_max: d_t_max(), t_min: d_t_min() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct StylVoiceCfg {
    pub jit: JitCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Styl {
    pub glob: StylGlobCfg,
    pub loc: StylLocCfg,
    #[serde(default = "d_ml")]
    pub register: String,
    pub bnd: StylBndCfg,
    pub gnl: StylGnlCfg,
    pub gnl_en: StylGnlEnCfg,
    pub rhy_f0: StylRhyF0Cfg,
    pub rhy_en: StylRhyEnCfg,
    pub voice: StylVoiceCfg,
}

impl Default for Styl {
    fn default() -> Self {
        Styl {
            glob: StylGlobCfg::default(),
            loc: StylLocCfg::default(),
            register: d_ml(),
            bnd: StylBndCfg::default(),
            gnl: StylGnlCfg::default(),
            gnl_en: StylGnlEnCfg::default(),
            rhy_f0: StylRhyF0Cfg::default(),
            rhy_en: StylRhyEnCfg::default(),
            voice: StylVoiceCfg::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EstBwCfg {
    #[serde(default = "d_nsamples")]
    pub n_samples: usize,
    #[serde(default = "d_quantile")]
    pub quantile: f64,
}

impl Default for EstBwCfg {
    fn default() -> Self {
        EstBwCfg { n_samples: d_nsamples(), quantile: d_quantile() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct KMeansCfg {
    #[serde(default = "d_meanshift")]
    pub init: String,
    #[serde(default = "d_maxiter")]
    pub max_iter: usize,
    #[serde(default = "d_ncluster_glob")]
    pub n_cluster: usize,
    #[serde(default = "d_ninit")]
    pub n_init: usize,
}

impl Default for KMeansCfg {
    fn default() -> Self {
        KMeansCfg {
            init: d_meanshift(),
            max_iter: d_maxiter(),
            n_cluster: d_ncluster_glob(),
            n_init: d_ninit(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct MeanShiftCfg {
    pub bandwidth: f64,
    #[serde(deserialize_with = "de_flag")]
    pub bin_seeding: bool,
    #[serde(default = "d_minbin")]
    pub min_bin_freq: usize,
}

impl Default for MeanShiftCfg {
    fn default() -> Self {
        MeanShiftCfg { bandwidth: 0.0, bin_seeding: false, min_bin_freq: d_minbin() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ClstSetCfg {
    pub estimate_bandwidth: EstBwCfg,
    #[serde(rename = "kMeans")]
    pub k_means: KMeansCfg,
    #[serde(rename = "meanShift")]
    pub mean_shift: MeanShiftCfg,
    #[serde(default = "d_meanshift")]
    pub mtd: String,
}

impl Default for ClstSetCfg {
    fn default() -> Self {
        ClstSetCfg {
            estimate_bandwidth: EstBwCfg::default(),
            k_means: KMeansCfg::default(),
            mean_shift: MeanShiftCfg::default(),
            mtd: d_meanshift(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Clst {
    pub glob: ClstSetCfg,
    pub loc: ClstSetCfg,
}

impl Default for Clst {
    fn default() -> Self {
        let mut loc = ClstSetCfg::default();
        loc.k_means.n_cluster = d_ncluster_loc();
        Clst { glob: ClstSetCfg::default(), loc }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ConfigTree {
    #[serde(default = "d_fs")]
    pub fs: f64,
    pub navigate: Config,
    pub fsys: Fsys,
    pub preproc: Preproc,
    pub augment: Augment,
    pub styl: Styl,
    pub clst: Clst,
    /// Parsed but unused; plotting is not part of this tool.
    #[serde(default = "d_empty_val")]
    pub plot: serde_json::Value,
}

impl Default for ConfigTree {
    fn default() -> Self {
        ConfigTree {
            fs: d_fs(),
            navigate: Config::default(),
            fsys: Fsys::default(),
            preproc: Preproc::default(),
            augment: Augment::default(),
            styl: Styl::default(),
            clst: Clst::default(),
            plot: d_empty_val(),
        }
    }
}

// --- loading ----------------------------------------------------------------

/// Parses a config JSON string into the defaulted tree. Returns the tree and
/// warnings (unknown keys outside open branches, deprecations).
pub fn parse_config(text: &str) -> Result<(ConfigTree, Vec<String>)> {
    let raw: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
    if !raw.is_object() {
        return Err(Error::Config("config root must be a JSON object".into()));
    }
    let de = serde_path_to_error::deserialize::<_, ConfigTree>(raw.clone());
    let mut cfg = de.map_err(|e| {
        Error::Config(format!("config key '{}': {}", e.path(), e.inner()))
    })?;
    let mut warnings = unknown_key_warnings(&raw)?;
    if let Some(a) = cfg.styl.gnl_en.alpha.take() {
        warnings.push(
            "styl:gnl_en:alpha is deprecated; value moved to styl:gnl:sb:alpha".to_string(),
        );
        cfg.styl.gnl.sb.alpha = a;
    }
    Ok((cfg, warnings))
}

pub fn load_config(path: &Path) -> Result<(ConfigTree, Vec<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Branches whose keys are user-defined rather than schema-defined.
const OPEN_BRANCHES: &[&str] = &[
    "fsys:channel",
    "preproc:base_prct_grp",
    "augment:glob:wgt",
    "augment:loc:wgt",
    "plot",
];

fn unknown_key_warnings(user: &serde_json::Value) -> Result<Vec<String>> {
    let known = serde_json::to_value(ConfigTree::default()).expect("default tree serializes");
    let mut warnings = vec![];
    walk_unknown(user, &known, String::new(), &mut warnings)?;
    Ok(warnings)
}

fn walk_unknown(
    user: &serde_json::Value,
    known: &serde_json::Value,
    path: String,
    warnings: &mut Vec<String>,
) -> Result<()> {
    if OPEN_BRANCHES.contains(&path.as_str()) {
        return Ok(());
    }
    let (Some(uo), Some(ko)) = (user.as_object(), known.as_object()) else {
        return Ok(());
    };
    for (k, v) in uo {
        let p = if path.is_empty() { k.clone() } else { format!("{path}:{k}") };
        match ko.get(k) {
            Some(kv) => walk_unknown(v, kv, p, warnings)?,
            None => {
                if path == "navigate" {
                    return Err(Error::Config(format!("unknown navigation flag '{p}'")));
                }
                warnings.push(format!("unknown config key '{p}' ignored"));
            }
        }
    }
    Ok(())
}

// --- validation -------------------------------------------------------------

fn check_in(errors: &mut Vec<String>, key: &str, val: &str, allowed: &[&str]) {
    if !allowed.contains(&val) {
        errors.push(format!("{key}: '{val}' not in {allowed:?}"));
    }
}

fn check_prct(errors: &mut Vec<String>, key: &str, v: f64) {
    if !(0.0..=100.0).contains(&v) {
        errors.push(format!("{key}: percentile {v} outside [0, 100]"));
    }
}

fn check_pos(errors: &mut Vec<String>, key: &str, v: f64) {
    if v <= 0.0 || !v.is_finite() {
        errors.push(format!("{key}: must be > 0, got {v}"));
    }
}

fn check_rng(errors: &mut Vec<String>, key: &str, rng: &[f64]) {
    if rng.len() != 2 || rng[0] >= rng[1] {
        errors.push(format!("{key}: needs [lo, hi] with lo < hi, got {rng:?}"));
    }
}

/// Validates ranges and closed option sets. Returns errors; configuration
/// with any error must be rejected.
pub fn validate(cfg: &ConfigTree) -> Vec<String> {
    let mut e = vec![];
    if cfg.fs != 100.0 {
        e.push(format!("fs: only the 100 Hz f0 grid is supported, got {}", cfg.fs));
    }
    check_in(&mut e, "fsys:aud:typ", &cfg.fsys.aud.typ, &["wav"]);
    check_in(&mut e, "fsys:f0:typ", &cfg.fsys.f0.typ, &["tab"]);
    check_in(&mut e, "fsys:pulse:typ", &cfg.fsys.pulse.typ, &["tab"]);
    check_in(&mut e, "fsys:annot:typ", &cfg.fsys.annot.typ, &["TextGrid", "xml"]);
    check_in(&mut e, "fsys:grp:src", &cfg.fsys.grp.src, &["f0", "annot", "aud"]);

    check_prct(&mut e, "preproc:base_prct", cfg.preproc.base_prct);
    check_in(&mut e, "preproc:out:m", &cfg.preproc.out.m, &["mean", "median", "fence"]);
    check_in(&mut e, "preproc:smooth:mtd", &cfg.preproc.smooth.mtd, &["sgolay", "med"]);
    check_in(&mut e, "preproc:loc_align", &cfg.preproc.loc_align, &["skip", "left", "right"]);
    check_pos(&mut e, "preproc:nrm_win", cfg.preproc.nrm_win);
    check_pos(&mut e, "preproc:point_win", cfg.preproc.point_win);
    if cfg.preproc.smooth.win < 1 {
        e.push("preproc:smooth:win: must be >= 1".into());
    }
    for ci in cfg.preproc.base_prct_grp.keys() {
        if ci.parse::<usize>().is_err() {
            e.push(format!("preproc:base_prct_grp: channel key '{ci}' is not an integer"));
        }
    }

    for (key, flt) in [
        ("augment:chunk:flt", &cfg.augment.chunk.flt),
        ("augment:syl:flt", &cfg.augment.syl.flt),
    ] {
        check_in(&mut e, &format!("{key}:btype"), &flt.btype, &["low", "high", "band", "none"]);
        let need = if flt.btype == "band" { 2 } else { 1 };
        if flt.btype != "none" && flt.f.len() != need {
            e.push(format!("{key}:f: {} cutoff(s) given, {need} needed", flt.f.len()));
        }
    }
    check_pos(&mut e, "augment:chunk:l", cfg.augment.chunk.l);
    check_pos(&mut e, "augment:chunk:l_ref", cfg.augment.chunk.l_ref);
    check_pos(&mut e, "augment:syl:l", cfg.augment.syl.l);
    check_pos(&mut e, "augment:syl:l_ref", cfg.augment.syl.l_ref);
    for (k, c) in [("glob", &cfg.augment.glob.cntr_mtd), ("loc", &cfg.augment.loc.cntr_mtd)] {
        check_in(&mut e, &format!("augment:{k}:cntr_mtd"), c, &["split", "seed_prct", "seed_kmeans"]);
    }
    for (k, m) in [("glob", &cfg.augment.glob.measure), ("loc", &cfg.augment.loc.measure)] {
        check_in(&mut e, &format!("augment:{k}:measure"), m, &["abs", "delta", "abs+delta"]);
    }
    for (k, u) in [("glob", &cfg.augment.glob.unit), ("loc", &cfg.augment.loc.unit)] {
        check_in(&mut e, &format!("augment:{k}:unit"), u, &["batch", "file"]);
    }
    for (k, w) in [("glob", &cfg.augment.glob.wgt_mtd), ("loc", &cfg.augment.loc.wgt_mtd)] {
        check_in(&mut e, &format!("augment:{k}:wgt_mtd"), w, &["user", "correlation", "silhouette"]);
    }
    for (k, h) in [("glob", &cfg.augment.glob.heuristics), ("loc", &cfg.augment.loc.heuristics)] {
        check_in(&mut e, &format!("augment:{k}:heuristics"), h, &["ORT", ""]);
    }
    check_prct(&mut e, "augment:glob:prct", cfg.augment.glob.prct);
    check_prct(&mut e, "augment:loc:prct", cfg.augment.loc.prct);
    check_in(&mut e, "augment:loc:acc_select", &cfg.augment.loc.acc_select, &["max", "left", "right"]);
    check_in(&mut e, "augment:loc:ag_select", &cfg.augment.loc.ag_select, &["max", "all"]);

    check_pos(&mut e, "styl:glob:decl_win", cfg.styl.glob.decl_win);
    check_in(&mut e, "styl:glob:nrm:mtd", &cfg.styl.glob.nrm.mtd, &["minmax"]);
    check_rng(&mut e, "styl:glob:nrm:rng", &cfg.styl.glob.nrm.rng);
    check_prct(&mut e, "styl:glob:prct:bl", cfg.styl.glob.prct.bl);
    check_prct(&mut e, "styl:glob:prct:tl", cfg.styl.glob.prct.tl);
    if cfg.styl.glob.prct.bl >= cfg.styl.glob.prct.tl {
        e.push("styl:glob:prct: bl must be below tl".into());
    }
    check_in(&mut e, "styl:loc:nrm:mtd", &cfg.styl.loc.nrm.mtd, &["minmax"]);
    check_rng(&mut e, "styl:loc:nrm:rng", &cfg.styl.loc.nrm.rng);
    check_in(&mut e, "styl:register", &cfg.styl.register, &["bl", "ml", "tl", "rng", "none"]);
    check_pos(&mut e, "styl:bnd:decl_win", cfg.styl.bnd.decl_win);
    check_pos(&mut e, "styl:bnd:win", cfg.styl.bnd.win);
    check_rng(&mut e, "styl:bnd:nrm:rng", &cfg.styl.bnd.nrm.rng);
    if cfg.styl.bnd.prct.bl >= cfg.styl.bnd.prct.tl {
        e.push("styl:bnd:prct: bl must be below tl".into());
    }
    check_in(&mut e, "styl:gnl:sb:btype", &cfg.styl.gnl.sb.btype, &["none", "band", "high", "low"]);
    check_in(&mut e, "styl:gnl:sb:domain", &cfg.styl.gnl.sb.domain, &["time", "freq"]);
    check_pos(&mut e, "styl:gnl:win", cfg.styl.gnl.win);
    check_pos(&mut e, "styl:gnl_en:sts", cfg.styl.gnl_en.sts);
    check_pos(&mut e, "styl:gnl_en:win", cfg.styl.gnl_en.win);
    for (k, r) in [("rhy_f0", &cfg.styl.rhy_f0.rhy), ("rhy_en", &cfg.styl.rhy_en.rhy)] {
        if r.lb < 0.0 || r.ub <= r.lb {
            e.push(format!("styl:{k}:rhy: needs 0 <= lb < ub, got lb={} ub={}", r.lb, r.ub));
        }
        if r.wgt.rb <= 0.0 {
            e.push(format!("styl:{k}:rhy:wgt:rb: must be > 0"));
        }
    }
    check_pos(&mut e, "styl:rhy_en:sig:sts", cfg.styl.rhy_en.sig.sts);
    check_pos(&mut e, "styl:rhy_en:sig:win", cfg.styl.rhy_en.sig.win);
    if cfg.styl.voice.jit.t_min <= 0.0 || cfg.styl.voice.jit.t_max <= cfg.styl.voice.jit.t_min {
        e.push("styl:voice:jit: needs 0 < t_min < t_max".into());
    }
    if cfg.styl.voice.jit.fac_max < 1.0 {
        e.push("styl:voice:jit:fac_max: must be >= 1".into());
    }

    for (k, c) in [("glob", &cfg.clst.glob), ("loc", &cfg.clst.loc)] {
        check_in(&mut e, &format!("clst:{k}:mtd"), &c.mtd, &["meanShift", "kMeans", "kmeans"]);
        check_in(&mut e, &format!("clst:{k}:kMeans:init"), &c.k_means.init, &["meanShift", "random"]);
        if c.k_means.n_cluster == 0 || c.k_means.n_init == 0 || c.k_means.max_iter == 0 {
            e.push(format!("clst:{k}:kMeans: n_cluster, n_init, max_iter must be >= 1"));
        }
        if !(0.0 < c.estimate_bandwidth.quantile && c.estimate_bandwidth.quantile <= 1.0) {
            e.push(format!("clst:{k}:estimate_bandwidth:quantile: outside (0, 1]"));
        }
        if c.mean_shift.bandwidth < 0.0 {
            e.push(format!("clst:{k}:meanShift:bandwidth: must be >= 0"));
        }
    }
    e
}

// --- navigation dependencies --------------------------------------------------

/// Dependency violations of the processing-step flags; empty iff consistent.
pub fn check_navigation(cfg: &ConfigTree) -> Vec<String> {
    let n = &cfg.navigate;
    let mut v = vec![];
    let styl_any = n.do_styl_glob
        || n.do_styl_loc
        || n.do_styl_loc_ext
        || n.do_styl_gnl_f0
        || n.do_styl_gnl_en
        || n.do_styl_bnd
        || n.do_styl_bnd_win
        || n.do_styl_bnd_trend
        || n.do_styl_rhy_f0
        || n.do_styl_rhy_en
        || n.do_styl_voice;
    if styl_any && !n.do_preproc {
        v.push("do_styl_* requires do_preproc".into());
    }
    if n.do_styl_loc && !n.do_styl_glob {
        v.push("do_styl_loc requires do_styl_glob".into());
    }
    if n.do_styl_loc_ext && !n.do_styl_loc {
        v.push("do_styl_loc_ext requires do_styl_loc".into());
    }
    if (n.do_styl_bnd || n.do_styl_bnd_win || n.do_styl_bnd_trend)
        && cfg.styl.bnd.residual
        && !n.do_styl_glob
    {
        v.push("do_styl_bnd* on residuals requires do_styl_glob".into());
    }
    if n.do_clst_glob && !n.do_styl_glob {
        v.push("do_clst_glob requires do_styl_glob".into());
    }
    if n.do_clst_loc && !n.do_styl_loc {
        v.push("do_clst_loc requires do_styl_loc".into());
    }
    v
}

// --- tier name expansion ------------------------------------------------------

/// Augmentation output stems configured in fsys:augment.
fn augment_stems(cfg: &ConfigTree) -> Vec<String> {
    let a = &cfg.fsys.augment;
    vec![
        a.chunk.tier_out_stm.clone(),
        a.syl.tier_out_stm.clone(),
        format!("{}_bnd", a.syl.tier_out_stm),
        a.glob.tier_out_stm.clone(),
        a.loc.tier_out_stm.clone(),
    ]
}

fn expand_list(tiers: &[String], stems: &[String], n_channels: usize) -> Vec<String> {
    if tiers.len() == 1 && stems.contains(&tiers[0]) {
        return (1..=n_channels).map(|c| format!("{}_{c}", tiers[0])).collect();
    }
    tiers.to_vec()
}

/// Expands tier references that name an augmentation output stem into the
/// per-channel tier names (stem_1..stem_n). Explicit lists pass through.
pub fn expand_tier_names(cfg: &ConfigTree, n_channels: usize) -> ConfigTree {
    let mut out = cfg.clone();
    let stems = augment_stems(cfg);
    let n = n_channels.max(1);
    let f = &mut out.fsys;
    f.chunk.tier = expand_list(&f.chunk.tier, &stems, n);
    f.glob.tier = expand_list(&f.glob.tier, &stems, n);
    f.loc.tier_acc = expand_list(&f.loc.tier_acc, &stems, n);
    f.loc.tier_ag = expand_list(&f.loc.tier_ag, &stems, n);
    f.bnd.tier = expand_list(&f.bnd.tier, &stems, n);
    f.gnl_f0.tier = expand_list(&f.gnl_f0.tier, &stems, n);
    f.gnl_en.tier = expand_list(&f.gnl_en.tier, &stems, n);
    f.rhy_f0.tier = expand_list(&f.rhy_f0.tier, &stems, n);
    f.rhy_f0.tier_rate = expand_list(&f.rhy_f0.tier_rate, &stems, n);
    f.rhy_en.tier = expand_list(&f.rhy_en.tier, &stems, n);
    f.rhy_en.tier_rate = expand_list(&f.rhy_en.tier_rate, &stems, n);
    f.voice.tier = expand_list(&f.voice.tier, &stems, n);
    f.pho.tier = expand_list(&f.pho.tier, &stems, n);

    // augmentation inputs: default to the producing step's output stem
    let chunk_stm = f.augment.chunk.tier_out_stm.clone();
    let syl_stm = f.augment.syl.tier_out_stm.clone();
    if f.augment.syl.tier_parent.is_empty() {
        f.augment.syl.tier_parent = vec![chunk_stm.clone()];
    }
    if f.augment.glob.tier_parent.is_empty() {
        f.augment.glob.tier_parent = vec![chunk_stm];
    }
    if f.augment.glob.tier.is_empty() {
        f.augment.glob.tier = vec![format!("{syl_stm}_bnd")];
    }
    f.augment.syl.tier_parent = expand_list(&f.augment.syl.tier_parent, &stems, n);
    f.augment.glob.tier_parent = expand_list(&f.augment.glob.tier_parent, &stems, n);
    f.augment.glob.tier = expand_list(&f.augment.glob.tier, &stems, n);
    f.augment.loc.tier_parent = expand_list(&f.augment.loc.tier_parent, &stems, n);
    f.augment.loc.tier_acc = expand_list(&f.augment.loc.tier_acc, &stems, n);
    f.augment.loc.tier_ag = expand_list(&f.augment.loc.tier_ag, &stems, n);

    // augmentation output tiers get implicit channel entries
    for c in 1..=n {
        for stem in &stems {
            f.channel.entry(format!("{stem}_{c}")).or_insert(c);
        }
    }
    out
}

/// 0-based channel of a tier; tiers without an entry default to channel 1.
pub fn tier_channel(cfg: &ConfigTree, tier: &str) -> usize {
    cfg.fsys.channel.get(tier).map(|&c| c.saturating_sub(1)).unwrap_or(0)
}

/// Flattens an augment wgt tree into (colon path, weight) pairs.
pub fn flatten_weights(wgt: &serde_json::Value) -> Vec<(String, Vec<f64>)> {
    let mut out = vec![];
    flatten_weights_rec(wgt, String::new(), &mut out);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn flatten_weights_rec(v: &serde_json::Value, path: String, out: &mut Vec<(String, Vec<f64>)>) {
    match v {
        serde_json::Value::Object(m) => {
            for (k, child) in m {
                let p = if path.is_empty() { k.clone() } else { format!("{path}:{k}") };
                flatten_weights_rec(child, p, out);
            }
        }
        serde_json::Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                out.push((path, vec![x]));
            }
        }
        serde_json::Value::Array(a) => {
            let xs: Vec<f64> = a.iter().filter_map(|x| x.as_f64()).collect();
            if xs.len() == a.len() && !path.is_empty() {
                out.push((path, xs));
            }
        }
        _ => {}
    }
}
