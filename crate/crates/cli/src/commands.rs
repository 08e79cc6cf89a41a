use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use jackstraw_core::jackstraw::{self, AjiveScores, PcaScores};
use jackstraw_core::simulation::COMPARISON_COLUMNS;
use jackstraw_core::{
    build_indicator_block, build_report, compare_replicates, decompose, diproperm_test,
    simulate_toy, AjiveOptions, DataBlock, JackstrawResult, RealMatrix,
};
use log::{info, warn};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use crate::config::{Method, Provenance, RunConfig};
use crate::error::{CliError, Result};
use crate::io;

/// Collects the files written by one command.
pub struct Output {
    dir: PathBuf,
    pub provenance: Provenance,
    pub files: Vec<String>,
}

impl Output {
    fn new(command: &str, config: &RunConfig) -> Result<Self> {
        let dir = config.out_dir()?.to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Output {
            dir,
            provenance: Provenance::new(command, config),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn matrix(&mut self, name: &str, rows: &[String], cols: &[String], m: &DMatrix<f64>) -> Result<()> {
        let path = self.path(name);
        io::write_matrix(&path, &self.provenance, rows, cols, m)
    }

    fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let path = self.path(name);
        let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        io::write_table(&path, &self.provenance, &header, rows)
    }

    /// `{"provenance": …, key: value}`
    fn json<T: Serialize>(&mut self, name: &str, key: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut doc = serde_json::Map::new();
        doc.insert("provenance".into(), to_value(&self.provenance)?);
        doc.insert(key.into(), to_value(value)?);
        io::write_json(&path, &doc)
    }

    fn svg(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        let note = self.provenance.to_json_line().replace("--", "- -");
        io::write_text(&path, &format!("<!-- provenance: {note} -->\n{body}"))
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| CliError::validation(format!("cannot serialize output: {e}")))
}

fn numbered(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn block_names(config: &RunConfig) -> Vec<String> {
    if !config.block_names.is_empty() {
        return config.block_names.clone();
    }
    let mut names: Vec<String> = Vec::new();
    for (i, path) in config.blocks.iter().enumerate() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("block{}", i + 1));
        let name = if names.contains(&stem) { format!("{stem}_{}", i + 1) } else { stem };
        names.push(name);
    }
    names
}

fn class_order(config: &RunConfig, labels: &[String]) -> Vec<String> {
    if !config.classes.is_empty() {
        return config.classes.clone();
    }
    labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
}

/// Reads the block files and, if configured, appends the indicator block.
pub fn load_blocks(config: &RunConfig) -> Result<Vec<DataBlock>> {
    if config.blocks.is_empty() {
        return Err(CliError::validation("no input blocks (use --blocks)"));
    }
    let names = block_names(config);
    let mut blocks = Vec::with_capacity(config.blocks.len() + 1);
    for (path, name) in config.blocks.iter().zip(names) {
        info!("reading {}", path.display());
        let m = io::read_matrix(path)?;
        blocks.push(DataBlock::new(name, m.matrix, m.feature_names, m.case_ids)?);
    }
    if let Some(path) = &config.indicator {
        let case_ids = blocks[0].case_ids().to_vec();
        let labels = io::align_labels(&io::read_labels(path)?, &case_ids)?;
        let classes = class_order(config, &labels);
        let block = build_indicator_block(&labels, &classes)?.with_case_ids(case_ids)?;
        blocks.push(block);
    }
    if config.ranks.len() != blocks.len() {
        return Err(CliError::validation(format!(
            "{} ranks given for {} blocks{}",
            config.ranks.len(),
            blocks.len(),
            if config.indicator.is_some() { " (including the indicator block)" } else { "" }
        )));
    }
    Ok(blocks)
}

pub fn simulate(config: &RunConfig) -> Result<Output> {
    let data = simulate_toy(&config.toy())?;
    let mut out = Output::new("simulate", config)?;
    for block in &data.blocks {
        out.matrix(
            &format!("{}.csv", block.name()),
            block.feature_names(),
            block.case_ids(),
            block.matrix(),
        )?;
    }
    out.json("truth.json", "truth", &data.truth)?;
    Ok(out)
}

pub fn ajive(config: &RunConfig) -> Result<Output> {
    let blocks = load_blocks(config)?;
    let options = AjiveOptions { normalize_blocks: config.normalize_blocks };
    let dec = decompose(&blocks, &config.ranks, config.joint_rank, options)?;
    info!("joint rank {}, individual ranks {:?}", dec.joint_rank, dec.individual_ranks());

    let mut out = Output::new("ajive", config)?;
    let cases = &dec.case_ids;
    out.matrix("cns.csv", &numbered("joint", dec.joint_rank), cases, &dec.cns)?;
    out.table(
        "stacked_singular_values.csv",
        &["index", "singular_value"],
        dec.stacked_singular_values
            .iter()
            .enumerate()
            .map(|(i, s)| vec![(i + 1).to_string(), io::format_value(*s)])
            .collect(),
    )?;
    let mut summaries = Vec::new();
    for (b, block) in dec.blocks.iter().zip(&blocks) {
        let stem = file_safe(&b.name);
        let features = block.feature_names();
        out.matrix(&format!("{stem}_joint.csv"), features, cases, &b.joint)?;
        out.matrix(&format!("{stem}_individual.csv"), features, cases, &b.individual)?;
        out.matrix(&format!("{stem}_bss.csv"), &numbered("individual", b.individual_rank), cases, &b.bss)?;
        summaries.push(json!({
            "name": b.name,
            "features": features.len(),
            "initial_rank": b.initial_rank,
            "individual_rank": b.individual_rank,
            "centered_at_entry": b.centered_at_entry,
            "scale": b.scale,
            "individual_singular_values": b.individual_singular_values,
            "norms": {
                "data": b.data.norm(),
                "joint": b.joint.norm(),
                "individual": b.individual.norm(),
                "residual": b.residual().norm(),
            },
        }));
    }
    let summary = json!({
        "cases": dec.n_cases(),
        "joint_rank": dec.joint_rank,
        "initial_ranks": config.ranks,
        "individual_ranks": dec.individual_ranks(),
        "stacked_singular_values": dec.stacked_singular_values,
        "blocks": summaries,
    });
    out.json("summary.json", "summary", &summary)?;
    Ok(out)
}

fn write_diagnostics(out: &mut Output, result: &JackstrawResult) -> Result<()> {
    let report = build_report(result)?;
    out.json("diagnostics.json", "report", &report)?;
    out.svg("density.svg", &report.density_svg())?;
    out.svg("pvalues.svg", &report.pvalues_svg())?;
    out.svg("ks.svg", &report.ks_svg())?;
    Ok(())
}

pub fn jackstraw(config: &RunConfig) -> Result<Output> {
    let blocks = load_blocks(config)?;
    let jconfig = config.jackstraw();
    if config.block_index >= blocks.len() {
        return Err(CliError::validation(format!(
            "block index {} out of range for {} blocks",
            config.block_index,
            blocks.len()
        )));
    }
    let result = match config.method {
        Method::Ajive => {
            let model = AjiveScores {
                initial_ranks: config.ranks.clone(),
                joint_rank: config.joint_rank,
                options: AjiveOptions { normalize_blocks: config.normalize_blocks },
                space: config.space,
                block: config.block_index,
                components: config.component,
            };
            jackstraw::run(&blocks, &model, &jconfig)?
        }
        Method::Pca => {
            let model = PcaScores {
                block: config.block_index,
                rank: config.ranks[config.block_index],
                components: config.component,
            };
            jackstraw::run(&blocks, &model, &jconfig)?
        }
    };
    for w in &result.warnings {
        warn!("{w}");
    }
    info!("{} of {} features significant", result.n_significant(), result.feature_names.len());

    let mut out = Output::new("jackstraw", config)?;
    out.json("jackstraw.json", "result", &result)?;
    let rows = (0..result.feature_names.len())
        .map(|i| {
            vec![
                result.feature_names[i].clone(),
                io::format_value(result.f_observed[i]),
                io::format_value(result.p_raw[i]),
                io::format_value(result.p_adjusted[i]),
                result.significant[i].to_string(),
            ]
        })
        .collect();
    out.table(
        "features.csv",
        &["feature", "f_statistic", "p_value", "p_adjusted", "significant"],
        rows,
    )?;
    write_diagnostics(&mut out, &result)?;
    Ok(out)
}

pub fn compare(config: &RunConfig) -> Result<Output> {
    let summary = compare_replicates(&config.toy(), &config.jackstraw(), config.replicates)?;
    let mut out = Output::new("compare", config)?;
    let header: Vec<&str> = std::iter::once("method").chain(COMPARISON_COLUMNS).collect();
    let row = |name: &str, values: &[f64; 4]| -> Vec<String> {
        std::iter::once(name.to_string())
            .chain(values.iter().map(|v| io::format_value(*v)))
            .collect()
    };
    out.table(
        "accuracy.csv",
        &header,
        vec![
            row("AJIVE-jackstraw", &summary.ajive_accuracy),
            row("PCA-jackstraw", &summary.pca_accuracy),
        ],
    )?;
    out.table(
        "angle.csv",
        &header,
        vec![
            row("AJIVE-jackstraw", &summary.ajive_angle),
            row("PCA-jackstraw", &summary.pca_angle),
        ],
    )?;
    out.json("comparison.json", "comparison", &summary)?;
    Ok(out)
}

pub fn diproperm(config: &RunConfig) -> Result<Output> {
    let matrix_path = config
        .matrix
        .as_deref()
        .ok_or_else(|| CliError::validation("no matrix (use --matrix)"))?;
    let labels_path = config
        .labels
        .as_deref()
        .ok_or_else(|| CliError::validation("no labels (use --labels)"))?;
    let m = io::read_matrix(matrix_path)?;
    let labels = io::align_labels(&io::read_labels(labels_path)?, &m.case_ids)?;
    let classes = class_order(config, &labels);
    if classes.len() != 2 {
        return Err(CliError::validation(format!(
            "DiProPerm compares two classes, found {} ({}); choose two with --classes",
            classes.len(),
            classes.join(", ")
        )));
    }
    let keep: Vec<usize> = (0..labels.len()).filter(|&j| classes.contains(&labels[j])).collect();
    let x = RealMatrix::from_dmatrix(m.matrix.select_columns(&keep))?;
    let positive: Vec<bool> = keep.iter().map(|&j| labels[j] == classes[1]).collect();
    let result = diproperm_test(&x, &positive, &config.diproperm())?;
    info!("z = {:.3}", result.z_score);

    let mut out = Output::new("diproperm", config)?;
    let doc = json!({
        "classes": classes,
        "cases": keep.iter().map(|&j| &m.case_ids[j]).collect::<Vec<_>>(),
        "test": to_value(&result)?,
    });
    out.json("diproperm.json", "result", &doc)?;
    Ok(out)
}

pub fn diagnose(config: &RunConfig) -> Result<Output> {
    let path: &Path = config
        .result
        .as_deref()
        .ok_or_else(|| CliError::validation("no jackstraw result (use --result)"))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let result: JackstrawResult = serde_json::from_value(doc["result"].take())
        .map_err(|e| CliError::validation(format!("{}: not a jackstraw result: {e}", path.display())))?;
    let mut out = Output::new("diagnose", config)?;
    write_diagnostics(&mut out, &result)?;
    Ok(out)
}
