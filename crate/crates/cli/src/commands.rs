use std::collections::HashMap;
use std::fs::{self, File};
use std::path::Path;

use serde::Serialize;

use dsdist_core::analysis::{
    default_window, distribution_summary, min_max_scale, moving_average, select_for_adaptation, sort_by_distance,
    split_stats, DistributionSummary, SplitOptions, SplitReport,
};
use dsdist_core::distance::{self, extreme_images, rank_datasets, DistanceSummary, DistanceTable, ExtremeImages, Ranking, SweepRow};
use dsdist_core::embedding_io::{self, read_csv_from, read_fvec, write_csv, FeatureMatrix};
use dsdist_core::performance::{self, load_pairs, ods, ods_subset, threshold_grid, OdsResult, PairedGrids};
use dsdist_core::projection::project_pair;
use dsdist_core::synth::{generate, Shift, SynthKind, SynthSpec};

use crate::error::CliError;
use crate::output::{csv_float, Outputs};
use crate::{Command, Format, KindArg, ThresholdArgs};

pub fn execute(cmd: Command) -> Result<(), CliError> {
    let mut out = Outputs::default();
    match cmd {
        Command::Convert { input, out: dest, has_header, dataset_id } => {
            let mut m = if is_csv(&input) {
                embedding_io::read_csv(&input, has_header)?
            } else {
                read_fvec(&input)?
            };
            if let Some(id) = dataset_id {
                m = m.with_dataset_id(id)?;
            }
            out.add(&dest, encode_matrix(&m, &dest)?);
        }
        Command::Project { pair, secondary, out_dir } => {
            let p = load_matrix(&pair.primary)?;
            let s = load_matrix(&secondary)?;
            let proj = project_pair(&p, &s, Some(pair.components))?;
            let tmp = tempfile::tempdir()?;
            proj.save_fvec(tmp.path(), p.image_ids(), s.image_ids())?;
            for name in ["components.fv", "projected_primary.fv", "projected_secondary.fv"] {
                out.add(out_dir.join(name), fs::read(tmp.path().join(name))?);
            }
            out.json(
                out_dir.join("projection.json"),
                &ProjectionSummary {
                    primary_id: p.dataset_id().to_string(),
                    secondary_id: s.dataset_id().to_string(),
                    components: proj.z(),
                    rank: proj.rank,
                    mean: proj.mean.iter().copied().collect(),
                    singular_values: proj.singular_values.clone(),
                    explained_variance: proj.explained_variance.clone(),
                },
            )?;
        }
        Command::Distance { pair, secondary, out: dest, format } => {
            let p = load_matrix(&pair.primary)?;
            let s = load_matrix(&secondary)?;
            let summary = distance::measure(&p, &s, Some(pair.components))?.summary();
            match format {
                Format::Json => out.json(&dest, &summary)?,
                Format::Csv => out.add(&dest, distance_csv(&summary)?),
            }
        }
        Command::Table { input, raw, top, out: dest, format } => {
            let table = match raw {
                Some(path) => read_raw_table(&path)?,
                None if input.is_empty() => return Err(CliError::usage("table needs --input or --raw")),
                None => {
                    let scores: Vec<_> = input.iter().map(|p| read_summary(p).map(|s| s.score())).collect::<Result<_, _>>()?;
                    DistanceTable::from_scores(&scores)?
                }
            };
            let farthest = (0..table.row_labels.len())
                .map(|i| table.farthest(i, top).into_iter().map(str::to_string).collect())
                .collect();
            match format {
                Format::Json => out.json(&dest, &TableOutput { table, farthest })?,
                Format::Csv => out.add(&dest, table_csv(&table)?),
            }
        }
        Command::Sweep { primary, secondary, z_values, out: dest } => {
            out.json(&dest, &sweep(&primary, &secondary, &z_values)?)?;
        }
        Command::Splits { distance, parts, allow_any_parts, unscaled, scores, pred_dir, gt_dir, steps, out: dest } => {
            if !(allow_any_parts || parts == 2 || parts == 3) {
                return Err(CliError::usage(format!(
                    "--parts {parts} is not 2 or 3; pass --allow-any-parts to override"
                )));
            }
            let summary = read_summary(&distance)?;
            let opts = SplitOptions { scale: !unscaled, allow_any_k: allow_any_parts };
            let order = sort_by_distance(&summary.values());
            let sorted: Vec<f64> = order.iter().map(|&i| summary.i_dist[i].value).collect();
            let ids: Vec<String> = order.iter().map(|&i| summary.i_dist[i].image_id.clone()).collect();
            let report = match (scores, pred_dir, gt_dir) {
                (Some(path), _, _) => {
                    let table = read_scores(&path)?;
                    let aligned = align_scores(&table, &ids)?;
                    split_stats(&sorted, Some(&aligned), parts, opts)?
                }
                (None, Some(pd), Some(gd)) => {
                    let grids = load_pairs(pd, gd)?.select(&ids)?;
                    split_with_ods(&sorted, &grids, parts, opts, &threshold_grid(steps))?
                }
                _ => split_stats(&sorted, None, parts, opts)?,
            };
            out.json(
                &dest,
                &SplitOutput { primary_id: summary.primary_id, secondary_id: summary.secondary_id, sorted_image_ids: ids, report },
            )?;
        }
        Command::Ods { pred_dir, gt_dir, thresholds, out: dest, per_image } => {
            check_steps(thresholds.steps)?;
            let pairs = load_pairs(pred_dir, gt_dir)?;
            let grid = threshold_grid(thresholds.steps);
            let result = ods(&pairs.predictions, &pairs.masks, &grid)?;
            if let Some(path) = per_image {
                let f = image_scores(&pairs, &result, &thresholds)?;
                out.add(path, scores_csv(&pairs.image_ids, &f)?);
            }
            out.json(&dest, &result)?;
        }
        Command::Curves { distance, scores, window, out: dest, format } => {
            let summary = read_summary(&distance)?;
            let table = read_scores(&scores)?;
            let ids = summary.image_ids();
            let f = align_scores(&table, &ids)?;
            let curve = curve(&ids, &summary.values(), &f, window)?;
            match format {
                Format::Json => out.json(&dest, &curve)?,
                Format::Csv => out.add(&dest, curve_csv(&curve)?),
            }
        }
        Command::Select { distance, count, band, seed, out: dest } => {
            let summary = read_summary(&distance)?;
            let band = (band[0], band[1]);
            let scaled = min_max_scale(&summary.values())?;
            let candidates = scaled.values.iter().filter(|&&v| v >= band.0 && v <= band.1).count();
            let picked = select_for_adaptation(&scaled, count, band, seed)?;
            let selected = picked
                .into_iter()
                .map(|i| Selected { index: i, image_id: summary.i_dist[i].image_id.clone(), scaled_i_dist: scaled.values[i] })
                .collect();
            out.json(
                &dest,
                &SelectOutput { primary_id: summary.primary_id, secondary_id: summary.secondary_id, band: [band.0, band.1], seed, candidates, selected },
            )?;
        }
        Command::Rank { input, k, images, out: dest } => {
            let summaries: Vec<DistanceSummary> = input.iter().map(|p| read_summary(p)).collect::<Result<_, _>>()?;
            let scores: Vec<_> = summaries.iter().map(DistanceSummary::score).collect();
            let ranking = rank_datasets(&scores)?;
            let extremes = match images {
                Some(n) => summaries
                    .iter()
                    .map(|s| {
                        extreme_images(&s.image_ids(), &s.values(), n)
                            .map(|e| NamedExtremes { secondary_id: s.secondary_id.clone(), images: e })
                    })
                    .collect::<Result<Vec<_>, _>>()?,
                None => Vec::new(),
            };
            out.json(&dest, &rank_output(ranking, k, extremes))?;
        }
        Command::Synth { kind, n, q, shift, rank, noise, seed, basis_seed, dataset_id, out: dest } => {
            let spec = SynthSpec {
                dataset_id,
                n,
                q,
                kind: match kind {
                    KindArg::Gaussian => SynthKind::GaussianShifted,
                    KindArg::LowRank => SynthKind::LowRank,
                    KindArg::TwoCluster => SynthKind::TwoCluster,
                },
                shift: Shift::Scalar(shift),
                rank,
                noise,
                seed,
                basis_seed,
            };
            let m = generate(&spec)?;
            out.add(&dest, encode_matrix(&m, &dest)?);
        }
        Command::Report { pair, secondary, pred_dir, gt_dir, thresholds, window, out: dest } => {
            check_steps(thresholds.steps)?;
            let primary = load_matrix(&pair.primary)?;
            let pairs = load_pairs(pred_dir, gt_dir)?;
            let mut datasets = Vec::with_capacity(secondary.len());
            for path in &secondary {
                let s = load_matrix(path)?;
                datasets.push(dataset_bundle(&primary, &s, pair.components, &pairs, &thresholds, window)?);
            }
            let scores: Vec<_> = datasets
                .iter()
                .map(|d| distance::DatasetScore { primary_id: primary.dataset_id().to_string(), secondary_id: d.secondary_id.clone(), o_dist: d.o_dist })
                .collect();
            let k = scores.len();
            let bundle = ReportBundle {
                primary_id: primary.dataset_id().to_string(),
                n_primary: primary.rows(),
                components: pair.components,
                threshold_steps: thresholds.steps,
                per_image_best: thresholds.per_image_best,
                ranking: rank_output(rank_datasets(&scores)?, k, Vec::new()),
                datasets,
            };
            out.json(&dest, &bundle)?;
        }
    }
    out.commit()?;
    Ok(())
}

fn check_steps(steps: usize) -> Result<(), CliError> {
    if steps < 2 {
        return Err(CliError::usage("--steps must be at least 2"));
    }
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// FVEC1 unless the extension is `.csv`; a CSV header is detected by a
/// non-numeric first cell.
fn load_matrix(path: &Path) -> Result<FeatureMatrix, CliError> {
    if !is_csv(path) {
        return Ok(read_fvec(path)?);
    }
    let text = fs::read_to_string(path)?;
    let first_cell = text.lines().next().and_then(|l| l.split(',').next()).unwrap_or("").trim();
    let has_header = first_cell.parse::<f64>().is_err();
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(read_csv_from(text.as_bytes(), &id, has_header)?)
}

fn encode_matrix(m: &FeatureMatrix, dest: &Path) -> Result<Vec<u8>, CliError> {
    if is_csv(dest) {
        let mut buf = Vec::new();
        write_csv(m, &mut buf)?;
        Ok(buf)
    } else {
        Ok(embedding_io::encode_fvec(m)?)
    }
}

fn read_summary(path: &Path) -> Result<DistanceSummary, CliError> {
    let s: DistanceSummary = serde_json::from_reader(File::open(path)?)?;
    if s.i_dist.is_empty() {
        return Err(CliError::data("EmptyInput", format!("{} has no image distances", path.display())));
    }
    Ok(s)
}

fn read_scores(path: &Path) -> Result<HashMap<String, f64>, CliError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let v: f64 = rec
            .get(1)
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|_| CliError::data("ParseFailure", format!("bad score for {id:?}")))?;
        out.insert(id, v);
    }
    Ok(out)
}

fn align_scores(table: &HashMap<String, f64>, ids: &[String]) -> Result<Vec<f64>, CliError> {
    ids.iter()
        .map(|id| table.get(id).copied().ok_or_else(|| CliError::data("MissingScore", format!("no score for image {id:?}"))))
        .collect()
}

fn read_raw_table(path: &Path) -> Result<DistanceTable, CliError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let columns: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(rec.get(0).unwrap_or_default().to_string());
        raw.push(
            rec.iter()
                .skip(1)
                .map(|c| c.trim().parse::<f64>().map_err(|_| CliError::data("ParseFailure", format!("bad table cell {c:?}"))))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok(DistanceTable::new(rows, columns, raw)?)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| CliError::data("IoFailure", e.to_string()))
}

fn distance_csv(s: &DistanceSummary) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &["primary_id", "secondary_id", "n_primary", "image_id", "i_dist", "o_dist"],
        s.i_dist.iter().map(|d| {
            vec![
                s.primary_id.clone(),
                s.secondary_id.clone(),
                s.n_primary.to_string(),
                d.image_id.clone(),
                csv_float(d.value),
                csv_float(s.o_dist),
            ]
        }),
    )
}

fn table_csv(t: &DistanceTable) -> Result<Vec<u8>, CliError> {
    let mut header = vec!["model"];
    header.extend(t.column_labels.iter().map(String::as_str));
    csv_bytes(
        &header,
        t.row_labels.iter().zip(&t.normalized).map(|(label, row)| {
            std::iter::once(label.clone()).chain(row.iter().map(|&x| csv_float(x))).collect()
        }),
    )
}

fn scores_csv(ids: &[String], f: &[f64]) -> Result<Vec<u8>, CliError> {
    csv_bytes(&["image_id", "f_score"], ids.iter().zip(f).map(|(id, &v)| vec![id.clone(), csv_float(v)]))
}

fn curve_csv(c: &[CurvePoint]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &["image_id", "i_dist", "scaled_i_dist", "f_score", "smoothed_f_score"],
        c.iter().map(|p| {
            vec![
                p.image_id.clone(),
                csv_float(p.i_dist),
                csv_float(p.scaled_i_dist),
                csv_float(p.f_score),
                csv_float(p.smoothed_f_score),
            ]
        }),
    )
}

#[derive(Serialize)]
struct ProjectionSummary {
    primary_id: String,
    secondary_id: String,
    components: usize,
    rank: usize,
    mean: Vec<f64>,
    singular_values: Vec<f64>,
    explained_variance: Vec<f64>,
}

#[derive(Serialize)]
struct TableOutput {
    #[serde(flatten)]
    table: DistanceTable,
    farthest: Vec<Vec<String>>,
}

#[derive(Serialize)]
struct SweepColumn {
    secondary_id: String,
    rows: Vec<SweepRow>,
}

#[derive(Serialize)]
struct SweepOutput {
    primary_id: String,
    components: Vec<usize>,
    columns: Vec<SweepColumn>,
    /// One row per component count, normalized across secondaries.
    normalized: Vec<Vec<f64>>,
}

fn sweep(primary: &Path, secondary: &[std::path::PathBuf], z_values: &[usize]) -> Result<SweepOutput, CliError> {
    let p = load_matrix(primary)?;
    let mut columns = Vec::with_capacity(secondary.len());
    for path in secondary {
        let s = load_matrix(path)?;
        columns.push(SweepColumn { secondary_id: s.dataset_id().to_string(), rows: distance::pc_sweep(&p, &s, z_values)? });
    }
    let raw: Vec<Vec<f64>> = (0..z_values.len()).map(|i| columns.iter().map(|c| c.rows[i].o_dist).collect()).collect();
    let (normalized, _) = distance::normalize_rows(&raw);
    Ok(SweepOutput { primary_id: p.dataset_id().to_string(), components: z_values.to_vec(), columns, normalized })
}

#[derive(Serialize)]
struct SplitOutput {
    primary_id: String,
    secondary_id: String,
    sorted_image_ids: Vec<String>,
    report: SplitReport,
}

/// Split statistics whose part scores are the ODS over each part's images.
/// `grids` must be in the same (ascending-distance) order as `sorted`.
fn split_with_ods(
    sorted: &[f64],
    grids: &PairedGrids,
    k: usize,
    opts: SplitOptions,
    thresholds: &[f64],
) -> Result<SplitReport, CliError> {
    let mut report = split_stats(sorted, None, k, opts)?;
    for part in &mut report.parts {
        let idx: Vec<usize> = (part.start..part.end).collect();
        part.f_score = Some(ods_subset(&grids.predictions, &grids.masks, &idx, thresholds)?.f_score);
    }
    Ok(report)
}

fn image_scores(pairs: &PairedGrids, result: &OdsResult, t: &ThresholdArgs) -> Result<Vec<f64>, CliError> {
    Ok(if t.per_image_best {
        performance::per_image_best_fscores(&pairs.predictions, &pairs.masks, &threshold_grid(t.steps))?
    } else {
        performance::per_image_fscores(&pairs.predictions, &pairs.masks, result.best_threshold)?
    })
}

#[derive(Debug, Serialize)]
struct CurvePoint {
    image_id: String,
    i_dist: f64,
    scaled_i_dist: f64,
    f_score: f64,
    smoothed_f_score: f64,
}

/// Sorts by distance, min-max scales it, and smooths the F-scores in that order.
fn curve(ids: &[String], i_dist: &[f64], f: &[f64], window: Option<usize>) -> Result<Vec<CurvePoint>, CliError> {
    let order = sort_by_distance(i_dist);
    let scaled = min_max_scale(i_dist)?;
    let sorted_f: Vec<f64> = order.iter().map(|&i| f[i]).collect();
    let smoothed = moving_average(&sorted_f, window)?;
    Ok(order
        .iter()
        .zip(smoothed)
        .map(|(&i, s)| CurvePoint {
            image_id: ids[i].clone(),
            i_dist: i_dist[i],
            scaled_i_dist: scaled.values[i],
            f_score: f[i],
            smoothed_f_score: s,
        })
        .collect())
}

#[derive(Serialize)]
struct Selected {
    index: usize,
    image_id: String,
    scaled_i_dist: f64,
}

#[derive(Serialize)]
struct SelectOutput {
    primary_id: String,
    secondary_id: String,
    band: [f64; 2],
    seed: u64,
    candidates: usize,
    selected: Vec<Selected>,
}

#[derive(Serialize)]
struct NamedExtremes {
    secondary_id: String,
    #[serde(flatten)]
    images: ExtremeImages,
}

#[derive(Serialize)]
struct RankOutput {
    primary_id: String,
    ordered: Vec<distance::DatasetScore>,
    closest: Vec<String>,
    farthest: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    images: Vec<NamedExtremes>,
}

fn rank_output(ranking: Ranking, k: usize, images: Vec<NamedExtremes>) -> RankOutput {
    RankOutput {
        primary_id: ranking.ordered[0].primary_id.clone(),
        closest: ranking.closest(k).iter().map(|s| s.secondary_id.clone()).collect(),
        farthest: ranking.farthest(k).iter().map(|s| s.secondary_id.clone()).collect(),
        ordered: ranking.ordered,
        images,
    }
}

#[derive(Serialize)]
struct ImageRow {
    image_id: String,
    i_dist: f64,
    scaled_i_dist: f64,
    f_score: f64,
}

#[derive(Serialize)]
struct DatasetBundle {
    secondary_id: String,
    n_images: usize,
    o_dist: f64,
    distribution: DistributionSummary,
    ods: OdsResult,
    images: Vec<ImageRow>,
    splits: Vec<SplitReport>,
    smoothing_window: usize,
    curve: Vec<CurvePoint>,
}

#[derive(Serialize)]
struct ReportBundle {
    primary_id: String,
    n_primary: usize,
    components: usize,
    threshold_steps: usize,
    per_image_best: bool,
    ranking: RankOutput,
    datasets: Vec<DatasetBundle>,
}

fn dataset_bundle(
    primary: &FeatureMatrix,
    secondary: &FeatureMatrix,
    z: usize,
    pairs: &PairedGrids,
    t: &ThresholdArgs,
    window: Option<usize>,
) -> Result<DatasetBundle, CliError> {
    let report = distance::measure(primary, secondary, Some(z))?;
    let ids = secondary.image_ids();
    let grids = pairs.select(ids)?;
    let grid = threshold_grid(t.steps);
    let ods_result = ods(&grids.predictions, &grids.masks, &grid)?;
    let f = image_scores(&grids, &ods_result, t)?;
    let scaled = min_max_scale(&report.image_distances)?;

    let order = sort_by_distance(&report.image_distances);
    let sorted: Vec<f64> = order.iter().map(|&i| report.image_distances[i]).collect();
    let sorted_ids: Vec<String> = order.iter().map(|&i| ids[i].clone()).collect();
    let sorted_grids = grids.select(&sorted_ids)?;
    let splits = [2, 3]
        .into_iter()
        .filter(|&k| sorted.len() >= k)
        .map(|k| split_with_ods(&sorted, &sorted_grids, k, SplitOptions::default(), &grid))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(DatasetBundle {
        secondary_id: secondary.dataset_id().to_string(),
        n_images: ids.len(),
        o_dist: report.dataset_distance,
        distribution: distribution_summary(&report.image_distances)?,
        ods: ods_result,
        images: ids
            .iter()
            .enumerate()
            .map(|(i, id)| ImageRow {
                image_id: id.clone(),
                i_dist: report.image_distances[i],
                scaled_i_dist: scaled.values[i],
                f_score: f[i],
            })
            .collect(),
        splits,
        smoothing_window: window.unwrap_or_else(|| default_window(ids.len())),
        curve: curve(ids, &report.image_distances, &f, window)?,
    })
}
