#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cardio/data_model.hpp"
#include "cardio/dsp.hpp"
#include "cardio/hpo.hpp"
#include "cardio/training.hpp"

namespace cardio::eval {

// ----------------------------------------------------------------------------
// Metrics
// ----------------------------------------------------------------------------

// NH is the positive class throughout. Ratios with a zero denominator are
// absent rather than zero so aggregates can exclude them explicitly.
struct Metrics {
    std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::optional<double> sensitivity, specificity, precision, f1, accuracy, tnr;

    std::int64_t total() const { return tp + tn + fp + fn; }
};

Metrics compute_metrics(std::int64_t tp, std::int64_t tn, std::int64_t fp, std::int64_t fn);

// ----------------------------------------------------------------------------
// Cohort balancing
// ----------------------------------------------------------------------------

// Removes randomly chosen majority-class patients until the classes match;
// the removed patients form the holdout. Already balanced -> identity with an
// empty holdout. Deterministic per seed.
std::pair<Dataset, Dataset> undersample(const Dataset& ds, std::uint64_t seed);

// ----------------------------------------------------------------------------
// Fold planning
// ----------------------------------------------------------------------------

struct FoldPlan {
    std::uint64_t seed = 0;
    std::string test_patient_id;
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> excluded_holdout_ids;
};

// Asserts the partition invariants: train/val/test pairwise disjoint, their
// union covers the balanced cohort exactly, and the holdout touches none.
void validate_fold(const FoldPlan& fold, const std::vector<std::string>& balanced_ids);

// Patient-level split stratified by label; returns (train_ids, val_ids).
std::pair<std::vector<std::string>, std::vector<std::string>> stratified_split(
    const std::vector<const PatientRecord*>& rest, double val_fraction, Rng& rng);

// ----------------------------------------------------------------------------
// Reports
// ----------------------------------------------------------------------------

struct PatientOutcome {
    std::string patient_id;
    Label truth = Label::H;
    DiseaseClass disease = DiseaseClass::None;
    Label predicted = Label::H;
    double confidence = 0.0;
    std::vector<double> cycle_probs;
};

struct DiseaseRow {
    int count = 0;
    int misclassified = 0;
};

struct SeedReport {
    std::uint64_t seed = 0;
    std::vector<FoldPlan> folds;
    std::vector<PatientOutcome> outcomes;  // one per balanced patient, fold order
    Metrics metrics;                       // patient-level confusion
    std::map<DiseaseClass, DiseaseRow> disease_table;  // rows for NH patients
    std::vector<std::string> holdout_ids;
    std::optional<double> holdout_tnr;
    hpo::ConfigPoint holdout_config;                // config behind the holdout model
    std::vector<std::vector<hpo::Trial>> fold_trials;
    std::vector<int> fold_best_trial;  // winning trial index per fold
};

struct AggregateEntry {
    MeanSd stat;
    int present = 0;  // seeds contributing
    int absent = 0;   // seeds excluded for an undefined ratio
};

struct EvalReport {
    std::vector<SeedReport> seeds;
    // Mean +- sd over seeds, recomputed from the stored confusion matrices.
    std::map<std::string, AggregateEntry> aggregates;
    bool identical_holdouts = false;  // two seeds drew the same holdout set
    // Median over (seed, patient) of the per-patient cycle-probability sd.
    std::optional<double> median_cycle_sd;
};

// ----------------------------------------------------------------------------
// Cross-validation
// ----------------------------------------------------------------------------

struct LoocvConfig {
    std::uint64_t seed = 0;
    int trials = 5;           // model-selection budget per fold
    double val_fraction = 0.25;
    dsp::DspConfig dsp;
};

// Leave-one-patient-out: for each patient, stratify the rest into TR/VL, run
// model selection on TR/VL, and score the held-out patient with the winning
// trial's model (retraining that configuration would replay the identical
// seeded fit). Accumulates patient-level confusion and per-cycle grids.
SeedReport loocv(const Dataset& balanced, const hpo::SearchSpace& space,
                 const train::TrainConfig& tcfg, const LoocvConfig& cfg,
                 train::SplitAudit* audit = nullptr);

// Fraction of the all-H holdout predicted H by one model; absent when empty.
std::optional<double> holdout_tnr(const nn::Network& net, const nn::Standardizer& st,
                                  const Dataset& holdout, const dsp::DspConfig& dsp_cfg);

struct EvalConfig {
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4};
    hpo::SearchSpace space;
    train::TrainConfig tcfg;
    int trials = 5;
    double val_fraction = 0.25;
    dsp::DspConfig dsp;
};

// Per seed: undersample, LOOCV, then a holdout model retrained with the
// designated first fold's winning configuration on that fold's TR+VL.
EvalReport run_full_eval(const Dataset& ds, const EvalConfig& cfg,
                         train::SplitAudit* audit = nullptr);

// Recomputes the aggregate table from the stored per-seed matrices.
std::map<std::string, AggregateEntry> aggregate_metrics(const std::vector<SeedReport>& seeds);

// Median per-patient standard deviation of cycle probabilities.
std::optional<double> median_cycle_sd(const std::vector<SeedReport>& seeds);

// ----------------------------------------------------------------------------
// Artifacts
// ----------------------------------------------------------------------------

struct HeatmapGrid {
    std::vector<std::string> patient_ids;
    std::vector<std::vector<double>> probs;  // per patient, per cycle (ragged)
    std::vector<Label> truth;
};

HeatmapGrid heatmap_grid(const SeedReport& sr);

// Writes the first-k-cycles grid: k prediction rows plus a truth row, one
// column per patient. Missing cycles appear as explicit gaps.
void export_heatmap(const HeatmapGrid& grid, int k, const std::filesystem::path& csv_path,
                    const std::filesystem::path& svg_path);

// Full report directory: per-seed matrices, aggregate table, disease table,
// heatmaps, machine-readable summary, and the run manifest. Content carries
// no timestamps so identical runs serialize identically.
void write_report(const std::filesystem::path& dir, const EvalReport& report,
                  const std::string& manifest_json);

}  // namespace cardio::eval
