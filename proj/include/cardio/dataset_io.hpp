#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cardio/data_model.hpp"

namespace cardio::io {

// ----------------------------------------------------------------------------
// Dataset directory layout
//   <root>/manifest.json
//   <root>/signals/<patient>_<scene>.csv      header: t,gx,gy,gz,ax,ay,az
//   <root>/ground_truth.json                  optional, synthetic cohorts only
// ----------------------------------------------------------------------------

// Reads a dataset directory. Missing manifest throws IoError; any per-patient
// problem (unreadable/malformed signal file, wrong scene count) is recorded as
// a Diagnostic and the patient is skipped or flagged non-trainable.
Dataset load_dataset(const std::filesystem::path& root);

// Writes manifest + signal files. Doubles are written in shortest
// round-trip form, so save(load(x)) reproduces signal bytes exactly.
void save_dataset(const Dataset& ds, const std::filesystem::path& root);

// ----------------------------------------------------------------------------
// Ground-truth sidecar (analytic respiratory extrema of synthetic signals)
// ----------------------------------------------------------------------------

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& root);
GroundTruth load_ground_truth(const std::filesystem::path& root);  // empty if absent

// ----------------------------------------------------------------------------
// Cycle archive (preprocess output)
//   <root>/index.json
//   <root>/cycles/<patient>_c<k>.csv          300 rows x 30 columns
// ----------------------------------------------------------------------------

void save_examples(const std::vector<PatientExample>& examples,
                   const std::filesystem::path& root);
std::vector<PatientExample> load_examples(const std::filesystem::path& root);

// ----------------------------------------------------------------------------
// Low-level helpers (shared by tests and report writers)
// ----------------------------------------------------------------------------

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

}  // namespace cardio::io
