#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mirror/phantom.hpp"
#include "mirror/volume.hpp"

namespace mirror {

enum class Modality { petct, brain };

/// One manifest entry. For PET/CT cases `a` is the CT path and `b` the PET
/// path; for brain cases `a` is FLAIR and `b` T1Gd.
struct CaseEntry {
  std::string case_id;
  std::string a;
  std::string b;
  std::string mask;
  /// Tumor-presence flag; -1 derives it from the mask.
  int label = -1;
  /// True when the volumes are already resampled and normalised.
  bool preprocessed = false;
};

struct Manifest {
  Modality modality = Modality::petct;
  std::vector<CaseEntry> cases;
};

/// Reads a JSON list of {ct, pet, mask[, label, id, preprocessed]} or
/// {flair, t1gd, mask[, id, preprocessed]} objects. Relative paths resolve
/// against the manifest's directory.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Loads every case, applying the modality's preprocessing unless the entry
/// is flagged as preprocessed. Throws on an empty manifest.
std::vector<MultimodalSample> load_dataset(const std::filesystem::path& manifest_path);
MultimodalSample load_case(const CaseEntry& entry, Modality modality);

struct SynthOptions {
  Modality modality = Modality::petct;
  int count = 10;
  /// Share of lesion-bearing PET/CT cases (brain cases always carry a tumor).
  double positive_fraction = 0.5;
  int max_lesions = 3;
  int64_t size = 64;
  uint64_t seed = 0;
};

/// Writes `count` phantom cases as NIfTI files plus manifest.json into
/// `directory`; returns the manifest path.
std::filesystem::path synthesize_dataset(const std::filesystem::path& directory, const SynthOptions& options);

/// In-memory phantom cohort with the same seeding as synthesize_dataset.
std::vector<MultimodalSample> phantom_dataset(const SynthOptions& options);

}  // namespace mirror
