#include "mirror/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "mirror/nifti.hpp"
#include "mirror/preprocess.hpp"
#include "mirror/rng.hpp"

namespace mirror {

namespace {

using nlohmann::json;

std::string resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).string();
}

std::string case_name(int n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "case_%03d", n);
  return buf;
}

int derived_label(const Volume& y) { return count_nonzero(y) > 0 ? 1 : 0; }

}  // namespace

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read manifest " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ConfigError("manifest must be a JSON list: " + path.string());
  const auto base = path.parent_path();
  Manifest m;
  bool first = true;
  int n = 0;
  for (const auto& item : doc) {
    if (!item.is_object()) throw ConfigError("manifest entries must be objects");
    CaseEntry e;
    Modality modality;
    if (item.contains("ct") && item.contains("pet")) {
      modality = Modality::petct;
      e.a = resolve(base, item.at("ct").get<std::string>());
      e.b = resolve(base, item.at("pet").get<std::string>());
    } else if (item.contains("flair") && item.contains("t1gd")) {
      modality = Modality::brain;
      e.a = resolve(base, item.at("flair").get<std::string>());
      e.b = resolve(base, item.at("t1gd").get<std::string>());
    } else {
      throw ConfigError("manifest entry needs {ct, pet, mask} or {flair, t1gd, mask}");
    }
    if (!item.contains("mask")) throw ConfigError("manifest entry without mask");
    e.mask = resolve(base, item.at("mask").get<std::string>());
    e.label = item.value("label", -1);
    e.preprocessed = item.value("preprocessed", false);
    e.case_id = item.value("id", case_name(n));
    if (first) {
      m.modality = modality;
      first = false;
    } else if (modality != m.modality) {
      throw ConfigError("manifest mixes PET/CT and brain entries");
    }
    m.cases.push_back(std::move(e));
    ++n;
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  json doc = json::array();
  for (const auto& e : manifest.cases) {
    json item;
    item["id"] = e.case_id;
    if (manifest.modality == Modality::petct) {
      item["ct"] = e.a;
      item["pet"] = e.b;
    } else {
      item["flair"] = e.a;
      item["t1gd"] = e.b;
    }
    item["mask"] = e.mask;
    if (e.label >= 0) item["label"] = e.label;
    item["preprocessed"] = e.preprocessed;
    doc.push_back(item);
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << doc.dump(2) << '\n';
}

MultimodalSample load_case(const CaseEntry& entry, Modality modality) {
  MultimodalSample s;
  s.case_id = entry.case_id;
  auto a = load_volume(entry.a);
  auto b = load_volume(entry.b);
  auto y = load_volume(entry.mask);
  if (entry.preprocessed) {
    s.x_a = std::move(a);
    s.x_b = std::move(b);
    s.y = std::move(y);
  } else if (modality == Modality::petct) {
    auto [ct, pet] = preprocess_autopet(a, b);
    s.x_a = std::move(ct);
    s.x_b = std::move(pet);
    s.y = resample(y, autopet::kSpacing, Interpolation::nearest);
  } else {
    s.x_a = preprocess_mri(a);
    s.x_b = preprocess_mri(b);
    s.y = resample(y, {1.0, 1.0, 1.0}, Interpolation::nearest);
  }
  s.label = entry.label >= 0 ? entry.label : derived_label(s.y);
  s.validate();
  return s;
}

std::vector<MultimodalSample> load_dataset(const std::filesystem::path& manifest_path) {
  const auto m = read_manifest(manifest_path);
  if (m.cases.empty()) throw ConfigError("empty dataset: " + manifest_path.string());
  std::vector<MultimodalSample> out;
  out.reserve(m.cases.size());
  for (const auto& e : m.cases) out.push_back(load_case(e, m.modality));
  return out;
}

std::vector<MultimodalSample> phantom_dataset(const SynthOptions& options) {
  if (options.count < 1) throw ConfigError("count must be >= 1");
  if (options.size < 16) throw ConfigError("phantom size must be >= 16");
  std::vector<MultimodalSample> out;
  if (options.modality == Modality::petct) {
    PhantomSpec base;
    base.shape = {options.size, options.size, options.size};
    // Structures keep their proportions on volumes smaller than the default.
    const double k = std::min(1.0, static_cast<double>(options.size) / 64.0);
    base.organ_radius_mm = {k * base.organ_radius_mm.first, k * base.organ_radius_mm.second};
    base.lesion_radius_mm = {k * base.lesion_radius_mm.first, k * base.lesion_radius_mm.second};
    const auto specs = phantom_cohort(base, options.count, options.positive_fraction, options.max_lesions, options.seed);
    for (size_t n = 0; n < specs.size(); ++n) {
      auto s = generate_phantom(specs[n]);
      s.case_id = case_name(static_cast<int>(n));
      out.push_back(std::move(s));
    }
  } else {
    Philox rng = Philox(options.seed).fork(0xB8A1);
    for (int n = 0; n < options.count; ++n) {
      BrainPhantomSpec spec;
      spec.shape = {options.size, options.size, options.size};
      const double k = std::min(1.0, static_cast<double>(options.size) / 48.0);
      spec.edema_radius_mm = {k * spec.edema_radius_mm.first, k * spec.edema_radius_mm.second};
      spec.seed = rng.next_u64();
      auto s = generate_brain_phantom(spec);
      s.x_a = preprocess_mri(s.x_a);
      s.x_b = preprocess_mri(s.x_b);
      s.case_id = case_name(n);
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::filesystem::path synthesize_dataset(const std::filesystem::path& directory, const SynthOptions& options) {
  std::filesystem::create_directories(directory);
  const auto samples = phantom_dataset(options);
  Manifest m;
  m.modality = options.modality;
  const bool petct = options.modality == Modality::petct;
  for (const auto& s : samples) {
    CaseEntry e;
    e.case_id = s.case_id;
    e.a = s.case_id + (petct ? "_ct.nii.gz" : "_flair.nii.gz");
    e.b = s.case_id + (petct ? "_pet.nii.gz" : "_t1gd.nii.gz");
    e.mask = s.case_id + "_mask.nii.gz";
    e.label = s.label;
    e.preprocessed = true;
    save_volume(s.x_a, directory / e.a);
    save_volume(s.x_b, directory / e.b);
    save_mask(s.y, directory / e.mask);
    m.cases.push_back(std::move(e));
  }
  const auto path = directory / "manifest.json";
  write_manifest(path, m);
  return path;
}

}  // namespace mirror
