#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "transfuse/learners.hpp"
#include "transfuse/preprocess.hpp"
#include "transfuse/stacking.hpp"

namespace transfuse {

inline constexpr int kBundleVersion = 1;

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string created;  // ISO-8601 UTC
  std::string tool_version;
  int held_out_year = 0;  // 0 when trained on every year
};

struct ModelBundle {
  int version = kBundleVersion;
  FittedPreprocessor preprocessor;
  std::vector<FittedModel> models;
  std::optional<StackedModel> stack;
  Provenance provenance;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Header line "transfuse-bundle <version> <bytes> <fnv1a64>" then a JSON body.
std::string serialize_bundle(const ModelBundle& b);
// Throws BundleError on version mismatch, truncation or checksum failure.
ModelBundle deserialize_bundle(std::string_view text);

void save_bundle(const ModelBundle& b, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

// Fingerprints of fitted state, stable across processes.
std::uint64_t state_hash(const FittedPreprocessor& p);
std::uint64_t state_hash(const FittedModel& m);
std::uint64_t state_hash(const StackedModel& s);

// Hyperparameter (name, value) pairs sorted by name.
std::vector<std::pair<std::string, std::string>> spec_fields(const ModelSpec& spec);

// Canonical text for a spec, e.g. "RF(bootstrap=true,max_depth=10,...)".
std::string describe_spec(const ModelSpec& spec);

}  // namespace transfuse
