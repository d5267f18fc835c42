#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "bevplan/scenario/types.hpp"

namespace bevplan::scenario {

struct DatasetError : std::runtime_error {
  explicit DatasetError(const std::string& what) : std::runtime_error(what) {}
};

struct DatasetManifest {
  int generator_version = 1;
  std::uint64_t count = 0;
  std::vector<std::uint64_t> seeds;
  std::string records_file = "records.bin";
};

// Writes `manifest` (plain text) plus a records file of length-prefixed,
// checksummed binary records into `dir`. Field order is fixed by the
// serializer in dataset.cpp; round trip is exact.
DatasetManifest write_dataset(const std::vector<Scenario>& scenarios,
                              const std::filesystem::path& dir,
                              int generator_version = 1);

DatasetManifest read_manifest(const std::filesystem::path& dir);

// Rejects version mismatches and corrupt records with the record index in
// the error, and cross-checks the record count against the manifest.
std::vector<Scenario> read_dataset(const std::filesystem::path& dir);

}  // namespace bevplan::scenario
