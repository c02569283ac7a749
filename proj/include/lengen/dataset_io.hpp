#pragma once

// Newline-delimited dataset files: one header record carrying the token
// table, then one record per sample.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "lengen/datagen.hpp"

namespace lengen::data {

struct DatasetHeader {
  DomainSpec spec;
  SamplerSpec sampler;
  std::int64_t count = 0;
  std::vector<std::string> vocab;
};

void write_dataset(std::ostream& out, const DatasetHeader& header, const std::vector<Sample>& samples);
void write_dataset(const std::filesystem::path& path, const DatasetHeader& header, const std::vector<Sample>& samples);

struct Dataset {
  DatasetHeader header;
  std::vector<Sample> samples;
};

/// Throws std::runtime_error on malformed records or a token table that
/// differs from this build's vocabulary.
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace lengen::data
