#pragma once

// Text formats for datasets and concept matrices.
//
// Dataset file:
//   #cqa-dataset v1 n=<n> k=<k> d=<d> m=<m>
//   {"names": [...], "groups": [[...], ...]}
//   <split> | <d features> | <k concepts> | <label>      (n lines)
//
// Concept file:
//   #cqa-concepts v1 n=<n> k=<k> kind=<binary|scores>
//   <k values>                                            (n lines)
//
// Fields are comma-separated within a section. Reals are written with 17
// significant digits; binary concepts as 0/1 integers.

#include <filesystem>
#include <string>
#include <string_view>

#include "cqa/datamodel.hpp"

namespace cqa {

LabeledDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);

LabeledDataset parse_dataset(std::string_view text);
std::string format_dataset(const LabeledDataset& ds);

ConceptMatrix load_concepts(const std::filesystem::path& path);
void save_concepts(const ConceptMatrix& concepts, const std::filesystem::path& path);

ConceptMatrix parse_concepts(std::string_view text);
std::string format_concepts(const ConceptMatrix& concepts);

// 17 significant digits; always round-trips a double.
std::string format_real(double v);

std::string read_file(const std::filesystem::path& path);
// Writes to "<path>.tmp" and renames over path once the write succeeded.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace cqa
