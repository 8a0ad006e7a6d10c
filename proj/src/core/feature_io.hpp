#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "dataset.hpp"

namespace avood {

// Binary "AVF1" feature file.
//   bytes 0-3   magic "AVF1"
//   u32 × 4     M_total, D, C_total, D_t (little-endian)
//   u8 × C      per-class seen flag
//   u8 × M      per-sample split flag (0 = train, 1 = test)
//   u32 × M     per-sample label
//   f64 × M·D   features, row-major
//   f64 × C·D_t class embeddings, row-major
//   C strings   length-prefixed UTF-8 class names
void save_features_binary(std::ostream& out, const Dataset& ds, const ClassEmbeddingTable& table);
GeneratedData load_features_binary(std::istream& in, const std::string& label = "AVF1");

// CSV fallback: header `label,split,f0..f{D-1}`, one row per sample, plus a
// sidecar CSV (`class,seen,e0..e{Dt-1}`) holding class names, seen flags and
// embeddings. Doubles are printed with 17 significant digits so the
// round-trip is bit-exact.
void save_features_csv(std::ostream& data_out, std::ostream& classes_out, const Dataset& ds,
                       const ClassEmbeddingTable& table);
GeneratedData load_features_csv(std::istream& data_in, std::istream& classes_in,
                                const std::string& label = "CSV");

// Path-level helpers. A ".csv" extension selects the CSV pair (sidecar path =
// stem + ".classes.csv"); anything else is treated as AVF1 binary.
void save_features(const std::string& path, const Dataset& ds, const ClassEmbeddingTable& table);
GeneratedData load_features(const std::string& path);

std::string csv_sidecar_path(const std::string& data_path);

}  // namespace avood
