#include "feature_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "errors.hpp"

namespace avood {

namespace {

constexpr char kMagic[4] = {'A', 'V', 'F', '1'};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok, const std::string& label, size_t line) {
  try {
    size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DataError(label + ": bad numeric field '" + tok + "' on line " + std::to_string(line));
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void save_features_binary(std::ostream& out, const Dataset& ds, const ClassEmbeddingTable& table) {
  ds.validate();
  if (table.num_classes() != ds.num_classes())
    throw ValidationError("save_features: embedding table class count differs from dataset");
  LeWriter w(out);
  w.bytes(kMagic, 4);
  w.u32(static_cast<uint32_t>(ds.num_samples()));
  w.u32(static_cast<uint32_t>(ds.dim()));
  w.u32(static_cast<uint32_t>(ds.num_classes()));
  w.u32(static_cast<uint32_t>(table.dim()));
  for (uint8_t f : ds.seen_mask) w.u8(f);
  for (Split s : ds.split) w.u8(static_cast<uint8_t>(s));
  for (uint32_t l : ds.labels) w.u32(l);
  w.f64_array(ds.features.data(), ds.features.size());
  w.f64_array(table.embeddings.data(), table.embeddings.size());
  for (const auto& name : ds.class_names) w.str(name);
  if (!w.good()) throw DataError("save_features: write failed");
}

GeneratedData load_features_binary(std::istream& in, const std::string& label) {
  LeReader r(in, label);
  r.expect_magic(kMagic, 4);
  const uint32_t m = r.u32();
  const uint32_t d = r.u32();
  const uint32_t c = r.u32();
  const uint32_t dt = r.u32();
  if (d == 0 || c == 0) throw FormatError(label + ": zero dimension in header", 4);

  GeneratedData g;
  Dataset& ds = g.dataset;
  ds.seen_mask.resize(c);
  for (uint32_t i = 0; i < c; ++i) ds.seen_mask[i] = r.u8();
  ds.split.resize(m);
  for (uint32_t i = 0; i < m; ++i) {
    const size_t at = r.offset();
    const uint8_t s = r.u8();
    if (s > 1) throw FormatError(label + ": invalid split flag", at);
    ds.split[i] = static_cast<Split>(s);
  }
  ds.labels.resize(m);
  for (uint32_t i = 0; i < m; ++i) {
    const size_t at = r.offset();
    ds.labels[i] = r.u32();
    if (ds.labels[i] >= c) throw FormatError(label + ": label out of range", at);
  }
  ds.features = Matrix(m, d);
  r.f64_array(ds.features.data(), ds.features.size());
  g.embeddings.embeddings = Matrix(c, dt);
  r.f64_array(g.embeddings.embeddings.data(), g.embeddings.embeddings.size());
  ds.class_names.resize(c);
  for (uint32_t i = 0; i < c; ++i) ds.class_names[i] = r.str();
  r.expect_eof();
  ds.validate();
  return g;
}

void save_features_csv(std::ostream& data_out, std::ostream& classes_out, const Dataset& ds,
                       const ClassEmbeddingTable& table) {
  ds.validate();
  if (table.num_classes() != ds.num_classes())
    throw ValidationError("save_features: embedding table class count differs from dataset");
  for (const auto& name : ds.class_names) {
    if (name.find(',') != std::string::npos || name.find('\n') != std::string::npos)
      throw ValidationError("save_features: class name not CSV-safe: " + name);
  }

  data_out << "label,split";
  for (size_t j = 0; j < ds.dim(); ++j) data_out << ",f" << j;
  data_out << "\n";
  for (size_t i = 0; i < ds.num_samples(); ++i) {
    data_out << ds.labels[i] << ',' << (ds.split[i] == Split::train ? "train" : "test");
    for (double v : ds.features.row(i)) data_out << ',' << format_double(v);
    data_out << "\n";
  }

  classes_out << "class,seen";
  for (size_t j = 0; j < table.dim(); ++j) classes_out << ",e" << j;
  classes_out << "\n";
  for (size_t ci = 0; ci < ds.num_classes(); ++ci) {
    classes_out << ds.class_names[ci] << ',' << (ds.seen_mask[ci] ? 1 : 0);
    for (double v : table.embeddings.row(ci)) classes_out << ',' << format_double(v);
    classes_out << "\n";
  }
  if (!data_out.good() || !classes_out.good()) throw DataError("save_features: write failed");
}

GeneratedData load_features_csv(std::istream& data_in, std::istream& classes_in,
                                const std::string& label) {
  GeneratedData g;
  Dataset& ds = g.dataset;

  // Sidecar first: class names, seen flags, embeddings.
  std::string line;
  if (!std::getline(classes_in, line)) throw DataError(label + ": empty class sidecar");
  {
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "class" || header[1] != "seen")
      throw DataError(label + ": class sidecar header must start with 'class,seen'");
  }
  std::vector<std::vector<double>> embed_rows;
  size_t line_no = 1;
  while (std::getline(classes_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < 2) throw DataError(label + ": short class row on line " + std::to_string(line_no));
    ds.class_names.push_back(f[0]);
    if (f[1] != "0" && f[1] != "1")
      throw DataError(label + ": seen flag must be 0 or 1 on line " + std::to_string(line_no));
    ds.seen_mask.push_back(f[1] == "1" ? 1 : 0);
    std::vector<double> row;
    for (size_t j = 2; j < f.size(); ++j) row.push_back(parse_double(f[j], label, line_no));
    if (!embed_rows.empty() && row.size() != embed_rows.front().size())
      throw DataError(label + ": ragged class embedding row on line " + std::to_string(line_no));
    embed_rows.push_back(std::move(row));
  }
  if (embed_rows.empty()) throw DataError(label + ": class sidecar has no classes");
  g.embeddings.embeddings = Matrix(embed_rows.size(), embed_rows.front().size());
  for (size_t i = 0; i < embed_rows.size(); ++i)
    for (size_t j = 0; j < embed_rows[i].size(); ++j) g.embeddings.embeddings(i, j) = embed_rows[i][j];

  // Main file.
  if (!std::getline(data_in, line)) throw DataError(label + ": empty data file");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "label" || header[1] != "split")
    throw DataError(label + ": data header must start with 'label,split,f0'");
  const size_t d = header.size() - 2;
  std::vector<std::vector<double>> rows;
  line_no = 1;
  while (std::getline(data_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != d + 2)
      throw DataError(label + ": expected " + std::to_string(d + 2) + " fields, got " +
                      std::to_string(f.size()) + " on line " + std::to_string(line_no));
    const double lab = parse_double(f[0], label, line_no);
    if (lab < 0 || lab != static_cast<double>(static_cast<uint32_t>(lab)) ||
        static_cast<size_t>(lab) >= ds.class_names.size())
      throw DataError(label + ": label out of range on line " + std::to_string(line_no));
    ds.labels.push_back(static_cast<uint32_t>(lab));
    if (f[1] == "train" || f[1] == "0") {
      ds.split.push_back(Split::train);
    } else if (f[1] == "test" || f[1] == "1") {
      ds.split.push_back(Split::test);
    } else {
      throw DataError(label + ": split must be train/test on line " + std::to_string(line_no));
    }
    std::vector<double> row;
    row.reserve(d);
    for (size_t j = 0; j < d; ++j) row.push_back(parse_double(f[j + 2], label, line_no));
    rows.push_back(std::move(row));
  }
  ds.features = Matrix(rows.size(), d);
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < d; ++j) ds.features(i, j) = rows[i][j];
  ds.validate();
  return g;
}

std::string csv_sidecar_path(const std::string& data_path) {
  const size_t dotpos = data_path.rfind(".csv");
  if (dotpos == std::string::npos || dotpos + 4 != data_path.size())
    throw ValidationError("csv_sidecar_path: path must end in .csv");
  return data_path.substr(0, dotpos) + ".classes.csv";
}

namespace {
bool has_csv_extension(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}
}  // namespace

void save_features(const std::string& path, const Dataset& ds, const ClassEmbeddingTable& table) {
  if (has_csv_extension(path)) {
    std::ofstream data_out(path);
    if (!data_out) throw DataError("save_features: cannot open " + path);
    std::ofstream classes_out(csv_sidecar_path(path));
    if (!classes_out) throw DataError("save_features: cannot open " + csv_sidecar_path(path));
    save_features_csv(data_out, classes_out, ds, table);
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_features: cannot open " + path);
    save_features_binary(out, ds, table);
  }
}

GeneratedData load_features(const std::string& path) {
  if (has_csv_extension(path)) {
    std::ifstream data_in(path);
    if (!data_in) throw DataError("load_features: cannot open " + path);
    std::ifstream classes_in(csv_sidecar_path(path));
    if (!classes_in) throw DataError("load_features: cannot open " + csv_sidecar_path(path));
    return load_features_csv(data_in, classes_in, path);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_features: cannot open " + path);
  return load_features_binary(in, path);
}

}  // namespace avood
