#include "cqa/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cqa/error.hpp"

namespace cqa {
namespace {

using json = nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(s.substr(start)));
      break;
    }
    out.push_back(trim(s.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) {
      line = text_.substr(pos_);
      pos_ = text_.size();
    } else {
      line = text_.substr(pos_, end - pos_);
      pos_ = end + 1;
    }
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return true;
  }

  int line_no() const { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_no_ = 0;
};

[[noreturn]] void fail(int line, const std::string& msg) {
  throw DataError("line " + std::to_string(line) + ": " + msg);
}

double parse_real(std::string_view tok, int line, const std::string& where) {
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (tok.empty() || ec != std::errc() || ptr != last) {
    fail(line, where + ": cannot parse '" + std::string(tok) + "' as a number");
  }
  if (!std::isfinite(v)) fail(line, where + ": non-finite value '" + std::string(tok) + "'");
  return v;
}

long long parse_int(std::string_view tok, int line, const std::string& where) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
    fail(line, where + ": cannot parse '" + std::string(tok) + "' as an integer");
  }
  return v;
}

// "#tag v1 a=1 b=2" -> {a: "1", b: "2"}; checks tag and version.
std::map<std::string, std::string> parse_header(std::string_view line, std::string_view tag,
                                                std::initializer_list<std::string_view> keys) {
  const auto parts = split_on(line, ' ');
  if (parts.size() < 2 || parts[0] != tag || parts[1] != "v1") {
    fail(1, "malformed header, expected '" + std::string(tag) + " v1 ...'");
  }
  std::map<std::string, std::string> out;
  for (std::size_t i = 2; i < parts.size(); ++i) {
    if (parts[i].empty()) continue;
    const auto eq = parts[i].find('=');
    if (eq == std::string_view::npos) fail(1, "malformed header field '" + std::string(parts[i]) + "'");
    out.emplace(std::string(parts[i].substr(0, eq)), std::string(parts[i].substr(eq + 1)));
  }
  for (auto key : keys) {
    if (!out.count(std::string(key))) fail(1, "header is missing '" + std::string(key) + "='");
  }
  return out;
}

int header_count(const std::map<std::string, std::string>& h, const std::string& key, int min) {
  const long long v = parse_int(h.at(key), 1, "header field " + key);
  if (v < min) fail(1, "header field " + key + " must be >= " + std::to_string(min));
  return static_cast<int>(v);
}

std::string col_where(int row, const char* section, int col) {
  return "row " + std::to_string(row) + ", " + section + " column " + std::to_string(col);
}

void append_concept(std::string& out, double v, bool binary) {
  if (binary) {
    out += v == 1.0 ? '1' : '0';
  } else {
    out += format_real(v);
  }
}

}  // namespace

std::string format_real(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw DataError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot move output into place at '" + path.string() + "'");
  }
}

LabeledDataset parse_dataset(std::string_view text) {
  LineReader reader(text);
  std::string_view line;
  if (!reader.next(line)) fail(1, "empty dataset file");
  const auto header = parse_header(line, "#cqa-dataset", {"n", "k", "d", "m"});
  const int n = header_count(header, "n", 0);
  const int k = header_count(header, "k", 1);
  const int d = header_count(header, "d", 0);
  const int m = header_count(header, "m", 2);

  if (!reader.next(line)) fail(2, "missing vocabulary line");
  Vocabulary vocab;
  try {
    const json v = json::parse(line);
    auto names = v.at("names").get<std::vector<std::string>>();
    std::vector<std::vector<int>> groups;
    if (v.contains("groups")) groups = v.at("groups").get<std::vector<std::vector<int>>>();
    vocab = Vocabulary(std::move(names), std::move(groups));
  } catch (const json::exception& e) {
    fail(2, std::string("malformed vocabulary JSON: ") + e.what());
  } catch (const DataError& e) {
    fail(2, e.what());
  }
  if (vocab.size() != k) {
    fail(2, "vocabulary has " + std::to_string(vocab.size()) + " names, header says k=" +
                std::to_string(k));
  }

  Matrix features(n, d);
  Matrix concepts(n, k);
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<Split> split(static_cast<std::size_t>(n));
  for (int row = 0; row < n; ++row) {
    if (!reader.next(line)) fail(reader.line_no() + 1, "expected " + std::to_string(n) + " data rows, found " + std::to_string(row));
    const int ln = reader.line_no();
    const auto sections = split_on(line, '|');
    if (sections.size() != 4) {
      fail(ln, "row " + std::to_string(row) + ": expected 4 '|'-separated sections, found " +
                   std::to_string(sections.size()));
    }
    const auto tag = split_from_string(sections[0]);
    if (!tag) fail(ln, "row " + std::to_string(row) + ": unknown split tag '" + std::string(sections[0]) + "'");
    split[row] = *tag;

    if (d > 0) {
      const auto fs = split_on(sections[1], ',');
      if (static_cast<int>(fs.size()) != d) {
        fail(ln, "row " + std::to_string(row) + ": expected " + std::to_string(d) +
                     " features, found " + std::to_string(fs.size()));
      }
      for (int j = 0; j < d; ++j) features(row, j) = parse_real(fs[j], ln, col_where(row, "feature", j));
    } else if (!sections[1].empty()) {
      fail(ln, "row " + std::to_string(row) + ": features present but header says d=0");
    }

    const auto cs = split_on(sections[2], ',');
    if (static_cast<int>(cs.size()) != k) {
      fail(ln, "row " + std::to_string(row) + ": expected " + std::to_string(k) +
                   " concept values, found " + std::to_string(cs.size()));
    }
    for (int j = 0; j < k; ++j) {
      const double v = parse_real(cs[j], ln, col_where(row, "concept", j));
      if (v != 0.0 && v != 1.0) {
        fail(ln, col_where(row, "concept", j) + ": non-binary value '" + std::string(cs[j]) + "'");
      }
      concepts(row, j) = v;
    }

    const long long y = parse_int(sections[3], ln, "row " + std::to_string(row) + ", label");
    if (y < 0 || y >= m) {
      fail(ln, "row " + std::to_string(row) + ": label " + std::to_string(y) + " outside [0, " +
                   std::to_string(m) + ")");
    }
    labels[row] = static_cast<int>(y);
  }
  while (reader.next(line)) {
    if (!trim(line).empty()) fail(reader.line_no(), "trailing content after " + std::to_string(n) + " data rows");
  }
  return LabeledDataset(std::move(features), ConceptMatrix(std::move(concepts), ConceptKind::kBinaryLabels),
                        LabelVector(std::move(labels), m), std::move(vocab), std::move(split));
}

std::string format_dataset(const LabeledDataset& ds) {
  if (!ds.concepts().is_binary()) {
    throw DataError("dataset ground-truth concepts must be binary labels");
  }
  const Index n = ds.size();
  const int k = ds.num_concepts();
  const Index d = ds.feature_dim();
  std::string out = "#cqa-dataset v1 n=" + std::to_string(n) + " k=" + std::to_string(k) +
                    " d=" + std::to_string(d) + " m=" + std::to_string(ds.num_classes()) + "\n";
  json vocab;
  vocab["names"] = ds.vocabulary().names();
  vocab["groups"] = ds.vocabulary().groups();
  out += vocab.dump();
  out += '\n';
  for (Index i = 0; i < n; ++i) {
    out += to_string(ds.split()[static_cast<std::size_t>(i)]);
    out += " | ";
    for (Index j = 0; j < d; ++j) {
      if (j) out += ',';
      out += format_real(ds.features()(i, j));
    }
    out += " | ";
    for (int j = 0; j < k; ++j) {
      if (j) out += ',';
      append_concept(out, ds.concepts().values()(i, j), true);
    }
    out += " | ";
    out += std::to_string(ds.labels()[i]);
    out += '\n';
  }
  return out;
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  try {
    return parse_dataset(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
  write_file_atomic(path, format_dataset(ds));
}

ConceptMatrix parse_concepts(std::string_view text) {
  LineReader reader(text);
  std::string_view line;
  if (!reader.next(line)) fail(1, "empty concepts file");
  const auto header = parse_header(line, "#cqa-concepts", {"n", "k", "kind"});
  const int n = header_count(header, "n", 0);
  const int k = header_count(header, "k", 1);
  ConceptKind kind;
  try {
    kind = concept_kind_from_string(header.at("kind"));
  } catch (const DataError& e) {
    fail(1, e.what());
  }
  Matrix values(n, k);
  for (int row = 0; row < n; ++row) {
    if (!reader.next(line)) fail(reader.line_no() + 1, "expected " + std::to_string(n) + " rows, found " + std::to_string(row));
    const int ln = reader.line_no();
    const auto cs = split_on(line, ',');
    if (static_cast<int>(cs.size()) != k) {
      fail(ln, "row " + std::to_string(row) + ": expected " + std::to_string(k) + " values, found " +
                   std::to_string(cs.size()));
    }
    for (int j = 0; j < k; ++j) {
      const double v = parse_real(cs[j], ln, col_where(row, "concept", j));
      if (kind == ConceptKind::kBinaryLabels && v != 0.0 && v != 1.0) {
        fail(ln, col_where(row, "concept", j) + ": non-binary value '" + std::string(cs[j]) + "'");
      }
      values(row, j) = v;
    }
  }
  while (reader.next(line)) {
    if (!trim(line).empty()) fail(reader.line_no(), "trailing content after " + std::to_string(n) + " rows");
  }
  return ConceptMatrix(std::move(values), kind);
}

std::string format_concepts(const ConceptMatrix& concepts) {
  std::string out = "#cqa-concepts v1 n=" + std::to_string(concepts.rows()) +
                    " k=" + std::to_string(concepts.cols()) + " kind=" +
                    std::string(to_string(concepts.kind())) + "\n";
  for (Index i = 0; i < concepts.rows(); ++i) {
    for (Index j = 0; j < concepts.cols(); ++j) {
      if (j) out += ',';
      append_concept(out, concepts.values()(i, j), concepts.is_binary());
    }
    out += '\n';
  }
  return out;
}

ConceptMatrix load_concepts(const std::filesystem::path& path) {
  try {
    return parse_concepts(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_concepts(const ConceptMatrix& concepts, const std::filesystem::path& path) {
  write_file_atomic(path, format_concepts(concepts));
}

}  // namespace cqa
