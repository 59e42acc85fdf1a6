#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "selectnet/data.hpp"

namespace selectnet {

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'N', 'D', 'S'};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

// "# dim=<d> classes=<m>"
void parse_header(std::string_view line, int& dim, int& classes) {
  line = trim(line);
  if (line.empty() || line.front() != '#') throw ParseError("line 1: missing '# dim=<d> classes=<m>' header", 1);
  line.remove_prefix(1);
  dim = classes = -1;
  std::istringstream in{std::string(line)};
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string_view key(token.data(), eq);
    const std::string_view value(token.data() + eq + 1, token.size() - eq - 1);
    int parsed = 0;
    if (!parse_number(value, parsed)) throw ParseError("line 1: bad header value '" + token + "'", 1);
    if (key == "dim") dim = parsed;
    if (key == "classes") classes = parsed;
  }
  if (dim < 1 || classes < 1) throw ParseError("line 1: header needs positive dim and classes", 1);
}

LabeledDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("line 1: empty file", 1);
  int dim = 0, classes = 0;
  parse_header(line, dim, classes);

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    std::size_t fields = 0;
    std::size_t start = 0;
    const std::string prefix = "line " + std::to_string(line_no) + ": ";
    while (true) {
      const auto comma = text.find(',', start);
      const auto field = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      ++fields;
      if (fields <= static_cast<std::size_t>(dim)) {
        double v = 0;
        if (!parse_number(field, v)) throw ParseError(prefix + "bad feature value '" + std::string(field) + "'", line_no);
        values.push_back(v);
      } else if (fields == static_cast<std::size_t>(dim) + 1) {
        int y = 0;
        if (!parse_number(field, y)) throw ParseError(prefix + "bad label '" + std::string(field) + "'", line_no);
        if (y < 0 || y >= classes) throw ParseError(prefix + "label " + std::to_string(y) + " out of range", line_no);
        labels.push_back(y);
      }
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields != static_cast<std::size_t>(dim) + 1)
      throw ParseError(prefix + "expected " + std::to_string(dim + 1) + " fields, got " + std::to_string(fields),
                       line_no);
  }
  Matrix x = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(labels.size()), dim);
  return LabeledDataset(std::move(x), std::move(labels), classes);
}

void save_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# dim=" << ds.dim() << " classes=" << ds.num_classes() << '\n';
  std::array<char, 64> buf{};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) {
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), ds.features()(static_cast<Eigen::Index>(i), j));
      out.write(buf.data(), ptr - buf.data());
      out << ',';
    }
    out << ds.labels()[i] << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<unsigned char, 4> b = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b.data()), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

LabeledDataset load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw ParseError("offset 0: file too short for header", 0);
  if (std::memcmp(bytes.data(), kMagic.data(), 4) != 0) throw ParseError("offset 0: bad magic, expected SNDS", 0);
  const std::uint32_t count = get_u32(bytes.data() + 4);
  const std::uint32_t dim = get_u32(bytes.data() + 8);
  const std::uint32_t classes = get_u32(bytes.data() + 12);
  if (dim == 0 || classes == 0) throw ParseError("offset 8: dim and classes must be positive", 8);
  const std::size_t record = 1 + 4 * static_cast<std::size_t>(dim);
  Matrix x(count, dim);
  std::vector<int> labels(count);
  std::size_t offset = 16;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (offset + record > bytes.size())
      throw ParseError("offset " + std::to_string(offset) + ": truncated record " + std::to_string(i), offset);
    const int y = bytes[offset];
    if (static_cast<std::uint32_t>(y) >= classes)
      throw ParseError("offset " + std::to_string(offset) + ": label out of range", offset);
    labels[i] = y;
    for (std::uint32_t j = 0; j < dim; ++j) {
      const std::uint32_t raw = get_u32(bytes.data() + offset + 1 + 4 * j);
      x(i, j) = static_cast<double>(std::bit_cast<float>(raw));
    }
    offset += record;
  }
  if (offset != bytes.size())
    throw ParseError("offset " + std::to_string(offset) + ": trailing bytes after last record", offset);
  return LabeledDataset(std::move(x), std::move(labels), static_cast<int>(classes));
}

void save_binary(const LabeledDataset& ds, const std::filesystem::path& path) {
  if (ds.num_classes() > 256) throw InputError("binary format stores labels as u8; at most 256 classes");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(ds.size()));
  put_u32(out, static_cast<std::uint32_t>(ds.dim()));
  put_u32(out, static_cast<std::uint32_t>(ds.num_classes()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto label = static_cast<char>(static_cast<unsigned char>(ds.labels()[i]));
    out.write(&label, 1);
    for (Eigen::Index j = 0; j < ds.dim(); ++j)
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(ds.features()(static_cast<Eigen::Index>(i), j))));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

DatasetFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::Binary;
}

LabeledDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  return format == DatasetFormat::Csv ? load_csv(path) : load_binary(path);
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path, DatasetFormat format) {
  if (format == DatasetFormat::Csv)
    save_csv(ds, path);
  else
    save_binary(ds, path);
}

}  // namespace selectnet
