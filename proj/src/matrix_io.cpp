#include "jhsvd/matrix_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>
#include <vector>

#include "jhsvd/error.hpp"

namespace jhsvd {

namespace {

constexpr std::string_view magic = "JHSV";
constexpr std::uint32_t flag_signature = 1;

void put_u64(std::string& out, std::uint64_t x, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at, int bytes) {
  std::uint64_t x = 0;
  for (int i = 0; i < bytes; ++i) x |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return x;
}

std::uint32_t checked_u32(Index x, const char* what) {
  if (x < 0 || x > static_cast<Index>(std::numeric_limits<std::uint32_t>::max()))
    throw InvalidArgument(std::string("matrix ") + what + " does not fit the file format");
  return static_cast<std::uint32_t>(x);
}

double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size())
    throw IoError("cannot parse number '" + std::string(s) + "'");
  return x;
}

std::optional<Index> parse_nplus_comment(std::string_view line) {
  constexpr std::string_view key = "n_plus=";
  const auto at = line.find(key);
  if (at == std::string_view::npos) return std::nullopt;
  std::string_view v = line.substr(at + key.size());
  long long k = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), k);
  if (ec != std::errc() || k < 0) throw IoError("bad n_plus comment");
  return static_cast<Index>(k);
}

MatrixFile decode_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::optional<Index> n_plus;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[line.find_first_not_of(" \t")] == '#') {
      if (auto k = parse_nplus_comment(line)) n_plus = k;
      continue;
    }
    std::vector<double> row;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      row.push_back(parse_double(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw IoError("ragged CSV matrix");
    rows.push_back(std::move(row));
  }
  MatrixFile f;
  const Index m = static_cast<Index>(rows.size());
  const Index n = m ? static_cast<Index>(rows.front().size()) : 0;
  f.G.resize(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) f.G(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  f.n_plus = n_plus;
  if (f.n_plus && *f.n_plus > n) throw IoError("n_plus exceeds the column count");
  return f;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void spill(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), p);
}

MatrixFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? MatrixFormat::csv : MatrixFormat::binary;
}

std::string encode_binary(const ColumnMatrix& G, std::optional<Index> n_plus) {
  std::string out(magic);
  put_u64(out, checked_u32(G.rows(), "rows"), 4);
  put_u64(out, checked_u32(G.cols(), "cols"), 4);
  put_u64(out, n_plus ? flag_signature : 0, 4);
  if (n_plus) put_u64(out, checked_u32(*n_plus, "n_plus"), 4);
  out.reserve(out.size() + 8 * static_cast<std::size_t>(G.size()));
  for (Index k = 0; k < G.size(); ++k) put_u64(out, std::bit_cast<std::uint64_t>(G.data()[k]), 8);
  return out;
}

std::string encode_csv(const ColumnMatrix& G, std::optional<Index> n_plus) {
  std::string out;
  if (n_plus) out += "# n_plus=" + std::to_string(*n_plus) + "\n";
  for (Index i = 0; i < G.rows(); ++i) {
    for (Index j = 0; j < G.cols(); ++j) {
      if (j) out += ',';
      out += format_double(G(i, j));
    }
    out += '\n';
  }
  return out;
}

MatrixFile decode_matrix(const std::string& bytes) {
  if (bytes.compare(0, magic.size(), magic) != 0) return decode_csv(bytes);
  if (bytes.size() < 16) throw IoError("truncated matrix header");
  const auto rows = static_cast<Index>(get_u64(bytes, 4, 4));
  const auto cols = static_cast<Index>(get_u64(bytes, 8, 4));
  const auto flags = static_cast<std::uint32_t>(get_u64(bytes, 12, 4));
  if (flags & ~flag_signature) throw IoError("unknown matrix flags");
  std::size_t at = 16;
  MatrixFile f;
  if (flags & flag_signature) {
    if (bytes.size() < 20) throw IoError("truncated matrix header");
    f.n_plus = static_cast<Index>(get_u64(bytes, 16, 4));
    at = 20;
    if (*f.n_plus > cols) throw IoError("n_plus exceeds the column count");
  }
  const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (bytes.size() != at + 8 * count) throw IoError("matrix payload size does not match its header");
  f.G.resize(rows, cols);
  for (std::size_t k = 0; k < count; ++k) f.G.data()[k] = std::bit_cast<double>(get_u64(bytes, at + 8 * k, 8));
  return f;
}

void write_matrix(const std::filesystem::path& path, const ColumnMatrix& G, std::optional<Index> n_plus,
                  std::optional<MatrixFormat> format) {
  const MatrixFormat fmt = format.value_or(format_for(path));
  spill(path, fmt == MatrixFormat::csv ? encode_csv(G, n_plus) : encode_binary(G, n_plus));
}

MatrixFile read_matrix(const std::filesystem::path& path) { return decode_matrix(slurp(path)); }

void write_vector_csv(const std::filesystem::path& path, const Eigen::VectorXd& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) out += format_double(v[i]) + "\n";
  spill(path, out);
}

Eigen::VectorXd read_vector_csv(const std::filesystem::path& path) {
  const MatrixFile f = decode_csv(slurp(path));
  if (f.G.cols() > 1) throw IoError("expected one value per line in " + path.string());
  return f.G.cols() ? Eigen::VectorXd(f.G.col(0)) : Eigen::VectorXd();
}

}  // namespace jhsvd
