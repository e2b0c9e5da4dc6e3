#pragma once

// Matrix files.  Binary layout, all little-endian:
//   "JHSV" | u32 rows | u32 cols | u32 flags | [u32 n_plus if flags & 1] | column-major f64
// Anything not starting with the magic is read as CSV, one matrix row per
// line; a leading "# n_plus=K" line carries the signature.

#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "jhsvd/block_kernel.hpp"

namespace jhsvd {

struct MatrixFile {
  ColumnMatrix G;
  std::optional<Index> n_plus;
};

enum class MatrixFormat { binary, csv };

/// Picks csv for a ".csv" extension, binary otherwise.
MatrixFormat format_for(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const ColumnMatrix& G, std::optional<Index> n_plus = {},
                  std::optional<MatrixFormat> format = {});
MatrixFile read_matrix(const std::filesystem::path& path);

/// In-memory forms of the two encodings.
std::string encode_binary(const ColumnMatrix& G, std::optional<Index> n_plus);
std::string encode_csv(const ColumnMatrix& G, std::optional<Index> n_plus);
MatrixFile decode_matrix(const std::string& bytes);

/// One value per line, shortest round-trip representation.
void write_vector_csv(const std::filesystem::path& path, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector_csv(const std::filesystem::path& path);

/// Shortest representation that reads back to the same double.
std::string format_double(double x);

}  // namespace jhsvd
