#pragma once

#include "fhn/common.hpp"
#include "fhn/dg.hpp"
#include "fhn/reduction.hpp"

#include <string>
#include <utility>
#include <vector>

namespace fhn::io {

/// Shortest round-trip text for a double ("%.17g").
std::string format_double(double value);

/// Rows of pre-formatted cells under a header; written with '\n' endings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  void write(const std::string& path) const;
};

/// Singular values with their cumulative information content.
CsvTable singular_value_table(const Vector& sigma);

/// Legacy ASCII VTK unstructured grid. Every triangle gets its own three
/// points so discontinuous fields are shown without averaging.
void write_vtk(const std::string& path, const DgSpace& space,
               const std::vector<std::pair<std::string, const Vector*>>& fields);

/// Matrix Market coordinate (sparse) and array (dense) formats.
void write_matrix_market(const std::string& path, const SparseMatrix& m);
void write_matrix_market(const std::string& path, const Matrix& m);

/// Basis and model dumps: one CSV per matrix inside `dir` with `prefix`.
void write_pod(const std::string& dir, const std::string& prefix, const PodBasis& pod);
void write_deim(const std::string& dir, const std::string& prefix, const DeimModel& deim);
void write_dmd(const std::string& dir, const std::string& prefix, const DmdModel& dmd);

/// Raw little-endian dump of trajectories and vectors for the stage cache.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);
  void scalar(double v);
  void integer(long v);
  void vector(const Vector& v);
  void vectors(const std::vector<Vector>& vs);
  void doubles(const std::vector<double>& vs);
  void close();

 private:
  std::string path_, tmp_;
  std::vector<char> buffer_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);
  double scalar();
  long integer();
  Vector vector();
  std::vector<Vector> vectors();
  std::vector<double> doubles();

 private:
  void read(void* dst, size_t bytes);
  std::vector<char> data_;
  size_t pos_ = 0;
  std::string path_;
};

}  // namespace fhn::io
