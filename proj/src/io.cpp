#include "fhn/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace fhn::io {

namespace {

std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

void write_dense_csv(const std::string& path, const Matrix& m) {
  std::ofstream out = open_out(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) throw InputError("csv row width does not match header");
  rows.push_back(std::move(row));
}

void CsvTable::write(const std::string& path) const {
  std::ofstream out = open_out(path);
  auto line = [&out](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

CsvTable singular_value_table(const Vector& sigma) {
  CsvTable t{{"index", "sigma", "ric"}, {}};
  for (int i = 0; i < sigma.size(); ++i) {
    t.add_row({std::to_string(i + 1), format_double(sigma(i)),
               format_double(relative_information_content(sigma, i + 1))});
  }
  return t;
}

void write_vtk(const std::string& path, const DgSpace& space,
               const std::vector<std::pair<std::string, const Vector*>>& fields) {
  const Mesh& mesh = space.mesh();
  const int nt = mesh.num_triangles();
  std::ofstream out = open_out(path);
  out << "# vtk DataFile Version 3.0\nfhn dG P1 field\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << 3 * nt << " double\n";
  for (int t = 0; t < nt; ++t) {
    for (int v : mesh.triangles[t]) {
      out << format_double(mesh.vertices[v].x) << ' ' << format_double(mesh.vertices[v].y) << " 0\n";
    }
  }
  out << "CELLS " << nt << ' ' << 4 * nt << '\n';
  for (int t = 0; t < nt; ++t) out << "3 " << 3 * t << ' ' << 3 * t + 1 << ' ' << 3 * t + 2 << '\n';
  out << "CELL_TYPES " << nt << '\n';
  for (int t = 0; t < nt; ++t) out << "5\n";
  out << "POINT_DATA " << 3 * nt << '\n';
  for (const auto& [name, values] : fields) {
    if (values->size() != space.num_dofs()) throw InputError("vtk field '" + name + "' has wrong length");
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index i = 0; i < values->size(); ++i) out << format_double((*values)(i)) << '\n';
  }
}

void write_matrix_market(const std::string& path, const SparseMatrix& m) {
  std::ofstream out = open_out(path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << format_double(it.value()) << '\n';
    }
  }
}

void write_matrix_market(const std::string& path, const Matrix& m) {
  std::ofstream out = open_out(path);
  out << "%%MatrixMarket matrix array real general\n" << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) out << format_double(m(i, j)) << '\n';
  }
}

void write_pod(const std::string& dir, const std::string& prefix, const PodBasis& pod) {
  write_dense_csv(join(dir, prefix + "_basis.csv"), pod.basis);
}

void write_deim(const std::string& dir, const std::string& prefix, const DeimModel& deim) {
  write_dense_csv(join(dir, prefix + "_basis.csv"), deim.W);
  CsvTable t{{"rank", "index"}, {}};
  for (int i = 0; i < deim.rank(); ++i) t.add_row({std::to_string(i + 1), std::to_string(deim.indices[i])});
  t.write(join(dir, prefix + "_indices.csv"));
}

void write_dmd(const std::string& dir, const std::string& prefix, const DmdModel& dmd) {
  CsvTable t{{"mode", "lambda_re", "lambda_im", "omega_re", "omega_im", "alpha_re", "alpha_im"}, {}};
  for (int j = 0; j < dmd.rank; ++j) {
    t.add_row({std::to_string(j + 1), format_double(dmd.eigenvalues(j).real()),
               format_double(dmd.eigenvalues(j).imag()), format_double(dmd.frequencies(j).real()),
               format_double(dmd.frequencies(j).imag()), format_double(dmd.amplitudes(j).real()),
               format_double(dmd.amplitudes(j).imag())});
  }
  t.write(join(dir, prefix + "_spectrum.csv"));
  write_dense_csv(join(dir, prefix + "_modes_re.csv"), dmd.modes.real());
  write_dense_csv(join(dir, prefix + "_modes_im.csv"), dmd.modes.imag());
}

BinaryWriter::BinaryWriter(const std::string& path) : path_(path), tmp_(path + ".tmp") {}

void BinaryWriter::scalar(double v) {
  const char* p = reinterpret_cast<const char*>(&v);
  buffer_.insert(buffer_.end(), p, p + sizeof v);
}

void BinaryWriter::integer(long v) {
  const char* p = reinterpret_cast<const char*>(&v);
  buffer_.insert(buffer_.end(), p, p + sizeof v);
}

void BinaryWriter::vector(const Vector& v) {
  integer(v.size());
  const char* p = reinterpret_cast<const char*>(v.data());
  buffer_.insert(buffer_.end(), p, p + sizeof(double) * v.size());
}

void BinaryWriter::vectors(const std::vector<Vector>& vs) {
  integer(static_cast<long>(vs.size()));
  for (const Vector& v : vs) vector(v);
}

void BinaryWriter::doubles(const std::vector<double>& vs) {
  vector(Eigen::Map<const Vector>(vs.data(), static_cast<Eigen::Index>(vs.size())));
}

void BinaryWriter::close() {
  {
    std::ofstream out = open_out(tmp_);
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    if (!out) throw InputError("cannot write " + tmp_);
  }
  // Rename so a concurrent reader never sees a partial file.
  std::filesystem::rename(tmp_, path_);
}

BinaryReader::BinaryReader(const std::string& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void BinaryReader::read(void* dst, size_t bytes) {
  if (pos_ + bytes > data_.size()) throw InputError("truncated cache file " + path_);
  std::memcpy(dst, data_.data() + pos_, bytes);
  pos_ += bytes;
}

double BinaryReader::scalar() {
  double v;
  read(&v, sizeof v);
  return v;
}

long BinaryReader::integer() {
  long v;
  read(&v, sizeof v);
  return v;
}

Vector BinaryReader::vector() {
  const long n = integer();
  if (n < 0) throw InputError("corrupt cache file " + path_);
  Vector v(n);
  read(v.data(), sizeof(double) * static_cast<size_t>(n));
  return v;
}

std::vector<Vector> BinaryReader::vectors() {
  const long n = integer();
  if (n < 0) throw InputError("corrupt cache file " + path_);
  std::vector<Vector> out;
  out.reserve(n);
  for (long i = 0; i < n; ++i) out.push_back(vector());
  return out;
}

std::vector<double> BinaryReader::doubles() {
  const Vector v = vector();
  return {v.data(), v.data() + v.size()};
}

}  // namespace fhn::io
