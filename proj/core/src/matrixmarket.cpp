#include "psync/matrixmarket.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace psync {

std::string to_matrix_market(const SparseHermitian& H) {
  const auto& m = H.mat();
  auto cp = m.col_ptr();
  auto ri = m.row_ind();
  auto va = m.values();

  int lower_nnz = 0;
  for (int c = 0; c < m.cols(); ++c)
    for (int p = cp[c]; p < cp[c + 1]; ++p)
      if (ri[p] >= c) ++lower_nnz;

  std::ostringstream out;
  out.precision(17);
  out << "%%MatrixMarket matrix coordinate complex hermitian\n";
  out << m.rows() << ' ' << m.cols() << ' ' << lower_nnz << '\n';
  for (int c = 0; c < m.cols(); ++c)
    for (int p = cp[c]; p < cp[c + 1]; ++p)
      if (ri[p] >= c)
        out << ri[p] + 1 << ' ' << c + 1 << ' ' << va[p].real() << ' ' << va[p].imag() << '\n';
  return out.str();
}

void write_matrix_market(const std::string& path, const SparseHermitian& H) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << to_matrix_market(H);
}

}  // namespace psync
