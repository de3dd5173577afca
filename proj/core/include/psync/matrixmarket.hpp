#pragma once

#include <string>

#include "psync/sparse.hpp"

namespace psync {

// Matrix Market "coordinate complex hermitian" rendering (lower triangle).
std::string to_matrix_market(const SparseHermitian& H);
void write_matrix_market(const std::string& path, const SparseHermitian& H);

}  // namespace psync
