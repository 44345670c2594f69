#pragma once

#include <string>

#include "aoft/linalg.hpp"

namespace aoft {

// "MTX1" dump format: magic "MTX1", u64 rows, u64 cols, u8 dtype (1 = f64),
// then the row-major payload as little-endian doubles.
void write_mtx(const std::string &path, const Matrix &m);
Matrix read_mtx(const std::string &path);

}  // namespace aoft
