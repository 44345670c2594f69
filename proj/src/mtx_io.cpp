#include "aoft/mtx_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "MTX1 writer assumes a little-endian host");

namespace aoft {

namespace {
constexpr char kMagic[4] = {'M', 'T', 'X', '1'};
constexpr std::uint8_t kDtypeF64 = 1;
}  // namespace

void write_mtx(const std::string &path, const Matrix &m) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_mtx: cannot open " + path);
    std::uint64_t rows = m.rows, cols = m.cols;
    f.write(kMagic, 4);
    f.write(reinterpret_cast<const char *>(&rows), 8);
    f.write(reinterpret_cast<const char *>(&cols), 8);
    f.write(reinterpret_cast<const char *>(&kDtypeF64), 1);
    f.write(reinterpret_cast<const char *>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("write_mtx: short write to " + path);
}

Matrix read_mtx(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_mtx: cannot open " + path);
    char magic[4];
    std::uint64_t rows = 0, cols = 0;
    std::uint8_t dtype = 0;
    f.read(magic, 4);
    f.read(reinterpret_cast<char *>(&rows), 8);
    f.read(reinterpret_cast<char *>(&cols), 8);
    f.read(reinterpret_cast<char *>(&dtype), 1);
    if (!f || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("read_mtx: bad MTX1 header in " + path);
    }
    if (dtype != kDtypeF64) {
        throw std::runtime_error("read_mtx: unsupported dtype in " + path);
    }
    Matrix m(rows, cols);
    f.read(reinterpret_cast<char *>(m.data.data()),
           static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("read_mtx: truncated payload in " + path);
    return m;
}

}  // namespace aoft
